"""The law mu with Laplace transform ``1 - (1 + lam**(1-alpha))**(-1/(alpha-1))``.

mu has mean one, infinite variance, a power head
``F(x) ~ x**(alpha-1) / ((alpha-1) Gamma(alpha))`` at the origin and a
tail ``1 - F(x) ~ x**(-alpha) / Gamma(2-alpha)``. No closed-form CDF is
known, so :func:`build_mu_table` tabulates ``F`` and ``1 - F`` on a
geometric grid:

* near the origin from the series
  ``F(x) = sum_j (-1)**(j+1) (p)_j / j! * x**((alpha-1) j) / Gamma((alpha-1) j + 1)``
  with ``p = 1/(alpha-1)``, which converges for every ``x``;
* in the bulk by Euler inversion of ``phi(s) / s``;
* in the upper half by Euler inversion of the survival transform with its
  constant part removed, ``(1 + s**(alpha-1))**(-p) - 1``. Without the
  subtraction the inversion loses all accuracy beyond ``x ~ 1e6``.

The grid is extended until the table matches the analytic tail, which
then takes over.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from . import __version__, laplace
from .errors import InvalidArgument, NumericalFailure

SCHEMA_VERSION = 1


def _check_alpha(alpha):
    if not 1.0 < alpha < 2.0:
        raise InvalidArgument(f"alpha must lie in (1, 2), got {alpha!r}")


def laplace_mu(alpha, lam):
    """``E[exp(-lam X)]`` for ``X ~ mu``."""
    _check_alpha(alpha)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise InvalidArgument("lambda must be nonnegative")
    with np.errstate(divide="ignore"):
        v = lam ** (1.0 - alpha)
    out = -np.expm1(-np.log1p(v) / (alpha - 1.0))
    return float(out) if out.ndim == 0 else out


def laplace_size_biased(alpha, lam):
    """Laplace transform of the size-biased law ``x mu(dx)``."""
    _check_alpha(alpha)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise InvalidArgument("lambda must be nonnegative")
    out = np.exp(-alpha / (alpha - 1.0) * np.log1p(lam ** (alpha - 1.0)))
    return float(out) if out.ndim == 0 else out


def head_series(alpha, x, terms=80):
    """CDF of mu from its power series in ``x**(alpha-1)``.

    Accurate to rounding while the leading term is small; cancellation
    sets in once ``x**(alpha-1)`` is of order one.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = 1.0 / (alpha - 1.0)
    j = np.arange(1, terms + 1)
    logc = (gammaln(p + j) - gammaln(p) - gammaln(j + 1.0)
            - gammaln((alpha - 1.0) * j + 1.0))
    sign = np.where(j % 2 == 1, 1.0, -1.0)
    w = np.log(x)[:, None] * ((alpha - 1.0) * j)
    return (sign * np.exp(logc + w)).sum(axis=1)


def tail_sf(alpha, x):
    """Analytic tail ``x**(-alpha) / Gamma(2-alpha)``."""
    return np.asarray(x, dtype=float) ** (-alpha) / math.gamma(2.0 - alpha)


def _cdf_hat(alpha):
    p = 1.0 / (alpha - 1.0)

    def fhat(s):
        return -np.expm1(-p * np.log1p(s ** (1.0 - alpha))) / s
    return fhat


def _sf_hat_minus_one(alpha):
    p = 1.0 / (alpha - 1.0)

    def fhat(s):
        return np.expm1(-p * np.log1p(s ** (alpha - 1.0)))
    return fhat


@dataclass(frozen=True)
class InversionConfig:
    """Settings for :func:`build_mu_table`.

    Attributes
    ----------
    points_per_decade : int
        Grid density.
    head_cdf : float
        Target value of ``F`` at the first grid point.
    series_cut : float
        Use the head series while its leading term is below this value.
    tail_match : float
        Stop extending the grid once table and analytic tail agree to this
        relative tolerance.
    x_cap : float
        Hard upper limit for the grid.
    M_cdf, M_sf : int
        Euler orders for the CDF and survival inversions.
    """

    points_per_decade: int = 40
    head_cdf: float = 1e-6
    series_cut: float = 0.05
    tail_match: float = 5e-3
    x_cap: float = 1e20
    M_cdf: int = 15
    M_sf: int = 12


@dataclass(frozen=True)
class MuTable:
    """Tabulated CDF and survival function of mu.

    ``cdf`` and ``sf`` are stored separately so that tail probabilities
    keep full relative precision. Beyond ``switch_point`` the analytic
    tail is used.
    """

    alpha: float
    grid: np.ndarray
    cdf: np.ndarray
    sf: np.ndarray
    tail_coeff: float
    tail_exponent: float
    switch_point: float
    _logx: np.ndarray = field(init=False, repr=False, compare=False)
    _logF: np.ndarray = field(init=False, repr=False, compare=False)
    _logG: np.ndarray = field(init=False, repr=False, compare=False)
    _ic: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        with np.errstate(divide="ignore"):
            object.__setattr__(self, "_logx", np.log(self.grid))
            object.__setattr__(self, "_logF", np.log(self.cdf))
            object.__setattr__(self, "_logG", np.log(self.sf))
        ic = int(np.searchsorted(self.cdf, 0.5, side="right")) - 1
        object.__setattr__(self, "_ic", max(ic, 0))

    # ---- queries -------------------------------------------------------
    def sf_at(self, x):
        """Survival function ``1 - F(x)``."""
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        flat = x.ravel()
        res = out.ravel()
        a = self.alpha
        ic = self._ic
        x1, xm = self.grid[0], self.grid[-1]
        with np.errstate(divide="ignore"):
            lx = np.log(flat)
        below = flat < x1
        lower = (~below) & (flat <= self.grid[ic])
        upper = (flat > self.grid[ic]) & (flat <= xm)
        beyond = flat > xm
        res[below] = -np.expm1((a - 1.0) * (lx[below] - self._logx[0]) + self._logF[0])
        res[lower] = -np.expm1(np.interp(lx[lower], self._logx[:ic + 1], self._logF[:ic + 1]))
        res[upper] = np.exp(np.interp(lx[upper], self._logx[ic:], self._logG[ic:]))
        res[beyond] = np.minimum(self.tail_coeff * flat[beyond] ** (-self.tail_exponent),
                                 self.sf[-1])
        return out if out.ndim else float(out)

    def cdf_at(self, x):
        """CDF ``F(x)``."""
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        flat = x.ravel()
        res = out.ravel()
        ic = self._ic
        with np.errstate(divide="ignore"):
            lx = np.log(flat)
        below = flat < self.grid[0]
        lower = (~below) & (flat <= self.grid[ic])
        rest = flat > self.grid[ic]
        res[below] = np.exp((self.alpha - 1.0) * (lx[below] - self._logx[0]) + self._logF[0])
        res[lower] = np.exp(np.interp(lx[lower], self._logx[:ic + 1], self._logF[:ic + 1]))
        res[rest] = 1.0 - np.asarray(self.sf_at(flat[rest]))
        return out if out.ndim else float(out)

    def quantile(self, p, q=None):
        """Inverse CDF at ``p``; ``q = 1 - p`` may be passed for tail precision."""
        p = np.asarray(p, dtype=float)
        if np.any((p <= 0) | (p >= 1)):
            raise InvalidArgument("p must lie in (0, 1)")
        q = 1.0 - p if q is None else np.asarray(q, dtype=float)
        return self._ppf(p, q)

    def _ppf(self, p, q):
        out = np.empty(p.shape)
        fp, fq, res = p.ravel(), q.ravel(), out.ravel()
        a = self.alpha
        ic = self._ic
        F0, Fc, Gm = self.cdf[0], self.cdf[ic], self.sf[-1]
        with np.errstate(divide="ignore"):
            lp = np.log(fp)
            lq = np.log(fq)
        below = fp < F0
        lower = (~below) & (fp <= Fc)
        upper = (fp > Fc) & (fq >= Gm)
        beyond = (fp > Fc) & (fq < Gm)
        res[below] = np.exp(self._logx[0] + (lp[below] - self._logF[0]) / (a - 1.0))
        res[lower] = np.exp(np.interp(lp[lower], self._logF[:ic + 1], self._logx[:ic + 1]))
        res[upper] = np.exp(np.interp(lq[upper], self._logG[ic:][::-1], self._logx[ic:][::-1]))
        res[beyond] = np.maximum((fq[beyond] / self.tail_coeff) ** (-1.0 / self.tail_exponent),
                                 self.grid[-1])
        return out if out.ndim else float(out)

    def sample(self, rng, size=None):
        """Inverse-CDF draws from mu using ``rng`` (a numpy Generator)."""
        u = rng.random(size)
        return self._ppf(np.asarray(u, float), 1.0 - np.asarray(u, float))

    def mean(self):
        """Integral of the survival function, table plus analytic tail."""
        a = self.alpha
        x, G = self.grid, self.sf
        head = x[0] - x[0] * self.cdf[0] / a  # integral of F0 (x/x1)^(a-1) is x1 F0 / a
        body = integrate.trapezoid(G * x, self._logx)
        tail = self.tail_coeff * x[-1] ** (1.0 - a) / (a - 1.0)
        return head + float(body) + tail

    # ---- serialization -------------------------------------------------
    def header(self):
        return {
            "schema": "mu_table",
            "schema_version": SCHEMA_VERSION,
            "package_version": __version__,
            "alpha": self.alpha,
            "tail_coeff": self.tail_coeff,
            "tail_exponent": self.tail_exponent,
            "switch_point": self.switch_point,
        }

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("# " + json.dumps(self.header()) + "\n")
            fh.write("x,F,sf\n")
            for row in zip(self.grid, self.cdf, self.sf):
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path, encoding="utf-8") as fh:
            first = fh.readline()
            if not first.startswith("# "):
                raise InvalidArgument("missing JSON header line")
            meta = json.loads(first[2:])
            if meta.get("schema") != "mu_table" or meta.get("schema_version") != SCHEMA_VERSION:
                raise InvalidArgument(f"unsupported table schema: {meta}")
            fh.readline()
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        return cls(float(meta["alpha"]), data[:, 0].copy(), data[:, 1].copy(),
                   data[:, 2].copy(), float(meta["tail_coeff"]),
                   float(meta["tail_exponent"]), float(meta["switch_point"]))


def _evaluate(alpha, x, cfg):
    """Return ``(F, G)`` at the points ``x``."""
    p = 1.0 / (alpha - 1.0)
    lead = p * x ** (alpha - 1.0) / math.gamma(alpha)
    F = np.empty_like(x)
    use_series = lead <= cfg.series_cut
    if np.any(use_series):
        F[use_series] = head_series(alpha, x[use_series])
    if np.any(~use_series):
        F[~use_series] = laplace.invert(_cdf_hat(alpha), x[~use_series], cfg.M_cdf)
    G = 1.0 - F
    upper = F > 0.5
    if np.any(upper):
        G[upper] = laplace.invert(_sf_hat_minus_one(alpha), x[upper], cfg.M_sf)
        F[upper] = 1.0 - G[upper]
    return F, G


def build_mu_table(alpha: float, config: InversionConfig | None = None) -> MuTable:
    """Tabulate mu for the given ``alpha``.

    Raises
    ------
    NumericalFailure
        If the inverted values are not monotone, or the stitched table
        violates the mean, head or tail checks.
    """
    _check_alpha(alpha)
    cfg = config or InversionConfig()
    p = 1.0 / (alpha - 1.0)
    x1 = min((cfg.head_cdf * math.gamma(alpha) / p) ** (1.0 / (alpha - 1.0)), 1e-4)
    coeff = 1.0 / math.gamma(2.0 - alpha)

    lo = math.log10(x1)
    hi = 3.0
    xs, Fs, Gs = [], [], []
    start = lo
    while True:
        npts = max(int(round((hi - start) * cfg.points_per_decade)), 2)
        x = np.logspace(start, hi, npts + 1)
        if xs:
            x = x[1:]
        F, G = _evaluate(alpha, x, cfg)
        xs.append(x)
        Fs.append(F)
        Gs.append(G)
        ratio = G[-1] / (coeff * x[-1] ** -alpha)
        if (abs(ratio - 1.0) <= cfg.tail_match and G[-1] <= 1e-3) or 10 ** hi >= cfg.x_cap:
            break
        start, hi = hi, hi + 1.0
    grid = np.concatenate(xs)
    cdf = np.concatenate(Fs)
    sf = np.concatenate(Gs)

    bad = np.flatnonzero((np.diff(sf) >= 0) | (np.diff(cdf) < 0))
    if bad.size or np.any(sf <= 0) or np.any(cdf <= 0):
        raise NumericalFailure("inverted CDF is not monotone",
                               {"indices": bad[:20].tolist(),
                                "x": grid[bad[:20]].tolist()})
    table = MuTable(float(alpha), grid, cdf, sf, coeff, float(alpha), float(grid[-1]))
    _validate(table)
    return table


def _validate(table):
    problems = {}
    if not table.cdf[0] < 0.01:
        problems["head"] = float(table.cdf[0])
    if table.grid[0] > 1e-4:
        problems["first_point"] = float(table.grid[0])
    if not table.sf[-1] <= 1e-3:
        problems["switch_sf"] = float(table.sf[-1])
    match = table.sf[-1] / (table.tail_coeff * table.switch_point ** -table.alpha)
    if abs(match - 1.0) > 0.02:
        problems["tail_match"] = float(match)
    m = table.mean()
    if abs(m - 1.0) > 5e-3:
        problems["mean"] = m
    if problems:
        raise NumericalFailure("mu table failed validation", problems)


_TABLES: dict = {}


def get_mu_table(alpha: float) -> MuTable:
    """Memoized :func:`build_mu_table` with default settings."""
    key = float(alpha)
    tab = _TABLES.get(key)
    if tab is None:
        tab = _TABLES[key] = build_mu_table(key)
    return tab


def quantile_mu(table: MuTable, p):
    return table.quantile(p)


def sample_mu(table: MuTable, rng, size=None):
    return table.sample(rng, size)
