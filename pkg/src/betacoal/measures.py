"""Driving measures for Lambda-coalescents.

Three variants are supported:

* :class:`Kingman`, a point mass at zero (pairwise mergers only);
* :class:`Beta` and :class:`PowerLaw`, members of the closed-form family
  with density ``coef * x**(1-alpha) * (1-x)**gamma`` on ``(0, delta]``;
* :class:`Density`, an arbitrary density with an ``A * x**(1-alpha)``
  singularity at the origin, integrated numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from . import _kernels
from .errors import InvalidArgument, NumericalFailure

ASYMPTOTIC_PROBES = (1e-2, 1e-4, 1e-6)


def _check_alpha(alpha):
    if not (1.0 < alpha < 2.0) or not math.isfinite(alpha):
        raise InvalidArgument(f"alpha must lie in (1, 2), got {alpha!r}")


def _check_delta(delta):
    if not (0.0 < delta <= 1.0):
        raise InvalidArgument(f"delta must lie in (0, 1], got {delta!r}")


def _check_rows(b, k):
    if int(b) != b or int(k) != k:
        raise InvalidArgument("b and k must be integers")
    if k < 2 or k > b:
        raise InvalidArgument(f"need 2 <= k <= b, got b={b}, k={k}")


class Measure:
    """Common interface for driving measures.

    Subclasses implement :meth:`lambda_bk` and :meth:`lambda2`; the
    latter is vectorized over ``b`` and feeds the total-rate table.
    """


    #: True when the measure has a density on (0, 1] (usable by the
    #: Poisson construction).
    has_density = False

    def lambda_bk(self, b: int, k: int) -> float:
        raise NotImplementedError

    def lambda2(self, b: np.ndarray) -> np.ndarray:
        """Return ``lambda_{b,2}`` for an integer array of ``b`` values."""
        return np.array([self.lambda_bk(int(v), 2) for v in np.atleast_1d(b)])

    def row(self, b: int) -> np.ndarray:
        """Return ``lambda_{b,k}`` for ``k = 2..b`` as an array."""
        return np.array([self.lambda_bk(b, k) for k in range(2, b + 1)])

    def log_row(self, b: int) -> np.ndarray:
        """Natural log of :meth:`row`, safe against underflow where possible."""
        with np.errstate(divide="ignore"):
            return np.log(self.row(b))

    def scaled(self, c: float) -> "Measure":
        raise NotImplementedError


@dataclass(frozen=True)
class Kingman(Measure):
    """Mass ``scale`` at zero; ``lambda_{b,2} = scale`` and no multiple mergers."""

    scale: float = 1.0
    total_mass: float = field(init=False)

    def __post_init__(self):
        if not self.scale > 0:
            raise InvalidArgument("scale must be positive")
        object.__setattr__(self, "total_mass", float(self.scale))

    def lambda_bk(self, b, k):
        _check_rows(b, k)
        return float(self.scale) if k == 2 else 0.0

    def lambda2(self, b):
        return np.full(np.shape(np.atleast_1d(b)), float(self.scale))

    def row(self, b):
        out = np.zeros(b - 1)
        out[0] = self.scale
        return out

    def scaled(self, c):
        return Kingman(self.scale * c)


class PowerFamily(Measure):
    """Density ``coef * x**(1-alpha) * (1-x)**gamma`` on ``(0, delta]``.

    Merger rates are incomplete beta integrals,

        lambda_{b,k} = coef * B(k-alpha, b-k+1+gamma) * I_delta(k-alpha, b-k+1+gamma),

    and for ``delta == 1`` successive rates obey
    ``lambda_{b,k+1} / lambda_{b,k} = (k-alpha) / (b-k+gamma)``.
    """

    has_density = True
    alpha: float
    coef: float
    gamma: float
    delta: float

    @property
    def A(self):
        """Coefficient of the ``x**(1-alpha)`` singularity at 0."""
        return self.coef

    @property
    def log_coef(self):
        return math.log(self.coef)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = self.coef * x ** (1.0 - self.alpha) * (1.0 - x) ** self.gamma
        return np.where((x > 0) & (x <= self.delta), d, 0.0)

    def _log_rate(self, b, k):
        a1 = k - self.alpha
        a2 = b - k + 1.0 + self.gamma
        a1, a2 = np.broadcast_arrays(np.asarray(a1, float), np.asarray(a2, float))
        shape = a1.shape
        out = self.log_coef + _kernels.log_beta_array(a1.ravel(), a2.ravel()).reshape(shape)
        if not shape:
            out = float(out)
        if self.delta < 1.0:
            with np.errstate(divide="ignore"):
                out = out + np.log(special.betainc(a1, a2, self.delta))
        return out

    def lambda_bk(self, b, k):
        _check_rows(b, k)
        return float(np.exp(self._log_rate(float(b), float(k))))

    def lambda2(self, b):
        b = np.asarray(np.atleast_1d(b), dtype=float)
        return np.exp(self._log_rate(b, 2.0))

    def row(self, b):
        return np.exp(self.log_row(b))

    def log_row(self, b):
        k = np.arange(2, b + 1, dtype=float)
        return self._log_rate(float(b), k)

    def total_mass_value(self):
        return float(np.exp(self._log_rate(2.0, 2.0)))


@dataclass(frozen=True)
class Beta(PowerFamily):
    """The Beta(2-alpha, alpha) law, optionally scaled and cut at ``delta``.

    With ``scale=1`` and ``delta=1`` this is a probability measure and
    ``lambda_{b,k} = B(k-alpha, b-k+alpha) / B(2-alpha, alpha)``.
    """

    alpha: float
    scale: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        _check_alpha(self.alpha)
        _check_delta(self.delta)
        if not self.scale > 0:
            raise InvalidArgument("scale must be positive")

    @property
    def gamma(self):
        return self.alpha - 1.0

    @property
    def coef(self):
        return self.scale / (math.gamma(2.0 - self.alpha) * math.gamma(self.alpha))

    @property
    def log_coef(self):
        return (math.log(self.scale) - math.lgamma(2.0 - self.alpha)
                - math.lgamma(self.alpha))

    @property
    def total_mass(self):
        return self.total_mass_value()

    def scaled(self, c):
        return Beta(self.alpha, self.scale * c, self.delta)

    def restricted(self, delta):
        return Beta(self.alpha, self.scale, min(self.delta, delta))


@dataclass(frozen=True)
class PowerLaw(PowerFamily):
    """Density ``A * x**(1-alpha)`` on ``(0, delta]``."""

    alpha: float
    A: float = 1.0
    delta: float = 1.0

    def __post_init__(self):
        _check_alpha(self.alpha)
        _check_delta(self.delta)
        if not self.A > 0:
            raise InvalidArgument("A must be positive")

    gamma = 0.0

    @property
    def coef(self):
        return self.A

    @property
    def total_mass(self):
        return self.total_mass_value()

    def scaled(self, c):
        return PowerLaw(self.alpha, self.A * c, self.delta)

    def restricted(self, delta):
        return PowerLaw(self.alpha, self.A, min(self.delta, delta))


@dataclass(frozen=True, eq=False)
class Density(Measure):
    """General density on ``(0, delta]`` with ``density(x) ~ A x**(1-alpha)``.

    Parameters
    ----------
    alpha : float
        Singularity exponent, in (1, 2).
    A : float
        Leading coefficient at the origin.
    density : callable
        Vectorized map from ``(0, 1]`` to nonnegative reals.
    delta : float
        Support cutoff.
    asymptotic_tol : float
        Allowed relative deviation of ``density(x) / (A x**(1-alpha))``
        from one at the probe points 1e-2, 1e-4 and 1e-6.
    envelope : float, optional
        Upper bound for ``density(x) / x**(1-alpha)`` on the support,
        used by the coupled simulation. Estimated on a mesh if omitted.
    """

    alpha: float
    A: float
    density_fn: Callable[[np.ndarray], np.ndarray]
    delta: float = 1.0
    asymptotic_tol: float = 0.05
    envelope: float | None = None
    rtol: float = 1e-10

    has_density = True

    def __post_init__(self):
        _check_alpha(self.alpha)
        _check_delta(self.delta)
        if not self.A > 0:
            raise InvalidArgument("A must be positive")
        probes = np.array([p for p in ASYMPTOTIC_PROBES if p <= self.delta])
        if probes.size:
            ratio = np.asarray(self.density_fn(probes), float) / (
                self.A * probes ** (1.0 - self.alpha))
            if np.any(np.abs(ratio - 1.0) > self.asymptotic_tol):
                raise InvalidArgument(
                    "density does not match A*x^(1-alpha) near 0: "
                    f"ratios {ratio.tolist()}")
        if self.envelope is None:
            mesh = np.geomspace(1e-9, self.delta, 4001)
            r = np.asarray(self.density_fn(mesh), float) * mesh ** (self.alpha - 1.0)
            object.__setattr__(self, "envelope", float(r.max()) * 1.001)

    def density(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > 0) & (x <= self.delta)
        out = np.zeros_like(x)
        if np.any(inside):
            out[inside] = np.asarray(self.density_fn(x[inside]), float)
        return out

    @property
    def total_mass(self):
        return self.lambda_bk(2, 2)

    def lambda_bk(self, b, k):
        _check_rows(b, k)
        return _singular_quad(self.density_fn, self.alpha, self.delta, b, k, self.rtol)

    def scaled(self, c):
        fn = self.density_fn
        return Density(self.alpha, self.A * c, lambda x: c * fn(x), self.delta,
                       self.asymptotic_tol,
                       None if self.envelope is None else self.envelope * c,
                       self.rtol)


def _singular_quad(f, alpha, delta, b, k, rtol):
    """Integrate ``x**(k-2) (1-x)**(b-k) f(x)`` over ``(0, delta]``.

    Uses ``x = u**(1/(2-alpha))`` so that the ``x**(1-alpha)`` factor of
    ``f`` is absorbed by the Jacobian and the integrand is bounded.
    """
    p = 1.0 / (2.0 - alpha)

    def integrand(u):
        x = u ** p
        if x <= 0.0:
            return 0.0
        val = float(f(np.array([x]))[0])
        return x ** (k - 3.0 + alpha) * (1.0 - x) ** (b - k) * val * p

    upper = delta ** (2.0 - alpha)
    # the integrand concentrates near x ~ k/b for large b
    xs = [c * (k - 1) / b for c in (0.1, 1.0, 10.0, 100.0)]
    pts = sorted({x ** (2.0 - alpha) for x in xs if 0 < x < delta})
    out = integrate.quad(integrand, 0.0, upper, points=pts or None, epsabs=0.0,
                         epsrel=rtol, limit=500, full_output=1)
    res, err = out[0], out[1]
    if len(out) > 3 and res != 0 and abs(err) > 10 * rtol * abs(res):
        raise NumericalFailure("quadrature did not converge",
                               {"b": b, "k": k, "estimate": res, "abserr": err})
    return res
