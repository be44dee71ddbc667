"""Atom systems of the alpha-stable CSBP with mechanism ``u**alpha``.

Starting from mass ``a``, the population at time ``t`` descends from a
Poisson(``a theta_t``) number of ancestors, each contributing an
independent mass ``X / theta_t`` with ``X ~ mu``. Because the same
description holds for every atom over any step ``s``, evolution on a
time grid is exact; only the clock ``R`` is approximated (trapezoid).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument
from .mu import MuTable

__all__ = [
    "u_t",
    "theta",
    "theta_inverse",
    "AtomSystem",
    "sample_atoms",
    "evolve_atoms",
    "largest_atom",
    "TimeChangePath",
    "CSBPPath",
    "time_grid",
    "simulate_path",
    "time_change",
    "time_change_constant",
    "ClockSnapshot",
    "atoms_at_clock",
]


def _check_alpha(alpha):
    if not 1.0 < alpha < 2.0:
        raise InvalidArgument(f"alpha must lie in (1, 2), got {alpha!r}")


def u_t(alpha, t, lam):
    """``[(alpha-1) t + lam**(1-alpha)]**(-1/(alpha-1))``; ``u_0(lam) = lam``."""
    _check_alpha(alpha)
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0):
        raise InvalidArgument("lambda must be positive")
    if np.any(np.asarray(t) < 0):
        raise InvalidArgument("t must be nonnegative")
    out = ((alpha - 1.0) * np.asarray(t, float) + lam ** (1.0 - alpha)) ** (-1.0 / (alpha - 1.0))
    return float(out) if np.ndim(out) == 0 else out


def theta(alpha, t):
    """Expected number of atoms per unit initial mass, ``[(alpha-1) t]**(-1/(alpha-1))``."""
    _check_alpha(alpha)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise InvalidArgument("t must be positive")
    out = ((alpha - 1.0) * t) ** (-1.0 / (alpha - 1.0))
    return float(out) if out.ndim == 0 else out


def theta_inverse(alpha, value):
    """Time at which ``theta`` equals ``value``."""
    return value ** (1.0 - alpha) / (alpha - 1.0)


def time_change_constant(alpha):
    """``alpha (alpha-1) Gamma(alpha)``."""
    return alpha * (alpha - 1.0) * math.gamma(alpha)


@dataclass(frozen=True)
class AtomSystem:
    """Atoms of the CSBP measure at ``grid_time``; ids persist across steps."""

    alpha: float
    ids: np.ndarray
    masses: np.ndarray
    grid_time: float

    @property
    def total_mass(self):
        return math.fsum(self.masses)

    @property
    def count(self):
        return int(self.masses.size)


def largest_atom(system: AtomSystem) -> float:
    return float(system.masses.max()) if system.masses.size else 0.0


def sample_atoms(alpha, t, a, mu: MuTable, rng) -> AtomSystem:
    """Atoms at time ``t`` of the CSBP started from mass ``a``."""
    _check_alpha(alpha)
    if a <= 0:
        raise InvalidArgument("initial mass must be positive")
    if mu.alpha != alpha:
        raise InvalidArgument("mu table built for a different alpha")
    th = theta(alpha, t)
    k = int(rng.poisson(a * th))
    masses = mu.sample(rng, k) / th
    return AtomSystem(alpha, np.arange(k, dtype=np.int64), masses, float(t))


def _step(system, s, mu, rng):
    th = theta(system.alpha, s)
    m = system.masses
    counts = rng.poisson(m * th)
    total = int(counts.sum())
    x = mu.sample(rng, total)
    owner = np.repeat(np.arange(m.size), counts)
    new = np.bincount(owner, weights=x, minlength=m.size) / th
    return new, counts, th


def evolve_atoms(system: AtomSystem, s: float, mu: MuTable, rng,
                 return_deaths: bool = False):
    """Advance every atom by time ``s``.

    An atom of mass ``a`` becomes a sum of Poisson(``a theta_s``) terms
    ``X / theta_s``; atoms left with no terms are removed.

    With ``return_deaths=True`` also returns the extinction times of the
    removed atoms. Given death within the step, the extinction time ``u``
    of a mass-``a`` atom has ``P(tau <= u | tau <= s) = exp(-a (theta_u - theta_s))``
    and is sampled by inversion.
    """
    if s <= 0:
        raise InvalidArgument("s must be positive")
    new, counts, th = _step(system, s, mu, rng)
    alive = counts > 0
    out = AtomSystem(system.alpha, system.ids[alive], new[alive], system.grid_time + s)
    if not return_deaths:
        return out
    dead_mass = system.masses[~alive]
    v = rng.random(dead_mass.size)
    with np.errstate(divide="ignore"):
        th_u = th - np.log(v) / dead_mass
    u = theta_inverse(system.alpha, th_u)
    return out, system.ids[~alive], system.grid_time + np.minimum(u, s)


@dataclass(frozen=True)
class TimeChangePath:
    """Trapezoidal clock ``R(s) = c * int_0^s Z(u)**(1-alpha) du`` on a grid."""

    grid: np.ndarray
    Z: np.ndarray
    R: np.ndarray
    truncated: bool = False

    def inverse(self, t):
        """``R^{-1}(t)`` by linear interpolation; ``nan`` beyond the grid."""
        t = np.asarray(t, dtype=float)
        ok = np.isfinite(self.R)
        out = np.interp(t, self.R[ok], self.grid[ok], right=np.nan)
        return float(out) if out.ndim == 0 else out


def _trapezoid_R(alpha, grid, Z):
    c = time_change_constant(alpha)
    with np.errstate(divide="ignore"):
        w = Z ** (1.0 - alpha)
    inc = 0.5 * (w[1:] + w[:-1]) * np.diff(grid)
    R = np.concatenate([[0.0], np.cumsum(c * inc)])
    dead = np.flatnonzero(Z <= 0)
    truncated = bool(dead.size)
    if truncated:
        R[dead[0]:] = np.inf
    return R, truncated


def time_grid(alpha, a, s_max, theta_cap=1e7, ratio=1.5, s_uniform=None, step=None):
    """Grid ``0 = s_0 < s_1 < ...`` with ``a * theta(s_1) <= theta_cap``.

    Geometric with the given ratio from ``s_1`` up to ``s_uniform``, then
    uniform with spacing ``step`` up to ``s_max``.
    """
    s1 = theta_inverse(alpha, theta_cap / a)
    pts = [0.0, s1]
    s_uniform = s_max if s_uniform is None else s_uniform
    while pts[-1] * ratio < min(s_uniform, s_max):
        pts.append(pts[-1] * ratio)
    if step is not None:
        while pts[-1] + step <= s_max + 1e-15:
            pts.append(pts[-1] + step)
    if pts[-1] < s_max:
        pts.append(s_max)
    return np.array(pts)


@dataclass
class CSBPPath:
    """Skeleton of one CSBP run: total mass and atom counts on the grid.

    ``death_times`` holds the sorted extinction times of the atoms that
    died within the simulated range, so the atom count is known between
    grid points as well.
    """

    alpha: float
    initial_mass: float
    grid: np.ndarray
    Z: np.ndarray
    counts: np.ndarray
    death_times: np.ndarray
    states: list | None = None

    def count_at(self, s):
        """Number of atoms alive at time ``s >= grid[1]``."""
        if s < self.grid[1]:
            raise InvalidArgument("atom count is only tracked from the first grid point")
        j = int(np.searchsorted(self.grid, s, side="right")) - 1
        if j >= self.grid.size - 1:
            return int(self.counts[-1])
        hi = self.grid[j + 1]
        pending = (np.searchsorted(self.death_times, hi, side="right")
                   - np.searchsorted(self.death_times, s, side="right"))
        return int(self.counts[j + 1] + pending)


def simulate_path(alpha, a, grid, mu: MuTable, rng, keep_states=False) -> CSBPPath:
    """Run the atom system along ``grid`` (which starts at 0)."""
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
        raise InvalidArgument("grid must start at 0 and increase")
    sys_ = sample_atoms(alpha, grid[1], a, mu, rng)
    Z = [a, sys_.total_mass]
    counts = [1, sys_.count]
    deaths = []
    states = [sys_] if keep_states else None
    for j in range(2, grid.size):
        if sys_.count == 0:
            Z.append(0.0)
            counts.append(0)
            continue
        sys_, _, dead_at = evolve_atoms(sys_, grid[j] - grid[j - 1], mu, rng, True)
        deaths.append(dead_at)
        Z.append(sys_.total_mass)
        counts.append(sys_.count)
        if keep_states:
            states.append(sys_)
    death_times = np.sort(np.concatenate(deaths)) if deaths else np.zeros(0)
    return CSBPPath(alpha, a, grid, np.array(Z), np.array(counts), death_times, states)


def time_change(path) -> TimeChangePath:
    """Trapezoidal ``R`` along a :class:`CSBPPath` or a ``(grid, Z)`` pair."""
    if isinstance(path, CSBPPath):
        grid, Z, alpha = path.grid, path.Z, path.alpha
    else:
        grid, Z, alpha = path
        grid, Z = np.asarray(grid, float), np.asarray(Z, float)
    R, truncated = _trapezoid_R(alpha, grid, Z)
    return TimeChangePath(grid, Z, R, truncated)


@dataclass(frozen=True)
class ClockSnapshot:
    """Atoms at the grid point ``s`` where the trapezoidal clock reached ``R``."""

    system: AtomSystem
    s: float
    R: float
    path: TimeChangePath


def atoms_at_clock(alpha, a, t, mu: MuTable, rng, theta_cap=2e4, ratio=1.5,
                   step=0.0075, rtol=2e-3) -> ClockSnapshot:
    """Run the atom system until the clock ``R`` reaches ``t``.

    The grid is geometric from ``s_1`` and capped at ``step``. Close to
    the target, the step is set from the current ``Z`` so that the last
    grid point lands on the predicted ``R^{-1}(t)``. Atom masses are then
    exact at that point; only ``R`` carries quadrature error, and the
    run stops once ``|R - t| <= rtol * t`` or ``R`` passes ``t``.
    Steps never shrink below a tenth of the regular step, which keeps
    the Poisson means bounded.
    """
    _check_alpha(alpha)
    if t <= 0:
        raise InvalidArgument("t must be positive")
    c = time_change_constant(alpha)
    s = theta_inverse(alpha, theta_cap / a)
    sys_ = sample_atoms(alpha, s, a, mu, rng)
    Z = sys_.total_mass
    grid, Zs = [0.0, s], [a, Z]
    R = 0.5 * c * s * (a ** (1.0 - alpha) + Z ** (1.0 - alpha)) if Z > 0 else math.inf
    while sys_.count and R < t and abs(R - t) > rtol * t:
        h = min(s * (ratio - 1.0), step)
        rem = (t - R) / (c * Z ** (1.0 - alpha))
        d = rem if rem <= h else (0.5 * rem if rem < 2.0 * h else h)
        d = max(d, 0.1 * h)
        nxt = evolve_atoms(sys_, d, mu, rng)
        Zn = nxt.total_mass
        R = R + 0.5 * c * d * (Z ** (1.0 - alpha) + Zn ** (1.0 - alpha)) if Zn > 0 else math.inf
        s += d
        sys_, Z = nxt, Zn
        grid.append(s)
        Zs.append(Z)
    path = time_change((np.array(grid), np.array(Zs), alpha))
    return ClockSnapshot(sys_, s, float(R), path)
