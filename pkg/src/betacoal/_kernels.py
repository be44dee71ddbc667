"""Compiled inner loops for the block-counting chain and partitions.

Jump sizes are drawn by sequential inversion. With ``b`` blocks the
probability of losing ``j - 1`` blocks is proportional to
``C(b, j) lambda_{b,j}``; consecutive terms of the closed-form family
differ by the factor ``(b-j)/(j+1) * (j-alpha)/(b-j+gamma)``, so a draw
costs O(blocks lost) operations.

``kind`` selects the rate family: 0 for Kingman, 1 for the closed-form
power family with cutoff 1.
"""

import math

import numpy as np
from numba import njit

KINGMAN = 0
POWER = 1


@njit(cache=True)
def seed(value):
    np.random.seed(value)


@njit(cache=True)
def kahan_cumsum(start, comp, incr):
    out = np.empty(incr.size)
    s = start
    c = comp
    for i in range(incr.size):
        y = incr[i] - c
        t = s + y
        c = (t - s) - y
        s = t
        out[i] = s
    return out, c


@njit(cache=True)
def _stirling_tail(z):
    r = 1.0 / z
    r2 = r * r
    return r * (1.0 / 12 + r2 * (-1.0 / 360 + r2 * (1.0 / 1260 + r2 * (-1.0 / 1680
                                                                      + r2 / 1188))))


@njit(cache=True)
def log_gamma_ratio(z, m):
    """``log Gamma(z+m) - log Gamma(z)`` for ``z > 0``, ``m >= 0``.

    For large ``z`` the Stirling series is differenced term by term so
    that the leading ``z log z`` parts cancel analytically.
    """
    if z < 40.0:
        return math.lgamma(z + m) - math.lgamma(z)
    return ((z - 0.5) * math.log1p(m / z) + m * math.log(z + m) - m
            + _stirling_tail(z + m) - _stirling_tail(z))


@njit(cache=True)
def log_beta(a1, a2):
    if a1 > a2:
        a1, a2 = a2, a1
    return math.lgamma(a1) - log_gamma_ratio(a2, a1)


@njit(cache=True)
def log_beta_array(a1, a2):
    out = np.empty(a1.size)
    for i in range(a1.size):
        out[i] = log_beta(a1[i], a2[i])
    return out


@njit(cache=True)
def log_lambda2(b, alpha, gamma, log_coef):
    return log_coef + log_beta(2.0 - alpha, b - 1.0 + gamma)


@njit(cache=True)
def total_rate_recurrence(b, alpha, gamma, log_coef):
    term = 0.5 * b * (b - 1.0) * math.exp(log_lambda2(b, alpha, gamma, log_coef))
    s = term
    c = 0.0
    for j in range(2, b):
        term *= (b - j) / (j + 1.0) * (j - alpha) / (b - j + gamma)
        y = term - c
        t = s + y
        c = (t - s) - y
        s = t
    return s


@njit(cache=True)
def sample_lost(b, u, lam_b, alpha, gamma, log_coef, kind):
    """Number of blocks lost at a jump from ``b`` blocks, given uniform ``u``."""
    if kind == KINGMAN or b == 2:
        return 1
    term = 0.5 * b * (b - 1.0) * math.exp(log_lambda2(b, alpha, gamma, log_coef))
    target = u * lam_b
    cum = term
    j = 2
    while cum < target and j < b:
        term *= (b - j) / (j + 1.0) * (j - alpha) / (b - j + gamma)
        j += 1
        cum += term
    return j - 1


@njit(cache=True)
def advance_chain(b, t, t_end, b_stop, lam, alpha, gamma, log_coef, kind,
                  out_t, out_c, store):
    """Run the chain from ``(b, t)`` until ``t_end`` or ``count <= b_stop``.

    Returns ``(b, t, length, n_events)``; ``length`` is the accumulated
    ``sum count * holding time`` over the simulated interval. When the
    horizon is reached first, the returned time equals ``t_end``.
    """
    n_ev = 0
    length = 0.0
    while b > b_stop:
        dt = np.random.exponential(1.0 / lam[b])
        if t + dt > t_end:
            length += b * (t_end - t)
            return b, t_end, length, n_ev
        t += dt
        length += b * dt
        lost = sample_lost(b, np.random.random(), lam[b], alpha, gamma, log_coef, kind)
        b -= lost
        if store:
            out_t[n_ev] = t
            out_c[n_ev] = b
        n_ev += 1
    return b, t, length, n_ev


@njit(cache=True)
def advance_sizes(sizes, b, t, one_pos, t_end, b_stop, lam, alpha, gamma,
                  log_coef, kind):
    """Advance a sizes-only partition.

    ``sizes[:b]`` holds the current block sizes in arbitrary order and
    ``one_pos`` the index of the block containing label 1. Merging blocks
    are chosen by a partial Fisher-Yates shuffle toward the end of the
    active range. Returns ``(b, t, one_pos)``.
    """
    while b > b_stop:
        dt = np.random.exponential(1.0 / lam[b])
        if t + dt > t_end:
            return b, t_end, one_pos
        t += dt
        m = sample_lost(b, np.random.random(), lam[b], alpha, gamma, log_coef, kind) + 1
        hit_one = False
        total = 0
        for i in range(m):
            last = b - 1 - i
            r = np.random.randint(0, last + 1)
            tmp = sizes[r]
            sizes[r] = sizes[last]
            sizes[last] = tmp
            if r == one_pos:
                one_pos = last
            elif last == one_pos:
                one_pos = r
            total += sizes[last]
            if one_pos == last:
                hit_one = True
        dest = b - m
        sizes[dest] = total
        if hit_one:
            one_pos = dest
        b = dest + 1
    return b, t, one_pos
