"""Merger rates, total rates and jump laws of the block-counting chain."""

from __future__ import annotations

import math
import threading

import numpy as np
from scipy import special

from . import _kernels
from .errors import InvalidArgument
from .measures import Density, Kingman, Measure, PowerFamily

__all__ = [
    "RateCache",
    "get_cache",
    "lambda_bk",
    "total_rate",
    "total_rate_direct",
    "jump_distribution",
    "limit_zeta",
]


class RateCache:
    """Memo of total rates ``lambda_b`` for one measure.

    The table is grown with the telescoping identity
    ``lambda_{b+1} = lambda_b + b * lambda_{b+1,2}``, which follows from
    summing the consistency relation over ``k``. Each new entry costs one
    rate evaluation and the running sum is compensated.

    Reads are lock-free; extending the table is serialized.
    """

    def __init__(self, measure: Measure):
        self.measure = measure
        self._lock = threading.Lock()
        self._table = np.zeros(3)
        self._table[2] = measure.lambda_bk(2, 2)
        self._comp = 0.0

    @property
    def size(self):
        """Largest ``b`` currently tabulated."""
        return self._table.size - 1

    def _extend(self, bmax):
        with self._lock:
            cur = self._table.size - 1
            if bmax <= cur:
                return
            # grow geometrically so that repeated small requests stay cheap
            new_max = max(bmax, int(cur * 1.5) + 16)
            b = np.arange(cur + 1, new_max + 1)
            incr = (b - 1) * self.measure.lambda2(b)
            ext, self._comp = _kernels.kahan_cumsum(self._table[cur], self._comp, incr)
            self._table = np.concatenate([self._table, ext])

    def table(self, bmax: int) -> np.ndarray:
        """Return an array whose entry ``b`` is ``lambda_b`` for ``2 <= b <= bmax``."""
        if self._table.size - 1 < bmax:
            self._extend(bmax)
        return self._table

    def total(self, b: int) -> float:
        return float(self.table(b)[b])


_CACHES: dict = {}
_CACHES_LOCK = threading.Lock()


def get_cache(measure: Measure) -> RateCache:
    """Return the process-wide cache for ``measure``, creating it if needed."""
    key = id(measure) if isinstance(measure, Density) else measure
    with _CACHES_LOCK:
        entry = _CACHES.get(key)
        if entry is None:
            entry = _CACHES[key] = RateCache(measure)
    return entry


def lambda_bk(measure: Measure, b: int, k: int) -> float:
    """Rate at which any given ``k`` of ``b`` blocks merge."""
    return measure.lambda_bk(b, k)


def total_rate(measure: Measure, b: int, cache: RateCache | None = None) -> float:
    """Total merger rate ``lambda_b = sum_k C(b,k) lambda_{b,k}``."""
    if b < 2 or int(b) != b:
        raise InvalidArgument(f"b must be an integer >= 2, got {b!r}")
    cache = cache or get_cache(measure)
    return cache.total(int(b))


def total_rate_direct(measure: Measure, b: int) -> float:
    """``lambda_b`` by summing the row of merger rates.

    For the closed-form family with ``delta = 1`` the row is produced by
    the ratio recurrence seeded at ``k = 2``; otherwise each entry is
    evaluated directly. Acts as an independent route to :func:`total_rate`.
    """
    if b < 2:
        raise InvalidArgument("b must be >= 2")
    if isinstance(measure, Kingman):
        return measure.scale * b * (b - 1) / 2.0
    if isinstance(measure, PowerFamily) and measure.delta == 1.0:
        return _kernels.total_rate_recurrence(
            int(b), measure.alpha, measure.gamma, measure.log_coef)
    terms = _log_binom(b, np.arange(2, b + 1)) + measure.log_row(b)
    return math.fsum(np.exp(terms))


def _log_binom(n, k):
    return special.gammaln(n + 1.0) - special.gammaln(k + 1.0) - special.gammaln(n - k + 1.0)


def jump_distribution(measure: Measure, n: int, cache: RateCache | None = None) -> np.ndarray:
    """Law of the number of blocks lost at a jump from ``n`` blocks.

    Entry ``k - 1`` holds ``zeta_{n,k} = C(n, k+1) lambda_{n,k+1} / lambda_n``.
    The row is normalized by its own compensated sum, which agrees with
    the cached ``lambda_n`` up to rounding.
    """
    if n < 2 or int(n) != n:
        raise InvalidArgument(f"n must be an integer >= 2, got {n!r}")
    n = int(n)
    if isinstance(measure, Kingman):
        out = np.zeros(n - 1)
        out[0] = 1.0
        return out
    k = np.arange(2, n + 1)
    logw = _log_binom(n, k) + measure.log_row(n)
    w = np.exp(logw - logw.max())
    return w / math.fsum(w)


def limit_zeta(alpha: float, k) -> np.ndarray | float:
    """Limit jump law ``alpha Gamma(k+1-alpha) / ((k+1)! Gamma(2-alpha))``."""
    if not 1.0 < alpha < 2.0:
        raise InvalidArgument("alpha must lie in (1, 2)")
    k_arr = np.asarray(k)
    if np.any(k_arr < 1):
        raise InvalidArgument("k must be >= 1")
    val = np.exp(math.log(alpha) + special.gammaln(k_arr + 1.0 - alpha)
                 - special.gammaln(k_arr + 2.0) - math.lgamma(2.0 - alpha))
    return float(val) if np.ndim(val) == 0 else val
