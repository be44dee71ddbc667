"""Exact event-driven simulation of Lambda-coalescents restricted to {1..n}."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import special

from . import _kernels
from .errors import InvalidArgument
from .measures import Kingman, Measure, PowerFamily
from .rates import RateCache, get_cache, jump_distribution

__all__ = [
    "BlockCountPath",
    "HitResult",
    "PartitionState",
    "PartitionTrajectory",
    "CoupledTrajectory",
    "SizesPartition",
    "simulate_block_chain",
    "simulate_partition",
    "simulate_coupled_pair",
    "first_hit_time",
    "tree_length",
    "block_stats",
    "pairwise_coalescence_times",
]


def _kernel_params(measure):
    """Return ``(kind, alpha, gamma, log_coef)`` or ``None`` for slow measures."""
    if isinstance(measure, Kingman):
        return _kernels.KINGMAN, 1.5, 0.5, 0.0
    if isinstance(measure, PowerFamily) and measure.delta == 1.0:
        return _kernels.POWER, measure.alpha, measure.gamma, measure.log_coef
    return None


def _numba_seed(rng):
    return int(rng.integers(0, 2**32 - 1))


class _RowSampler:
    """Jump-size sampler from full ``zeta`` rows, for measures without a recurrence."""

    def __init__(self, measure, cache):
        self.measure = measure
        self.cache = cache
        self._rows = {}

    def __call__(self, b, u):
        cum = self._rows.get(b)
        if cum is None:
            cum = self._rows[b] = np.cumsum(jump_distribution(self.measure, b, self.cache))
        return int(min(np.searchsorted(cum, u * cum[-1], side="right"), b - 2)) + 1


def _jump_sampler(measure, cache):
    params = _kernel_params(measure)
    if params is None:
        return _RowSampler(measure, cache)
    kind, a, g, lc = params

    def sample(b, u):
        return int(_kernels.sample_lost(b, u, cache.total(b), a, g, lc, kind))
    return sample


# ---------------------------------------------------------------------------
# block-counting chain

@dataclass(frozen=True)
class BlockCountPath:
    """Event log of the block-counting chain.

    Attributes
    ----------
    start_count : int
    times : ndarray
        Event times, strictly increasing.
    counts : ndarray
        Block count just after each event.
    horizon : float
        Time up to which the path is known (``inf`` if run to one block
        or to a target count).
    """

    start_count: int
    times: np.ndarray
    counts: np.ndarray
    horizon: float = math.inf

    @property
    def blocks_lost(self):
        prev = np.concatenate([[self.start_count], self.counts[:-1]])
        return prev - self.counts

    @property
    def final_count(self):
        return int(self.counts[-1]) if self.counts.size else self.start_count

    @property
    def complete(self):
        return self.final_count == 1

    def count_at(self, t):
        """Block count at time(s) ``t`` (right-continuous)."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right")
        full = np.concatenate([[self.start_count], self.counts])
        out = full[idx]
        return out if out.ndim else int(out)

    def events(self):
        """Rows ``(time, count_after, blocks_lost)``."""
        return list(zip(self.times.tolist(), self.counts.tolist(),
                        self.blocks_lost.tolist()))


def simulate_block_chain(measure: Measure, n_start: int, *, horizon: float | None = None,
                         to_count: int = 1, cache: RateCache | None = None,
                         rng=None) -> BlockCountPath:
    """Simulate the block-counting chain from ``n_start`` blocks.

    Holding times at count ``b`` are exponential with rate ``lambda_b``
    and the number of blocks lost is drawn from ``zeta_{b,.}``. The run
    stops at ``horizon`` or once the count is at most ``to_count``.
    """
    if int(n_start) != n_start or n_start < 2:
        raise InvalidArgument("n_start must be an integer >= 2")
    if to_count < 1:
        raise InvalidArgument("to_count must be >= 1")
    rng = rng if rng is not None else np.random.default_rng()
    cache = cache or get_cache(measure)
    n_start = int(n_start)
    t_end = math.inf if horizon is None else float(horizon)
    lam = cache.table(n_start)
    params = _kernel_params(measure)
    if params is not None:
        kind, a, g, lc = params
        out_t = np.empty(n_start - 1)
        out_c = np.empty(n_start - 1, dtype=np.int64)
        _kernels.seed(_numba_seed(rng))
        b, t, _, n_ev = _kernels.advance_chain(n_start, 0.0, t_end, int(to_count), lam,
                                               a, g, lc, kind, out_t, out_c, True)
        times, counts = out_t[:n_ev].copy(), out_c[:n_ev].copy()
    else:
        sampler = _RowSampler(measure, cache)
        times_l, counts_l = [], []
        b, t = n_start, 0.0
        while b > to_count:
            dt = rng.exponential(1.0 / lam[b])
            if t + dt > t_end:
                break
            t += dt
            b -= sampler(b, rng.random())
            times_l.append(t)
            counts_l.append(b)
        times = np.array(times_l, dtype=float)
        counts = np.array(counts_l, dtype=np.int64)
    reached = counts.size and counts[-1] <= to_count
    return BlockCountPath(n_start, times, counts, math.inf if reached else t_end)


@dataclass(frozen=True)
class HitResult:
    """First time the count is at most ``k``, and whether it equals ``k`` then."""

    time: float
    exact: bool


def first_hit_time(path: BlockCountPath, k: int) -> HitResult | None:
    """``T_k = inf{t : N(t) <= k}``; ``None`` when not reached on the path."""
    if k >= path.start_count:
        return HitResult(0.0, k == path.start_count)
    idx = np.flatnonzero(path.counts <= k)
    if idx.size == 0:
        return None
    i = int(idx[0])
    return HitResult(float(path.times[i]), bool(path.counts[i] == k))


def tree_length(path: BlockCountPath) -> float:
    """Total branch length ``sum_k k * (holding time at k)``."""
    if not path.complete:
        raise InvalidArgument("path has not reached a single block")
    starts = np.concatenate([[0.0], path.times[:-1]])
    counts = np.concatenate([[path.start_count], path.counts[:-1]])
    return math.fsum(counts * (path.times - starts))


# ---------------------------------------------------------------------------
# label-level partitions

@dataclass(frozen=True)
class Block:
    least_label: int
    members: tuple

    @property
    def size(self):
        return len(self.members)


@dataclass(frozen=True)
class PartitionState:
    """Blocks of the restricted partition at ``time``, ordered by least label.

    Labels run from 1 to ``n``; ``label_to_block[i]`` is the index of the
    block holding label ``i`` (entry 0 is unused).
    """

    n: int
    time: float
    blocks: tuple
    label_to_block: np.ndarray = field(repr=False)

    @property
    def sizes(self):
        return np.array([b.size for b in self.blocks])

    @property
    def count(self):
        return len(self.blocks)


def _state(n, time, members_by_least):
    leasts = sorted(members_by_least)
    blocks = tuple(Block(l, tuple(sorted(members_by_least[l]))) for l in leasts)
    lab = np.zeros(n + 1, dtype=np.int64)
    for i, b in enumerate(blocks):
        lab[list(b.members)] = i
    return PartitionState(n, time, blocks, lab)


@dataclass(frozen=True)
class PartitionTrajectory:
    """A partition trajectory stored as its merger events.

    ``events[i] = (time, least_labels)`` lists the least labels of the
    blocks that merge at that time; the merged block keeps the smallest.
    """

    n: int
    events: tuple
    horizon: float

    def replay(self):
        """Yield :class:`PartitionState` after the start and after each event."""
        members = {i: [i] for i in range(1, self.n + 1)}
        yield _state(self.n, 0.0, members)
        for t, leasts in self.events:
            keep = min(leasts)
            for l in leasts:
                if l != keep:
                    members[keep].extend(members.pop(l))
            yield _state(self.n, t, members)

    def state_at(self, t: float) -> PartitionState:
        members = {i: [i] for i in range(1, self.n + 1)}
        for te, leasts in self.events:
            if te > t:
                break
            keep = min(leasts)
            for l in leasts:
                if l != keep:
                    members[keep].extend(members.pop(l))
        return _state(self.n, float(t), members)

    def block_count_path(self) -> BlockCountPath:
        times = np.array([e[0] for e in self.events], dtype=float)
        lost = np.array([len(e[1]) - 1 for e in self.events], dtype=np.int64)
        counts = self.n - np.cumsum(lost)
        return BlockCountPath(self.n, times, counts.astype(np.int64),
                              math.inf if counts.size and counts[-1] == 1 else self.horizon)


def simulate_partition(measure: Measure, n: int, horizon: float = math.inf,
                       cache: RateCache | None = None, rng=None) -> PartitionTrajectory:
    """Simulate the labelled partition on ``{1..n}`` up to ``horizon``.

    Event times and merger sizes follow the block-counting chain; given
    the size, the merging blocks form a uniformly random subset.
    """
    if int(n) != n or n < 2:
        raise InvalidArgument("n must be an integer >= 2")
    n = int(n)
    rng = rng if rng is not None else np.random.default_rng()
    cache = cache or get_cache(measure)
    lam = cache.table(n)
    sample = _jump_sampler(measure, cache)
    order = list(range(1, n + 1))
    events = []
    t = 0.0
    b = n
    while b > 1:
        dt = rng.exponential(1.0 / lam[b])
        if t + dt > horizon:
            break
        t += dt
        m = sample(b, rng.random()) + 1
        pos = np.sort(rng.choice(b, size=m, replace=False))
        leasts = tuple(order[i] for i in pos)
        for i in pos[:0:-1]:
            del order[i]
        events.append((t, leasts))
        b -= m - 1
    return PartitionTrajectory(n, tuple(events), float(horizon))


def block_stats(state: PartitionState, x: float):
    """Return ``(N, N_at_most_x, K, W)`` with frequencies taken as size/n."""
    sizes = state.sizes
    freq = sizes / state.n
    n_le = int(np.count_nonzero(freq <= x))
    k_size = float(freq[state.label_to_block[1]])
    return len(sizes), n_le, k_size, float(freq.max())


def pairwise_coalescence_times(trajectory: PartitionTrajectory, labels):
    """Matrix of ``d(i, j)``, the first time ``i`` and ``j`` share a block.

    Returns
    -------
    d : ndarray
        Symmetric matrix indexed like ``labels``; ``nan`` where the pair
        has not coalesced by the horizon.
    missing : ndarray of bool
        Mask of the ``nan`` entries.
    """
    labels = [int(v) for v in labels]
    if any(v < 1 or v > trajectory.n for v in labels):
        raise InvalidArgument("labels must lie in 1..n")
    index = {v: i for i, v in enumerate(labels)}
    m = len(labels)
    d = np.full((m, m), np.nan)
    np.fill_diagonal(d, 0.0)
    tracked = {i: [index[i]] if i in index else [] for i in range(1, trajectory.n + 1)}
    for t, leasts in trajectory.events:
        groups = [tracked[l] for l in leasts if tracked[l]]
        for ga, gb in combinations(groups, 2):
            for i in ga:
                for j in gb:
                    d[i, j] = d[j, i] = t
        keep = min(leasts)
        merged = [i for l in leasts for i in tracked.pop(l)]
        tracked[keep] = merged
    return d, np.isnan(d)


# ---------------------------------------------------------------------------
# fast sizes-only partitions for large ensembles

class SizesPartition:
    """Sizes-only partition driven by the compiled kernel.

    Tracks the multiset of block sizes and the block containing label 1;
    labels themselves are not stored, so ``n`` can reach 10^7.
    """

    def __init__(self, measure: Measure, n: int, cache: RateCache | None = None, seed=0):
        params = _kernel_params(measure)
        if params is None:
            raise InvalidArgument("sizes-only simulation needs a closed-form rate family")
        self.kind, self.alpha, self.gamma, self.log_coef = params
        self.n = int(n)
        self.cache = cache or get_cache(measure)
        self.lam = self.cache.table(self.n)
        self.sizes = np.ones(self.n, dtype=np.int64)
        self.b = self.n
        self.t = 0.0
        self.one = 0
        _kernels.seed(int(seed))

    def advance(self, t_end=math.inf, b_stop=1):
        self.b, self.t, self.one = _kernels.advance_sizes(
            self.sizes, self.b, self.t, self.one, float(t_end), int(b_stop), self.lam,
            self.alpha, self.gamma, self.log_coef, self.kind)
        return self

    @property
    def current(self):
        return self.sizes[:self.b]

    @property
    def one_size(self):
        return int(self.sizes[self.one])


# ---------------------------------------------------------------------------
# monotone coupling through a shared Poisson stream

@dataclass(frozen=True)
class CoupledTrajectory:
    """Two partition trajectories built from one stream of atoms.

    ``log`` holds one row ``(time, x, effective_1, accepted_2)`` per
    proposed effective atom.
    """

    first: PartitionTrajectory
    second: PartitionTrajectory
    log: np.ndarray

    def counts_at_events(self):
        """Block counts of both trajectories just after every logged atom."""
        p1 = self.first.block_count_path()
        p2 = self.second.block_count_path()
        t = self.log[:, 0] if self.log.size else np.zeros(0)
        return p1.count_at(t), p2.count_at(t)


def _envelope_const(measure):
    if isinstance(measure, PowerFamily):
        return measure.coef
    return measure.envelope


def _validate_dominance(m1, m2):
    mesh = np.concatenate([np.geomspace(1e-12, 1.0, 3000), np.linspace(1e-3, 1.0, 1000)])
    f1 = m1.density(mesh)
    f2 = m2.density(mesh)
    if np.any(f2 > f1 * (1.0 + 1e-12)):
        bad = mesh[np.flatnonzero(f2 > f1 * (1.0 + 1e-12))[0]]
        raise InvalidArgument(f"density2 exceeds density1 at x={bad:.3g}")


def simulate_coupled_pair(measure1: Measure, measure2: Measure, n: int,
                          horizon: float = math.inf, rng=None) -> CoupledTrajectory:
    """Couple a ``measure1``- and a ``measure2``-coalescent with ``measure2 <= measure1``.

    Atoms ``(t, x, marks)`` are proposed from a two-piece envelope of the
    effective part of ``x**-2 measure1(dx)`` relative to the current
    larger block count ``b``, and thinned to the exact intensity. Given
    ``x``, the number of marked coordinates is Binomial(b, x) conditioned
    on at least two, placed uniformly. Trajectory 1 uses every atom;
    trajectory 2 keeps an atom with probability ``density2(x)/density1(x)``.
    In both, the marked blocks (ordered by least label) merge.
    """
    for m in (measure1, measure2):
        if not getattr(m, "has_density", False):
            raise InvalidArgument("coupling needs measures with a density (no Kingman part)")
    _validate_dominance(measure1, measure2)
    if int(n) != n or n < 2:
        raise InvalidArgument("n must be an integer >= 2")
    n = int(n)
    rng = rng if rng is not None else np.random.default_rng()
    a = measure1.alpha
    E = _envelope_const(measure1)
    delta = measure1.delta

    order1 = list(range(1, n + 1))
    order2 = list(range(1, n + 1))
    ev1, ev2, log = [], [], []
    t = 0.0
    while len(order1) > 1 or len(order2) > 1:
        b = max(len(order1), len(order2))
        C = b * (b - 1) / 2.0
        x0 = C ** -0.5
        m1 = min(x0, delta)
        w1 = E * C * m1 ** (2.0 - a) / (2.0 - a)
        w2 = E * (x0 ** -a - delta ** -a) / a if x0 < delta else 0.0
        t += rng.exponential(1.0 / (w1 + w2))
        if t > horizon:
            break
        u = rng.random()
        if u * (w1 + w2) < w1:
            x = m1 * rng.random() ** (1.0 / (2.0 - a))
        else:
            x = (x0 ** -a - rng.random() * (x0 ** -a - delta ** -a)) ** (-1.0 / a)
        f1 = float(measure1.density(np.array([x]))[0])
        p_eff = special.betainc(2.0, b - 1.0, x)  # P(Binomial(b, x) >= 2)
        accept = p_eff / min(1.0, C * x * x) * f1 / (E * x ** (1.0 - a))
        if rng.random() >= accept:
            continue
        k = _conditioned_binomial(rng, b, x)
        pos = np.sort(rng.choice(b, size=k, replace=False))
        f2 = float(measure2.density(np.array([x]))[0])
        acc2 = rng.random() < (f2 / f1 if f1 > 0 else 0.0)
        eff1 = _merge(order1, pos, t, ev1)
        if acc2:
            _merge(order2, pos, t, ev2)
        log.append((t, x, float(eff1), float(acc2)))
    h = float(horizon)
    return CoupledTrajectory(PartitionTrajectory(n, tuple(ev1), h),
                             PartitionTrajectory(n, tuple(ev2), h),
                             np.array(log, dtype=float).reshape(-1, 4))


def _merge(order, pos, t, events):
    """Merge the blocks of ``order`` at marked positions below ``len(order)``."""
    live = [int(i) for i in pos if i < len(order)]
    if len(live) < 2:
        return False
    events.append((t, tuple(order[i] for i in live)))
    for i in live[:0:-1]:
        del order[i]
    return True


def _conditioned_binomial(rng, b, x):
    """Draw Binomial(b, x) conditioned to be at least 2."""
    if b * x > 1.0:
        while True:
            k = int(rng.binomial(b, x))
            if k >= 2:
                return k
    # inversion from k = 2 upward; the pmf decays fast when b x is small
    q = 1.0 - x
    pk = 0.5 * b * (b - 1.0) * x * x * q ** (b - 2)
    total = special.betainc(2.0, b - 1.0, x)
    u = rng.random() * total
    k = 2
    cum = pk
    while cum < u and k < b:
        pk *= (b - k) / (k + 1.0) * x / q
        k += 1
        cum += pk
    return k
