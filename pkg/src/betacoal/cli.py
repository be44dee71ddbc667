"""Command-line entry point: ``betacoal {rates,simulate,csbp,couple,verify}``.

Exit codes: 0 success or pass, 1 verification failure or I/O error,
2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from contextlib import contextmanager

import numpy as np

from . import __version__, io
from .coalescent import (SizesPartition, _kernel_params, first_hit_time,
                         simulate_block_chain, simulate_coupled_pair, simulate_partition,
                         tree_length)
from .csbp import atoms_at_clock, simulate_path, time_change, time_grid
from .errors import InvalidArgument, NumericalFailure
from .harness import TARGETS, VerificationConfig, make_measure, run_verification
from .mu import get_mu_table
from .rates import get_cache, jump_distribution

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _pair(text, kind=int):
    try:
        lo, hi = text.split(":")
        return kind(lo), kind(hi)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None


def _measure_flags(p, default="beta"):
    p.add_argument("--measure", choices=("beta", "kingman", "power"), default=default)
    p.add_argument("--alpha", type=float, default=None, help="index in (1, 2); default 1.5")
    p.add_argument("--A", type=float, default=1.0, help="power-law coefficient")
    p.add_argument("--delta", type=float, default=1.0, help="restrict the measure to (0, delta]")


def _output_flags(p):
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser():
    parser = argparse.ArgumentParser(prog="betacoal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", help="merger rates, total rates and jump laws")
    _measure_flags(p)
    p.add_argument("--b", type=int, nargs="+", required=True, help="block counts")
    p.add_argument("--k-range", type=_pair, default=None, help="merger sizes LO:HI")
    _output_flags(p)

    p = sub.add_parser("simulate", help="simulate the coalescent restricted to n labels")
    _measure_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=float, default=None, help="horizon; snapshot time")
    p.add_argument("--to-count", type=int, default=1)
    p.add_argument("--hit", type=int, nargs="*", default=(), help="report T_k for these k")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--events", default=None, help="write the event log CSV here")
    p.add_argument("--snapshot", default=None, help="write block sizes at --t here")
    _output_flags(p)

    p = sub.add_parser("csbp", help="run the stable CSBP atom system")
    p.add_argument("--alpha", type=float, default=1.5)
    p.add_argument("--a", type=float, default=1.0, help="initial mass")
    p.add_argument("--s-max", type=float, default=None, help="end of the grid")
    p.add_argument("--clock", type=float, default=None,
                   help="instead of a fixed grid, run until R reaches this value")
    p.add_argument("--theta-cap", type=float, default=None,
                   help="cap on a * theta at the first grid point (default 1e7, 2e4 with --clock)")
    p.add_argument("--grid-ratio", type=float, default=1.5)
    p.add_argument("--grid-step", type=float, default=None)
    p.add_argument("--s-uniform", type=float, default=None)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--path-out", default=None, help="write (replicate, s, Z, R) here")
    p.add_argument("--atoms", default=None, help="write the final atoms here")
    _output_flags(p)

    p = sub.add_parser("couple", help="monotone coupling of two coalescents")
    _measure_flags(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--scale", type=float, help="second measure = scale * first, scale <= 1")
    g.add_argument("--restrict", type=float, help="second measure = first restricted to (0, x]")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=float, default=None, help="horizon")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--events", default=None, help="write both event logs here")
    _output_flags(p)

    p = sub.add_parser("verify", help="run one verification target")
    p.add_argument("target", choices=TARGETS)
    _measure_flags(p, default=None)
    p.add_argument("--n", type=int, default=None, help="starting block count")
    p.add_argument("--t", type=float, default=None)
    p.add_argument("--window", type=_pair, default=None, help="block-count window LO:HI")
    p.add_argument("--k-range", type=_pair, default=None)
    p.add_argument("--replicates", type=int, default=None)
    p.add_argument("--aux", type=int, default=None, help="size of the secondary ensemble")
    p.add_argument("--seed", type=int, required=True)
    _output_flags(p)
    p.set_defaults(format="json")
    return parser


# ---------------------------------------------------------------------------

@contextmanager
def _sink(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8") as fh:
            yield fh


def _emit(args, meta, columns, rows):
    with _sink(args.out) as fh:
        if args.format == "json":
            io.write_json(fh, {**meta, "columns": list(columns),
                               "rows": [list(r) for r in rows]})
        else:
            io.write_csv(fh, meta, columns, rows)


def _config_echo(args):
    return {k: v for k, v in vars(args).items() if k not in ("func",)}


def _measure(args):
    if args.measure == "kingman":
        if args.alpha is not None:
            raise UsageError("--alpha is not accepted for the Kingman coalescent")
        return make_measure("kingman")
    alpha = 1.5 if args.alpha is None else args.alpha
    if not 1.0 < alpha < 2.0:
        raise UsageError(f"--alpha must lie in (1, 2), got {alpha}")
    return make_measure(args.measure, alpha, args.A, args.delta)


def cmd_rates(args):
    m = _measure(args)
    cache = get_cache(m)
    rows = []
    for b in args.b:
        if b < 2:
            raise UsageError("--b values must be >= 2")
        lam_b = cache.total(b)
        zeta = jump_distribution(m, b, cache)
        lo, hi = args.k_range or (2, b)
        for k in range(max(lo, 2), min(hi, b) + 1):
            rows.append((b, k, m.lambda_bk(b, k), lam_b, zeta[k - 2]))
    meta = io.header("rates", config=_config_echo(args))
    _emit(args, meta, ["b", "k", "lambda_bk", "lambda_b", "zeta"], rows)
    return EXIT_OK


def _rngs(seed, count):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def cmd_simulate(args):
    if args.n < 2:
        raise UsageError("--n must be >= 2")
    if args.replicates < 1:
        raise UsageError("--replicates must be >= 1")
    if args.snapshot and args.t is None:
        raise UsageError("--snapshot needs --t")
    m = _measure(args)
    cache = get_cache(m)
    event_rows, snap_rows, rows = [], [], []
    hits = sorted(set(args.hit))
    for rep, rng in enumerate(_rngs(args.seed, args.replicates)):
        path = simulate_block_chain(m, args.n, horizon=args.t, to_count=args.to_count,
                                    cache=cache, rng=rng)
        if args.events:
            event_rows.extend((rep, t, c, l) for t, c, l in path.events())
        length = tree_length(path) if path.complete else math.nan
        row = [rep, path.final_count, length]
        for k in hits:
            h = first_hit_time(path, k)
            row += [math.nan, 0] if h is None else [h.time, int(h.exact)]
        rows.append(row)
        if args.snapshot:
            for size in _snapshot_sizes(m, args.n, args.t, cache, rng):
                snap_rows.append((rep, args.t, int(size)))
    meta = io.header("simulate_summary", config=_config_echo(args), seed=args.seed)
    cols = ["replicate", "final_count", "tree_length"]
    for k in hits:
        cols += [f"T_{k}", f"exact_{k}"]
    if args.events:
        io.write_csv(args.events, io.header("event_log", config=_config_echo(args), seed=args.seed),
                     ["replicate", "time", "count_after", "blocks_lost"], event_rows)
    if args.snapshot:
        io.write_csv(args.snapshot, io.header("partition_snapshot", config=_config_echo(args),
                                              seed=args.seed),
                     ["replicate", "t", "block_size"], snap_rows)
    _emit(args, meta, cols, rows)
    return EXIT_OK


def _snapshot_sizes(m, n, t, cache, rng):
    if _kernel_params(m) is not None:
        sp = SizesPartition(m, n, cache=cache, seed=int(rng.integers(0, 2**32 - 1)))
        return np.sort(sp.advance(t_end=t).current)[::-1]
    traj = simulate_partition(m, n, horizon=t, cache=cache, rng=rng)
    return np.sort(traj.state_at(t).sizes)[::-1]


def cmd_csbp(args):
    if not 1.0 < args.alpha < 2.0:
        raise UsageError("--alpha must lie in (1, 2)")
    if args.a <= 0:
        raise UsageError("--a must be positive")
    if (args.s_max is None) == (args.clock is None):
        raise UsageError("give exactly one of --s-max and --clock")
    mu = get_mu_table(args.alpha)
    rows, path_rows, atom_rows = [], [], []
    for rep, rng in enumerate(_rngs(args.seed, args.replicates)):
        if args.clock is not None:
            step = args.grid_step if args.grid_step is not None else 0.0075
            cap = args.theta_cap if args.theta_cap is not None else 2e4
            snap = atoms_at_clock(args.alpha, args.a, args.clock, mu, rng,
                                  theta_cap=cap, ratio=args.grid_ratio, step=step)
            system, tc = snap.system, snap.path
            count = system.count
        else:
            cap = args.theta_cap if args.theta_cap is not None else 1e7
            grid = time_grid(args.alpha, args.a, args.s_max, cap, args.grid_ratio,
                             args.s_uniform, args.grid_step)
            keep = args.atoms is not None
            path = simulate_path(args.alpha, args.a, grid, mu, rng, keep_states=keep)
            tc = time_change(path)
            system = path.states[-1] if keep else None
            count = int(path.counts[-1])
        rows.append((rep, tc.grid[-1], tc.Z[-1], count, tc.R[-1], int(tc.truncated)))
        path_rows.extend((rep, s, z, r) for s, z, r in zip(tc.grid, tc.Z, tc.R))
        if args.atoms and system is not None:
            atom_rows.extend((rep, system.grid_time, int(i), m)
                             for i, m in zip(system.ids, system.masses))
    echo = _config_echo(args)
    if args.path_out:
        io.write_csv(args.path_out, io.header("time_change_path", config=echo, seed=args.seed),
                     ["replicate", "s", "Z", "R"], path_rows)
    if args.atoms:
        io.write_csv(args.atoms, io.header("atom_snapshot", config=echo, seed=args.seed),
                     ["replicate", "grid_time", "atom_id", "mass"], atom_rows)
    _emit(args, io.header("csbp_summary", config=echo, seed=args.seed),
          ["replicate", "s", "Z", "atoms", "R", "truncated"], rows)
    return EXIT_OK


def cmd_couple(args):
    if args.n < 2:
        raise UsageError("--n must be >= 2")
    m1 = _measure(args)
    if args.measure == "kingman":
        raise UsageError("coupling needs a measure with a density")
    if args.scale is not None:
        if not 0 < args.scale <= 1:
            raise UsageError("--scale must lie in (0, 1]")
        m2 = m1.scaled(args.scale)
    else:
        if not 0 < args.restrict <= args.delta:
            raise UsageError("--restrict must lie in (0, delta]")
        m2 = m1.restricted(args.restrict)
    horizon = math.inf if args.t is None else args.t
    rows, ev_rows = [], []
    for rep, rng in enumerate(_rngs(args.seed, args.replicates)):
        pair = simulate_coupled_pair(m1, m2, args.n, horizon=horizon, rng=rng)
        c1, c2 = pair.counts_at_events()
        ordered = bool(np.all(c1 <= c2))
        rows.append((rep, len(pair.first.events), len(pair.second.events), int(ordered)))
        if args.events:
            for label, traj in (("first", pair.first), ("second", pair.second)):
                bc = traj.block_count_path()
                ev_rows.extend((rep, label, t, c, l) for t, c, l in bc.events())
    echo = _config_echo(args)
    if args.events:
        io.write_csv(args.events, io.header("coupled_event_log", config=echo, seed=args.seed),
                     ["replicate", "trajectory", "time", "count_after", "blocks_lost"], ev_rows)
    _emit(args, io.header("couple_summary", config=echo, seed=args.seed,
                          ordered_fraction=sum(r[3] for r in rows) / len(rows)),
          ["replicate", "events_first", "events_second", "ordered"], rows)
    return EXIT_OK


def cmd_verify(args):
    overrides = dict(alpha=args.alpha, measure=args.measure, n_start=args.n, t=args.t,
                     window=args.window, k_range=args.k_range, replicates=args.replicates,
                     aux=args.aux, seed=args.seed)
    if args.measure == "power":
        overrides["A"] = args.A
    cfg = VerificationConfig.for_target(args.target, **overrides)
    report = run_verification(cfg)
    if args.out:
        with _sink(args.out) as fh:
            if args.format == "json":
                report.to_json(fh)
            else:
                report.to_csv(fh)
    for line in report.summary_lines():
        print(line)
    print(f"{'PASS' if report.passed else 'FAIL'} {report.target} "
          f"({report.runtime:.1f}s, seed {report.seed})")
    return EXIT_OK if report.passed else EXIT_FAIL


_COMMANDS = {"rates": cmd_rates, "simulate": cmd_simulate, "csbp": cmd_csbp,
             "couple": cmd_couple, "verify": cmd_verify}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (UsageError, InvalidArgument) as exc:
        print(f"betacoal {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"betacoal {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"betacoal {args.command}: I/O error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
