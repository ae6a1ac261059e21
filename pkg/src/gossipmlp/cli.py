"""Command-line entry point.

Subcommands:

* ``run``             full suite: centralized + distributed per seed, report.json,
                      per-trial CSVs, convergence.csv
* ``centralized``     baseline runs only -> centralized.json
* ``distributed``     gossip runs only -> report.json + per-trial CSVs
* ``sweep-overlap``   one aggregated row per overlap value -> overlap_sweep.csv
* ``convergence``     paired runs, emitting the convergence trace CSV
* ``validate-config`` parse + validate the config, run nothing

Exit codes: 0 success, 1 configuration/data error, 2 training divergence.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError, DataError, TrainingDivergedError
from .experiment import (
    DEFAULT_OVERLAP_GRID,
    load_config,
    run_centralized_suite,
    run_distributed_suite,
    run_suite,
    sweep_overlap,
)

log = logging.getLogger("gossipmlp")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gossipmlp",
        description="Consensus MLP training over vertically partitioned features.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="increase log verbosity (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_out=True):
        p.add_argument("--config", required=True, help="TOML experiment config")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory (created if absent)")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="override a config key (dotted for sections, repeatable)")
        p.add_argument("--seed-list", default=None, metavar="S1,S2,...",
                       help="replace the config's trial seeds")

    p_run = sub.add_parser("run", help="centralized + distributed suite with all artifacts")
    add_common(p_run)
    p_run.add_argument("--parallel-trials", type=int, default=None, metavar="K",
                       help="run up to K trials concurrently")

    p_cent = sub.add_parser("centralized", help="baseline runs only")
    add_common(p_cent)

    p_dist = sub.add_parser("distributed", help="gossip runs only")
    add_common(p_dist)

    p_sweep = sub.add_parser("sweep-overlap", help="distributed AUC across overlap ratios")
    add_common(p_sweep)
    p_sweep.add_argument("--grid", default=None, metavar="R1,R2,...",
                         help="overlap ratios (default 0,0.2,...,1.0)")

    p_conv = sub.add_parser("convergence", help="paired runs emitting the convergence trace")
    add_common(p_conv)

    p_val = sub.add_parser("validate-config", help="parse and validate, run nothing")
    add_common(p_val, needs_out=False)
    return parser


def _apply_seed_list(cfg, seed_list: str | None):
    if seed_list is None:
        return
    try:
        seeds = [int(s) for s in seed_list.split(",") if s.strip()]
    except ValueError:
        raise ConfigurationError(f"--seed-list {seed_list!r}: seeds must be integers") from None
    if not seeds:
        raise ConfigurationError("--seed-list is empty")
    cfg.seeds = seeds
    cfg.trials = len(seeds)


def _cmd_run(args) -> int:
    cfg = load_config(args.config, args.overrides)
    _apply_seed_list(cfg, args.seed_list)
    log.info("running %d trial(s) with seeds %s into %s", cfg.trials, cfg.seeds, args.out)
    report = run_suite(cfg, out_dir=args.out, parallel_trials=args.parallel_trials)
    d = report["distributed"]
    print(
        f"distributed AUC {d['auc_mean']:.4f} +- {d['auc_sd']:.4f}, "
        f"CI [{d['ci_lower']:.4f}, {d['ci_upper']:.4f}], "
        f"centralized AUC {report['centralized']['auc_mean']:.4f}, "
        f"comparable: {report['comparable']}"
    )
    return 0


def _cmd_centralized(args) -> int:
    cfg = load_config(args.config, args.overrides)
    _apply_seed_list(cfg, args.seed_list)
    payload = run_centralized_suite(cfg, out_dir=args.out)
    print(f"centralized AUC {payload['auc_mean']:.4f} +- {payload['auc_sd']:.4f}")
    return 0


def _cmd_distributed(args) -> int:
    cfg = load_config(args.config, args.overrides)
    _apply_seed_list(cfg, args.seed_list)
    payload = run_distributed_suite(cfg, out_dir=args.out)
    print(
        f"distributed AUC {payload['auc_mean']:.4f} +- {payload['auc_sd']:.4f}, "
        f"CI [{payload['ci_lower']:.4f}, {payload['ci_upper']:.4f}]"
    )
    return 0


def _cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.overrides)
    _apply_seed_list(cfg, args.seed_list)
    if args.grid is not None:
        try:
            grid = [float(v) for v in args.grid.split(",") if v.strip()]
        except ValueError:
            raise ConfigurationError(f"--grid {args.grid!r}: ratios must be numbers") from None
    else:
        grid = list(DEFAULT_OVERLAP_GRID)
    rows = sweep_overlap(cfg, grid=grid, out_dir=args.out)
    for row in rows:
        d = row["distributed"]
        print(f"overlap {row['overlap_ratio']:.1f}: AUC {d['auc_mean']:.4f} +- {d['auc_sd']:.4f}")
    return 0


def _cmd_convergence(args) -> int:
    cfg = load_config(args.config, args.overrides)
    _apply_seed_list(cfg, args.seed_list)
    report = run_suite(cfg, out_dir=args.out)
    print(f"convergence trace written to {Path(args.out) / 'convergence.csv'}")
    print(f"comparable: {report['comparable']}")
    return 0


def _cmd_validate(args) -> int:
    cfg = load_config(args.config, args.overrides)
    _apply_seed_list(cfg, args.seed_list)
    cfg.validate()
    print(f"config ok: {args.config}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "centralized": _cmd_centralized,
    "distributed": _cmd_distributed,
    "sweep-overlap": _cmd_sweep,
    "convergence": _cmd_convergence,
    "validate-config": _cmd_validate,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except (ConfigurationError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except TrainingDivergedError as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
