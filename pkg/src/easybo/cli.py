"""Command line entry point: ``easybo run`` and ``easybo compare``."""

from __future__ import annotations

import argparse
import logging
import sys

from .benchmarks import builtin_problems
from .harness import REGIMES, VARIANTS, ExperimentConfig, compare_report, load_experiment, run_experiment

_OVERRIDES = {
    "problem": "problem",
    "variant": "variant",
    "regime": "regime",
    "B": "B",
    "budget": "budget",
    "n_init": "n_init",
    "repeats": "repeats",
    "seed": "base_seed",
    "out": "out",
    "refit_every": "refit_every",
    "jobs": "jobs",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="easybo", description="Asynchronous batch Bayesian optimization experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a repeated experiment")
    run.add_argument("--config", help="JSON config file; flags below override its keys")
    run.add_argument("--problem", default=None, help="built-in problem name, or the name given to a config-defined composite")
    run.add_argument("--variant", choices=sorted(VARIANTS), type=str.upper)
    run.add_argument("--regime", choices=REGIMES, type=str.lower)
    run.add_argument("-B", type=int, dest="B")
    run.add_argument("--budget", type=int)
    run.add_argument("--n-init", type=int, dest="n_init")
    run.add_argument("--repeats", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--refit-every", type=int, dest="refit_every")
    run.add_argument("--jobs", type=int)
    run.add_argument("--out")
    run.add_argument("-v", "--verbose", action="store_true")

    cmp_ = sub.add_parser("compare", help="compare persisted experiments")
    cmp_.add_argument("dirs", nargs="+", help="experiment output directories")

    sub.add_parser("problems", help="list built-in problems")
    return parser


def _config_from_args(args) -> ExperimentConfig:
    base = ExperimentConfig.from_file(args.config).to_dict() if args.config else {}
    for attr, key in _OVERRIDES.items():
        value = getattr(args, attr)
        if value is not None:
            base[key] = value
    return ExperimentConfig.from_dict(base)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "problems":
        for p in builtin_problems():
            print(f"{p.name:<12} d={p.dim:<3} known optimum: {p.known_optimum}")
        return 0
    if args.command == "compare":
        try:
            report = compare_report([load_experiment(d) for d in args.dirs])
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        print(report.format_table())
        return 0

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = _config_from_args(args)
        cfg.validate()
    except (OSError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    result = run_experiment(cfg)
    s = result.summary
    print(
        f"{s.variant} ({s.regime}, B={s.B}) on {s.problem}: "
        f"best {s.best:.6g} worst {s.worst:.6g} mean {s.mean:.6g} std {s.std:.3g} "
        f"mean time {s.mean_time:.6g}s  [{s.n_runs} ok, {s.n_failed} failed]"
    )
    return 0 if result.ok else 1


if __name__ == "__main__":
    sys.exit(main())
