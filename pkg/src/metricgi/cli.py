"""Command line entry point: ``metricgi run CONFIG [--seed N] [--suite S] [--out DIR] [--quiet]``.

Exit status: 0 when every executed trial passed, 1 when any trial failed,
2 for usage or configuration errors, 3 when every trial was skipped.
"""

from __future__ import annotations

import argparse
import sys

from .config import SUITES, ConfigError, load_config
from .experiments import EXIT_ALL_SKIPPED, SKIPPED, run_suite

EXIT_USAGE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metricgi",
        description="Seeded checks of metric generalized inverses in l^p spaces.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the suites described by a config file")
    run.add_argument("config", help="path to a key = value config file")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--suite", choices=SUITES, help="override the config suite")
    run.add_argument("--out", help="override the output directory")
    run.add_argument("--quiet", action="store_true", help="print nothing on success")
    return parser


def _progress(rec) -> None:
    tag = rec.verdict if rec.verdict != SKIPPED else f"SKIPPED ({rec.reason})"
    print(
        f"{rec.suite:<12} m={rec.m} n={rec.n} p={rec.p:g} q={rec.q:g} "
        f"rank={rec.rank} trial={rec.trial}: {tag}",
        flush=True,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config).with_overrides(
            seed=args.seed, suite=args.suite, output_dir=args.out
        )
    except (ConfigError, OSError, UnicodeDecodeError) as exc:
        print(f"metricgi: {args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = run_suite(cfg, progress=None if args.quiet else _progress)
    status = report.exit_status
    if not args.quiet or status:
        for suite in report.suites:
            c = report.counts(suite)
            worst = report.worst_residual(suite)
            worst = "-" if worst is None else f"{worst:.3e}"
            print(
                f"{suite}: {c['PASS']} passed, {c['FAIL']} failed, "
                f"{c['SKIPPED']} skipped, worst residual {worst}"
            )
        print(f"wrote {cfg.output_dir}/report.json and summary.csv in {report.wall_clock:.1f} s")
        if status == EXIT_ALL_SKIPPED:
            print("every trial was skipped", file=sys.stderr)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
