"""Command-line entry points: run, compare, and sweep experiment configs.

Each subcommand reads JSON config files, executes through the experiment
module, optionally writes the JSON report plus CSV summary, and prints a
short table unless --quiet. Failures exit nonzero with a one-line JSON
error object on stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from . import experiment
from .experiment import ConfigError, ExperimentReport, load_config, write_report


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedchd",
        description="Federated CHD-risk experiment runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="execute one experiment config")
    run_parser.add_argument("config", help="path to a JSON experiment config")

    compare_parser = sub.add_parser(
        "compare", help="run two configs on the same seeds and pair the results"
    )
    compare_parser.add_argument("config_a", help="baseline config path")
    compare_parser.add_argument("config_b", help="candidate config path")

    sweep_parser = sub.add_parser("sweep", help="run a model/sampling/mode grid")
    sweep_parser.add_argument("config", help="path to a JSON sweep config")

    for p in (run_parser, compare_parser, sweep_parser):
        p.add_argument(
            "--seed", type=int, default=None,
            help="replace the config's seed list with this single seed",
        )
        p.add_argument(
            "--output", default=None,
            help="write the JSON report (and CSV summary) to this path",
        )
        p.add_argument("--quiet", action="store_true", help="suppress stdout")
    return parser


def _override(config, seed, output):
    if seed is not None:
        config = replace(config, seeds=(seed,))
    if output is not None:
        config = replace(config, output_path=output)
    return config


def _print_summary(report: ExperimentReport) -> None:
    rows = report.summary_rows()
    if rows:
        header = f"{'model':<10}{'mode':<13}{'sampling':<11}{'f1':>8}{'precision':>11}{'recall':>8}{'bytes':>12}"
        print(header)
        for row in rows:
            if row.get("f1") is None:
                print(f"{row['model']:<10}{row['mode']:<13}{row['sampling']:<11}"
                      f"{'failed (' + str(row['n_failed']) + ' seeds)':>39}")
                continue
            print(
                f"{row['model']:<10}{row['mode']:<13}{row['sampling']:<11}"
                f"{row['f1']:>8.4f}{row['precision']:>11.4f}{row['recall']:>8.4f}"
                f"{int(row['comm_bytes']):>12d}"
            )
    if report.payload.get("kind") == "compare":
        delta = report.payload["delta_f1_mean"]
        print(f"delta F1 (b - a): {delta:+.4f}")
        verdict = report.payload.get("t_test")
        if verdict is not None:
            print(
                f"paired t-test: t={verdict['t_statistic']}, "
                f"df={verdict['degrees_of_freedom']}, "
                f"significant at 0.05: {verdict['significant_at_0_05']}"
            )
    series = report.payload.get("tree_series")
    if series:
        print("tree strategy series (comm bytes vs F1):")
        for point in series:
            print(
                f"  {point['strategy']:<24}{int(point['comm_bytes']):>12d}"
                f"{point['f1']:>8.4f}"
            )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            config = _override(load_config(args.config), args.seed, args.output)
            report = experiment.run(config)
            written = [config.output_path] if config.output_path else []
        elif args.command == "compare":
            config_a = _override(load_config(args.config_a), args.seed, None)
            config_b = _override(load_config(args.config_b), args.seed, None)
            report = experiment.compare(config_a, config_b)
            output = args.output or config_a.output_path
            written = [str(p) for p in write_report(report, output)] if output else []
        else:
            with open(args.config, "r", encoding="utf-8") as handle:
                raw = json.load(handle)
            if not isinstance(raw, dict):
                raise ConfigError("sweep config: expected a JSON object")
            if args.seed is not None:
                raw["seeds"] = [args.seed]
            if args.output is not None:
                raw["output_path"] = args.output
            report = experiment.sweep(raw)
            written = [raw.get("output_path")] if raw.get("output_path") else []
        if not args.quiet:
            _print_summary(report)
            for path in written:
                print(f"wrote {path}")
        return 0
    except json.JSONDecodeError as exc:
        _print_error("ConfigError", f"invalid JSON: {exc}")
        return 1
    except Exception as exc:  # surface every failure as machine-readable
        _print_error(type(exc).__name__, str(exc))
        return 1


def _print_error(kind: str, message: str) -> None:
    print(json.dumps({"error": {"type": kind, "message": message}}),
          file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
