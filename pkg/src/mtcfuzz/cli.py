"""Command-line entry point.

Subcommands: fuzz (one campaign), compare (multi vs single), analyze
(classify a trace log offline), report (HTML coverage diff), experiment
(the canned desk-scale experiments).  Exit codes: 0 success, 1 usage or
configuration error, 2 runtime abort.

The MTCFUZZ_WORK_ROOT environment variable, when set, is prepended to
relative --out paths.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .campaign import (
    CampaignAborted,
    CampaignConfig,
    ConfigError,
    run_campaign,
    run_comparison,
)
from .filters import CoverageState, FilterError, classify, load_filters
from .report import (
    SymbolTableError,
    aggregate_lines,
    load_symbol_table,
    render_html,
)
from .trace import TraceParseError, read_trace
from . import experiments

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_ABORT = 2


class _Parser(argparse.ArgumentParser):
    """argparse variant with the documented exit-code contract (1, not 2)."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _out_dir(path: str) -> Path:
    root = os.environ.get("MTCFUZZ_WORK_ROOT")
    p = Path(path)
    if root and not p.is_absolute():
        return Path(root) / p
    return p


def _load_config(path: str, args: argparse.Namespace) -> CampaignConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    config = CampaignConfig.from_dict(raw)
    overrides = {}
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    if getattr(args, "seed", None) is not None:
        overrides["rng_seed"] = args.seed
    return config.replaced(**overrides) if overrides else config


def cmd_fuzz(args: argparse.Namespace) -> int:
    try:
        config = _load_config(args.config, args)
    except (ConfigError, FilterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = _out_dir(args.out)
    try:
        stats = run_campaign(config, workdir=out)
    except CampaignAborted as exc:
        print(f"campaign aborted: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except FilterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(stats.summary_dict(), indent=2))
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        config = _load_config(args.config, args)
    except (ConfigError, FilterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = _out_dir(args.out)
    out.mkdir(parents=True, exist_ok=True)
    summary = run_comparison(config, args.campaigns)
    (out / "comparison.json").write_text(json.dumps(summary.to_dict(), indent=2) + "\n")
    with open(out / "growth.csv", "w") as f:
        f.write("exec_index,multi_mean_coverage,single_mean_coverage\n")
        for i, (m, s) in enumerate(zip(summary.multi.series, summary.single.series), start=1):
            f.write(f"{i},{m},{s}\n")
    for mode in (summary.multi, summary.single):
        print(
            f"{mode.mode}: full coverage in {mode.full_coverage_count}/"
            f"{args.campaigns} campaigns, mean branches {mode.mean_branches:.2f}"
        )
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        filter_set = load_filters(Path(args.filters).read_bytes())
        state = CoverageState()
        with open(args.trace, "rb") as f:
            result = classify(read_trace(f), filter_set, state)
    except (OSError, FilterError, TraceParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(
        json.dumps(
            {
                "kernel_new": len(result.new_kernel),
                "firmware_new": len(result.new_firmware),
                "kernel_found": state.kernel_found,
                "firmware_found": state.firmware_found,
            }
        )
    )
    return EXIT_OK


def _coverage_map(statsdir: Path) -> dict[int, int]:
    raw = json.loads((statsdir / "coverage.json").read_text())
    merged: dict[int, int] = {}
    for component in ("kernel", "firmware"):
        for addr, count in raw.get(component, {}).items():
            merged[int(addr, 16)] = merged.get(int(addr, 16), 0) + count
    return merged


def cmd_report(args: argparse.Namespace) -> int:
    try:
        multi_cov = _coverage_map(Path(args.multi))
        single_cov = _coverage_map(Path(args.single))
        symbols = load_symbol_table(Path(args.symbols).read_bytes())
        line_coverage = aggregate_lines(multi_cov, single_cov, symbols)
        written = render_html(line_coverage, Path(args.src), _out_dir(args.out))
    except (OSError, json.JSONDecodeError, SymbolTableError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"wrote {len(written)} pages under {_out_dir(args.out)}")
    return EXIT_OK


def cmd_experiment(args: argparse.Namespace) -> int:
    out = _out_dir(args.out)
    if args.name == "filter-scaling":
        result = experiments.filter_scaling(
            out, wall_budget=args.wall_budget, seed=args.seed
        )
        print(
            f"execs per point: min {min(result.exec_counts)}, "
            f"max {max(result.exec_counts)} over {len(result.points)} points"
        )
    elif args.name == "snapshot-overhead":
        result = experiments.snapshot_overhead(
            out, wall_budget=args.wall_budget, runs=args.runs, seed=args.seed
        )
        print(f"mean improvement with snapshots disabled: {result.mean_improvement_pct:.2f}%")
    elif args.name == "base-extension":
        summary = experiments.base_extension(
            out, campaigns=args.campaigns, budget=args.budget, seed=args.seed
        )
        for mode in (summary.multi, summary.single):
            print(
                f"{mode.mode}: full coverage {mode.full_coverage_count}/"
                f"{args.campaigns}, mean branches {mode.mean_branches:.2f}"
            )
    else:
        print(f"error: unknown experiment {args.name!r}", file=sys.stderr)
        return EXIT_USAGE
    print(f"results written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mtcfuzz", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    fuzz = sub.add_parser("fuzz", help="run one fuzzing campaign")
    fuzz.add_argument("--config", required=True, help="campaign config JSON")
    fuzz.add_argument("--mode", choices=["multi", "single"], help="override config mode")
    fuzz.add_argument("--seed", type=int, help="override config rng seed")
    fuzz.add_argument("--out", required=True, help="working directory")
    fuzz.set_defaults(func=cmd_fuzz)

    compare = sub.add_parser("compare", help="run paired multi/single campaigns")
    compare.add_argument("--config", required=True)
    compare.add_argument("--campaigns", type=int, default=50, help="campaigns per mode")
    compare.add_argument("--seed", type=int, help="override config rng seed")
    compare.add_argument("--out", required=True)
    compare.set_defaults(func=cmd_compare, mode=None)

    analyze = sub.add_parser("analyze", help="classify a trace log offline")
    analyze.add_argument("--trace", required=True, help="trace log file")
    analyze.add_argument("--filters", required=True, help="address-filter JSON")
    analyze.set_defaults(func=cmd_analyze)

    report = sub.add_parser("report", help="render the HTML coverage diff")
    report.add_argument("--multi", required=True, help="stats dir of the multi run")
    report.add_argument("--single", required=True, help="stats dir of the single run")
    report.add_argument("--symbols", required=True, help="symbol TSV")
    report.add_argument("--src", required=True, help="source root")
    report.add_argument("--out", required=True)
    report.set_defaults(func=cmd_report)

    experiment = sub.add_parser("experiment", help="run a canned experiment")
    experiment.add_argument("--name", required=True, help="filter-scaling | snapshot-overhead | base-extension")
    experiment.add_argument("--out", required=True)
    experiment.add_argument("--seed", type=int, default=1)
    experiment.add_argument(
        "--wall-budget", type=float, default=experiments.DEFAULT_WALL_BUDGET,
        help="seconds per wall-budget campaign",
    )
    experiment.add_argument("--runs", type=int, default=experiments.DEFAULT_SNAPSHOT_RUNS)
    experiment.add_argument("--campaigns", type=int, default=experiments.DEFAULT_COMPARE_CAMPAIGNS)
    experiment.add_argument("--budget", type=int, default=experiments.DEFAULT_COMPARE_BUDGET)
    experiment.set_defaults(func=cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
