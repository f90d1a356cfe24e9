"""Canned desk-scale experiments, each runnable as one CLI invocation.

Three experiments ship with the framework:

* filter-scaling   - grow the filter population from 2^1 to 2^15 under a
  fixed wall budget per point and show that throughput stays flat while
  the membership-check count does not depend on the filter count at all.
* snapshot-overhead - paired wall-budget runs with snapshot restore
  enabled vs. disabled, measuring the throughput cost of per-test resets.
* base-extension   - the multi-vs-single comparison on the firmware
  dispatcher scenario: full-coverage campaign counts and mean branch
  coverage per mode.

Every experiment writes results.csv plus a human-readable results.md.
"""

from __future__ import annotations

import csv
import statistics
from dataclasses import dataclass
from pathlib import Path

from .campaign import CampaignConfig, ComparisonSummary, run_campaign, run_comparison

FILTER_SCALING_EXPONENTS = range(1, 16)
DEFAULT_WALL_BUDGET = 10.0
DEFAULT_SNAPSHOT_RUNS = 5
DEFAULT_COMPARE_CAMPAIGNS = 50
DEFAULT_COMPARE_BUDGET = 500


def dispatcher_config(**overrides) -> CampaignConfig:
    """Standard firmware-dispatcher fuzzing setup shared by the experiments:
    a minimal eid/fid seed and a tight input size so mutation pressure
    stays on the call fields."""
    config = CampaignConfig(
        mode="multi",
        scenario="sbi_base",
        initial_seeds=[bytes([0x10, 0x00])],
        max_len=4,
        max_execs=DEFAULT_COMPARE_BUDGET,
    )
    return config.replaced(**overrides)


def _write_table(out_dir: Path, header: list[str], rows: list[list], title: str) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "results.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)
    with open(out_dir / "results.md", "w") as f:
        f.write(f"# {title}\n\n")
        f.write("| " + " | ".join(header) + " |\n")
        f.write("|" + "---|" * len(header) + "\n")
        for row in rows:
            f.write("| " + " | ".join(str(v) for v in row) + " |\n")


@dataclass
class FilterScalingPoint:
    n_filters: int
    execs: int
    membership_checks_total: int
    membership_checks_aligned: int = 0


@dataclass
class FilterScalingResult:
    points: list[FilterScalingPoint]
    min_execs: int

    @property
    def exec_counts(self) -> list[int]:
        return [p.execs for p in self.points]


def filter_scaling(
    out_dir: Path | None = None,
    *,
    wall_budget: float = DEFAULT_WALL_BUDGET,
    seed: int = 1,
    exponents: range = FILTER_SCALING_EXPONENTS,
) -> FilterScalingResult:
    """Run one wall-budget campaign per filter-count point.

    All points share the same rng seed and the synthetic ranges never
    match an emitted PC, so every point executes the identical test
    sequence up to its budget cutoff.  Membership checks are therefore
    compared at the largest execution prefix all points completed.
    """
    points = []
    membership_series: list[list[int]] = []
    for exponent in exponents:
        n = 2**exponent
        config = dispatcher_config(
            max_execs=None,
            max_wall_time=wall_budget,
            rng_seed=seed,
            synthesize_count=n,
            synthesize_seed=seed,
        )
        stats = run_campaign(config)
        points.append(
            FilterScalingPoint(
                n_filters=n,
                execs=stats.total_execs,
                membership_checks_total=stats.filter_stats.membership_checks,
            )
        )
        membership_series.append([r.membership_checks for r in stats.records])

    min_execs = min(p.execs for p in points)
    for point, series in zip(points, membership_series):
        point.membership_checks_aligned = series[min_execs - 1] if min_execs else 0

    result = FilterScalingResult(points=points, min_execs=min_execs)
    if out_dir is not None:
        _write_table(
            Path(out_dir),
            ["n_filters", "execs", "membership_checks_total", f"membership_checks_at_{min_execs}"],
            [
                [p.n_filters, p.execs, p.membership_checks_total, p.membership_checks_aligned]
                for p in points
            ],
            "Execution counts under growing filter configurations",
        )
    return result


@dataclass
class SnapshotOverheadRun:
    enabled_execs: int
    disabled_execs: int

    @property
    def improvement_pct(self) -> float:
        return (self.disabled_execs - self.enabled_execs) / self.enabled_execs * 100.0


@dataclass
class SnapshotOverheadResult:
    runs: list[SnapshotOverheadRun]

    @property
    def mean_improvement_pct(self) -> float:
        return statistics.mean(r.improvement_pct for r in self.runs)


def snapshot_overhead(
    out_dir: Path | None = None,
    *,
    wall_budget: float = DEFAULT_WALL_BUDGET,
    runs: int = DEFAULT_SNAPSHOT_RUNS,
    seed: int = 1,
) -> SnapshotOverheadResult:
    """Paired wall-budget runs with and without per-test snapshot restore."""
    results = []
    for i in range(runs):
        base = dispatcher_config(
            max_execs=None, max_wall_time=wall_budget, rng_seed=seed + i
        )
        enabled = run_campaign(base.replaced(snapshot_enabled=True))
        disabled = run_campaign(base.replaced(snapshot_enabled=False))
        results.append(
            SnapshotOverheadRun(
                enabled_execs=enabled.total_execs, disabled_execs=disabled.total_execs
            )
        )
    result = SnapshotOverheadResult(runs=results)
    if out_dir is not None:
        rows: list[list] = [
            [f"Test{i + 1:02d}", r.enabled_execs, r.disabled_execs, f"{r.improvement_pct:.2f}"]
            for i, r in enumerate(results)
        ]
        rows.append(
            [
                "Average",
                f"{statistics.mean(r.enabled_execs for r in results):.1f}",
                f"{statistics.mean(r.disabled_execs for r in results):.1f}",
                f"{result.mean_improvement_pct:.2f}",
            ]
        )
        _write_table(
            Path(out_dir),
            ["run", "snapshot_enabled_execs", "snapshot_disabled_execs", "improvement_pct"],
            rows,
            "Execution counts with and without snapshot loading",
        )
    return result


def base_extension(
    out_dir: Path | None = None,
    *,
    campaigns: int = DEFAULT_COMPARE_CAMPAIGNS,
    budget: int = DEFAULT_COMPARE_BUDGET,
    seed: int = 1,
) -> ComparisonSummary:
    """Multi-vs-single comparison on the firmware dispatcher scenario."""
    config = dispatcher_config(max_execs=budget, rng_seed=seed)
    summary = run_comparison(config, campaigns)
    if out_dir is not None:
        rows = [
            [
                mode.mode,
                mode.full_coverage_count,
                f"{mode.full_coverage_count / campaigns * 100:.0f}%",
                f"{mode.mean_branches:.2f}",
            ]
            for mode in (summary.multi, summary.single)
        ]
        _write_table(
            Path(out_dir),
            ["mode", "full_coverage_campaigns", "full_coverage_rate", "mean_branches_covered"],
            rows,
            f"Full-coverage campaigns out of {campaigns} per mode ({budget} execs each)",
        )
    return summary


EXPERIMENTS = {
    "filter-scaling": filter_scaling,
    "snapshot-overhead": snapshot_overhead,
    "base-extension": base_extension,
}
