"""Campaign orchestration: the greybox loop over a two-component target.

One campaign wires filters, coverage state, corpus scheduling, mutation
and a target backend together and records per-execution statistics.  In
single mode firmware discoveries never count as novelty, but firmware
coverage is still measured and recorded: both modes perform identical
measurement work, so throughput comparisons are not confounded.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .corpus import (
    Corpus,
    assign_energy,
    choose_next,
    is_interesting,
    retain,
    save_corpus,
)
from .coverage import UnifiedCoverage, flow_hash, merge_coverage
from .filters import (
    AddressFilter,
    AddressFilterSet,
    CoverageState,
    FilterStats,
    classify,
    filters_from_dict,
    load_filters,
    synthesize_filters,
)
from .mutation import DEFAULT_MAX_LEN, MutationRng, mutate
from .sim import (
    DEFAULT_SNAPSHOT_COST,
    SNAPSHOT_TAG,
    BackendError,
    ScenarioLayout,
    SimTarget,
    TargetBackend,
    scenario_layout,
)

MODES = ("multi", "single")


class ConfigError(ValueError):
    pass


class CampaignAborted(RuntimeError):
    """Backend failure mid-campaign; carries the partial statistics."""

    def __init__(self, message: str, stats: "CampaignStats"):
        super().__init__(message)
        self.stats = stats


@dataclass
class CampaignConfig:
    mode: str = "multi"
    scenario: str = "sbi_base"
    max_execs: int | None = None
    max_wall_time: float | None = None
    rng_seed: int = 1
    snapshot_enabled: bool = True
    noise_enabled: bool = True
    snapshot_cost: float = DEFAULT_SNAPSHOT_COST
    initial_seeds: list[bytes] = field(default_factory=lambda: [bytes([0x10, 0, 0, 0])])
    max_len: int = DEFAULT_MAX_LEN
    # filter source: exactly one of the three, else the scenario default
    address_filters: dict | None = None
    filter_path: str | None = None
    synthesize_count: int | None = None
    synthesize_seed: int = 0

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.max_execs is None and self.max_wall_time is None:
            raise ConfigError("budget requires max_execs and/or max_wall_time")
        if self.max_execs is not None and self.max_execs < 1:
            raise ConfigError("max_execs must be >= 1")
        if self.max_wall_time is not None and self.max_wall_time <= 0:
            raise ConfigError("max_wall_time must be > 0")
        if not self.initial_seeds:
            raise ConfigError("at least one initial seed is required")
        if any(len(s) < 1 for s in self.initial_seeds):
            raise ConfigError("initial seeds must be at least 1 byte")
        if self.max_len < 1:
            raise ConfigError("max_len must be >= 1")

    @classmethod
    def from_dict(cls, raw: dict) -> "CampaignConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {
            "mode",
            "scenario",
            "budget",
            "rng_seed",
            "snapshot_enabled",
            "noise_enabled",
            "snapshot_cost",
            "initial_seeds",
            "max_len",
            "address_filters",
            "filter_source",
        }
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        config = cls()
        config.mode = raw.get("mode", config.mode)
        config.scenario = raw.get("scenario", config.scenario)
        budget = raw.get("budget", {})
        if not isinstance(budget, dict):
            raise ConfigError("budget must be an object")
        config.max_execs = budget.get("max_execs")
        config.max_wall_time = budget.get("max_wall_time")
        config.rng_seed = raw.get("rng_seed", config.rng_seed)
        config.snapshot_enabled = raw.get("snapshot_enabled", config.snapshot_enabled)
        config.noise_enabled = raw.get("noise_enabled", config.noise_enabled)
        config.snapshot_cost = raw.get("snapshot_cost", config.snapshot_cost)
        config.max_len = raw.get("max_len", config.max_len)
        if "initial_seeds" in raw:
            try:
                config.initial_seeds = [bytes.fromhex(s) for s in raw["initial_seeds"]]
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"initial_seeds must be hex strings: {exc}") from None
        config.address_filters = raw.get("address_filters")
        source = raw.get("filter_source")
        if source is not None:
            if not isinstance(source, dict):
                raise ConfigError("filter_source must be an object")
            config.filter_path = source.get("path")
            config.synthesize_count = source.get("synthesize")
            config.synthesize_seed = source.get("seed", 0)
        config.validate()
        return config

    def replaced(self, **kwargs: Any) -> "CampaignConfig":
        fields = dict(self.__dict__)
        fields["initial_seeds"] = list(fields["initial_seeds"])
        fields.update(kwargs)
        clone = CampaignConfig(**fields)
        clone.validate()
        return clone


def default_filters(layout: ScenarioLayout) -> AddressFilterSet:
    """Coarse per-component filters covering each whole address range."""
    return AddressFilterSet.build(
        kernel=[AddressFilter("kernel_text", *layout.kernel_range)],
        firmware=[AddressFilter("firmware_text", *layout.firmware_range)],
    )


def resolve_filters(config: CampaignConfig, layout: ScenarioLayout) -> AddressFilterSet:
    """Pick the filter source: inline block, file, synthesized, or default."""
    if config.address_filters is not None:
        return filters_from_dict({"address_filters": config.address_filters})
    if config.filter_path is not None:
        return load_filters(Path(config.filter_path).read_bytes())
    if config.synthesize_count is not None:
        return synthesize_filters(
            config.synthesize_count, config.synthesize_seed, base=default_filters(layout)
        )
    return default_filters(layout)


@dataclass
class ExecRecord:
    exec_index: int
    new_kernel_pcs: int
    new_firmware_pcs: int
    cumulative_kernel: int
    cumulative_firmware: int
    outcome: str
    flow_hash: str
    membership_checks: int  # cumulative over the campaign

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "exec_index": self.exec_index,
                "new_kernel_pcs": self.new_kernel_pcs,
                "new_firmware_pcs": self.new_firmware_pcs,
                "cumulative_kernel": self.cumulative_kernel,
                "cumulative_firmware": self.cumulative_firmware,
                "outcome": self.outcome,
                "flow_hash": self.flow_hash,
                "membership_checks": self.membership_checks,
            }
        )


@dataclass
class CampaignStats:
    mode: str
    scenario: str
    rng_seed: int
    records: list[ExecRecord] = field(default_factory=list)
    total_execs: int = 0
    crash_count: int = 0
    branches_covered: int = 0
    full_firmware_coverage: bool = False
    retained_seeds: int = 0
    distinct_flows: int = 0
    filter_stats: FilterStats = field(default_factory=FilterStats)
    kernel_cov: dict[int, int] = field(default_factory=dict)
    firmware_cov: dict[int, int] = field(default_factory=dict)
    aborted: bool = False
    abort_reason: str | None = None

    def summary_dict(self) -> dict:
        return {
            "mode": self.mode,
            "scenario": self.scenario,
            "rng_seed": self.rng_seed,
            "total_execs": self.total_execs,
            "crashes": self.crash_count,
            "branches_covered": self.branches_covered,
            "full_firmware_coverage": self.full_firmware_coverage,
            "retained_seeds": self.retained_seeds,
            "distinct_flows": self.distinct_flows,
            "membership_checks": self.filter_stats.membership_checks,
            "distinct_addresses": self.filter_stats.distinct_addresses,
            "filter_count": self.filter_stats.filter_count,
            "trace_pcs_classified": self.filter_stats.trace_length,
            "aborted": self.aborted,
            "abort_reason": self.abort_reason,
        }


def _count_branches(layout: ScenarioLayout, cov: CoverageState) -> int:
    return sum(1 for pc in layout.firmware_case_pcs() if pc in cov.firmware_cov)


def run_campaign(
    config: CampaignConfig,
    *,
    backend: TargetBackend | None = None,
    workdir: Path | None = None,
) -> CampaignStats:
    """Run one fuzzing campaign to its budget and return the statistics.

    Raises CampaignAborted (with partial stats attached) if the backend
    fails mid-run.  When workdir is given the corpus, crash inventory,
    stats stream, summary, coverage maps and scenario layout are written
    there.
    """
    config.validate()
    layout = scenario_layout(config.scenario)
    filter_set = resolve_filters(config, layout)
    if backend is None:
        backend = SimTarget(
            config.scenario,
            noise_enabled=config.noise_enabled,
            snapshot_cost=config.snapshot_cost,
        )
    rng = MutationRng(config.rng_seed)
    cov = CoverageState()
    corpus = Corpus()
    unified = UnifiedCoverage()
    stats = CampaignStats(
        mode=config.mode, scenario=config.scenario, rng_seed=config.rng_seed
    )
    stats.filter_stats.filter_count = filter_set.filter_count

    try:
        # init phase: establish baseline coverage and seed metadata
        for data in config.initial_seeds:
            result = backend.run(data)
            cres = classify(result.trace, filter_set, cov)
            stats.filter_stats.add(cres.stats)
            merge_coverage(unified, cres.kernel_pcs, cres.firmware_pcs)
            if result.outcome == "crash":
                backend.restart()
                continue
            corpus.add_initial_seed(
                data,
                flow=flow_hash(cres.observed),
                new_coverage=len(cres.new_kernel) + len(cres.new_firmware),
                exec_time=result.exec_time,
            )
        if not corpus.seeds:
            raise ConfigError("every initial seed crashed; nothing to schedule")
        if config.snapshot_enabled:
            backend.save_snapshot(SNAPSHOT_TAG)

        # wall budgets run on the backend's clock: real time for an
        # emulator-backed target, simulated time for the simulated one
        # (which keeps wall-budget campaigns exactly reproducible)
        loop_start = backend.clock()

        def budget_reached() -> bool:
            if config.max_execs is not None and stats.total_execs >= config.max_execs:
                return True
            if (
                config.max_wall_time is not None
                and backend.clock() - loop_start >= config.max_wall_time
            ):
                return True
            return False

        while not budget_reached():
            seed = choose_next(corpus)
            energy = assign_energy(seed, corpus)
            for _ in range(energy):
                if budget_reached():
                    break
                data = mutate(seed.input, rng, config.max_len)
                result = backend.run(data)
                cres = classify(result.trace, filter_set, cov)
                stats.filter_stats.add(cres.stats)
                merge_coverage(unified, cres.kernel_pcs, cres.firmware_pcs)
                fh = flow_hash(cres.observed)
                interesting = is_interesting(
                    cov.kernel_found, cov.firmware_found, config.mode
                )
                retain(
                    corpus,
                    data,
                    interesting=interesting,
                    flow=fh,
                    new_coverage=len(cres.new_kernel) + len(cres.new_firmware),
                    outcome=result.outcome,
                    crash_reason=result.crash_reason,
                    exec_time=result.exec_time,
                    exec_index=stats.total_execs + 1,
                    parent=seed.id,
                )
                stats.total_execs += 1
                if result.outcome == "crash":
                    stats.crash_count += 1
                stats.records.append(
                    ExecRecord(
                        exec_index=stats.total_execs,
                        new_kernel_pcs=len(cres.new_kernel),
                        new_firmware_pcs=len(cres.new_firmware),
                        cumulative_kernel=len(cov.kernel_cov),
                        cumulative_firmware=len(cov.firmware_cov),
                        outcome=result.outcome,
                        flow_hash=f"0x{fh:016x}",
                        membership_checks=stats.filter_stats.membership_checks,
                    )
                )
                if result.outcome == "crash":
                    backend.restart()
                    if config.snapshot_enabled:
                        backend.load_snapshot(SNAPSHOT_TAG)
                elif config.snapshot_enabled:
                    backend.load_snapshot(SNAPSHOT_TAG)
    except BackendError as exc:
        _finalize(stats, layout, cov, corpus)
        stats.aborted = True
        stats.abort_reason = str(exc)
        if workdir is not None:
            export_campaign(stats, corpus, layout, Path(workdir))
        raise CampaignAborted(str(exc), stats) from exc

    _finalize(stats, layout, cov, corpus)
    if workdir is not None:
        export_campaign(stats, corpus, layout, Path(workdir))
    return stats


def _finalize(
    stats: CampaignStats, layout: ScenarioLayout, cov: CoverageState, corpus: Corpus
) -> None:
    stats.branches_covered = _count_branches(layout, cov)
    stats.full_firmware_coverage = stats.branches_covered == len(
        layout.firmware_case_pcs()
    )
    stats.retained_seeds = len(corpus.seeds)
    stats.distinct_flows = len(corpus.flow_counts)
    stats.kernel_cov = dict(cov.kernel_cov)
    stats.firmware_cov = dict(cov.firmware_cov)


# -- persistence ------------------------------------------------------------


def export_stats(stats: CampaignStats, workdir: Path) -> None:
    """Write stats.jsonl, summary.json and coverage.json under workdir."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    with open(workdir / "stats.jsonl", "w") as f:
        for record in stats.records:
            f.write(record.to_json_line() + "\n")
    (workdir / "summary.json").write_text(
        json.dumps(stats.summary_dict(), indent=2) + "\n"
    )
    coverage = {
        "kernel": {f"0x{pc:x}": n for pc, n in sorted(stats.kernel_cov.items())},
        "firmware": {f"0x{pc:x}": n for pc, n in sorted(stats.firmware_cov.items())},
    }
    (workdir / "coverage.json").write_text(json.dumps(coverage, indent=2) + "\n")


def export_campaign(
    stats: CampaignStats, corpus: Corpus, layout: ScenarioLayout, workdir: Path
) -> None:
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    export_stats(stats, workdir)
    save_corpus(corpus, workdir)
    (workdir / "layout.json").write_text(json.dumps(layout.to_dict(), indent=2) + "\n")


def load_stats(workdir: Path) -> CampaignStats:
    """Rebuild CampaignStats from an exported working directory."""
    workdir = Path(workdir)
    summary = json.loads((workdir / "summary.json").read_text())
    coverage = json.loads((workdir / "coverage.json").read_text())
    stats = CampaignStats(
        mode=summary["mode"],
        scenario=summary["scenario"],
        rng_seed=summary["rng_seed"],
        total_execs=summary["total_execs"],
        crash_count=summary["crashes"],
        branches_covered=summary["branches_covered"],
        full_firmware_coverage=summary["full_firmware_coverage"],
        retained_seeds=summary["retained_seeds"],
        distinct_flows=summary["distinct_flows"],
        filter_stats=FilterStats(
            membership_checks=summary["membership_checks"],
            distinct_addresses=summary["distinct_addresses"],
            filter_count=summary["filter_count"],
            trace_length=summary["trace_pcs_classified"],
        ),
        kernel_cov={int(k, 16): v for k, v in coverage["kernel"].items()},
        firmware_cov={int(k, 16): v for k, v in coverage["firmware"].items()},
        aborted=summary["aborted"],
        abort_reason=summary["abort_reason"],
    )
    with open(workdir / "stats.jsonl") as f:
        for line in f:
            raw = json.loads(line)
            stats.records.append(ExecRecord(**raw))
    return stats


# -- multi vs single comparison ---------------------------------------------


@dataclass
class ModeSummary:
    mode: str
    full_coverage_count: int = 0
    mean_branches: float = 0.0
    campaigns: list[dict] = field(default_factory=list)
    series: list[float] = field(default_factory=list)  # mean cumulative coverage


@dataclass
class ComparisonSummary:
    campaigns_per_mode: int
    min_execs: int
    multi: ModeSummary = field(default_factory=lambda: ModeSummary("multi"))
    single: ModeSummary = field(default_factory=lambda: ModeSummary("single"))

    def to_dict(self) -> dict:
        return {
            "campaigns_per_mode": self.campaigns_per_mode,
            "min_execs": self.min_execs,
            "modes": {
                summary.mode: {
                    "full_coverage_count": summary.full_coverage_count,
                    "mean_branches": summary.mean_branches,
                    "campaigns": summary.campaigns,
                    "series": summary.series,
                }
                for summary in (self.multi, self.single)
            },
        }


def run_comparison(base_config: CampaignConfig, campaigns_per_mode: int) -> ComparisonSummary:
    """Run n campaigns per mode with paired rng seeds (seed + i for campaign
    i in both modes, so mode is the only difference) and aggregate results.

    The per-execution coverage series of each mode is averaged across its
    campaigns and truncated to the smallest execution count seen anywhere,
    keeping the two series aligned.
    """
    if campaigns_per_mode < 1:
        raise ConfigError("campaigns_per_mode must be >= 1")
    results: dict[str, list[CampaignStats]] = {"multi": [], "single": []}
    for i in range(campaigns_per_mode):
        for mode in MODES:
            config = base_config.replaced(mode=mode, rng_seed=base_config.rng_seed + i)
            results[mode].append(run_campaign(config))

    min_execs = min(stats.total_execs for runs in results.values() for stats in runs)
    summary = ComparisonSummary(campaigns_per_mode=campaigns_per_mode, min_execs=min_execs)
    for mode_summary in (summary.multi, summary.single):
        runs = results[mode_summary.mode]
        mode_summary.full_coverage_count = sum(
            1 for stats in runs if stats.full_firmware_coverage
        )
        mode_summary.mean_branches = sum(stats.branches_covered for stats in runs) / len(runs)
        mode_summary.campaigns = [
            {
                "rng_seed": stats.rng_seed,
                "total_execs": stats.total_execs,
                "branches_covered": stats.branches_covered,
                "full_firmware_coverage": stats.full_firmware_coverage,
                "crashes": stats.crash_count,
            }
            for stats in runs
        ]
        for index in range(min_execs):
            total = sum(
                run.records[index].cumulative_kernel + run.records[index].cumulative_firmware
                for run in runs
            )
            mode_summary.series.append(total / len(runs))
    return summary
