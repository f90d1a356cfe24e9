"""Multi-target coverage-guided greybox fuzzing framework.

Coverage observed in cooperating software components (an OS-like kernel
and a firmware-like component behind an ecall boundary) is unified into
a single feedback signal.  The package ships a deterministic simulated
target, the address-filter classification pipeline, a QMP client for
driving a real emulator, campaign orchestration with multi/single
comparison, and an HTML coverage-diff report.
"""

from .campaign import (
    CampaignAborted,
    CampaignConfig,
    CampaignStats,
    ComparisonSummary,
    ConfigError,
    run_campaign,
    run_comparison,
)
from .corpus import Corpus, Seed, assign_energy, choose_next, is_interesting, retain
from .coverage import EdgeHasher, UnifiedCoverage, flow_hash, merge_coverage, qemu_block_location
from .filters import (
    AddressFilter,
    AddressFilterSet,
    ClassifyResult,
    CoverageState,
    FilterError,
    FilterStats,
    addr_in_filters,
    classify,
    load_filters,
    synthesize_filters,
)
from .mutation import MutationRng, mutate
from .qmp import QmpSession, QmpSnapshotController, build_trace_start, build_trace_stop
from .report import LineCoverage, SymbolTable, aggregate_lines, load_symbol_table, render_html
from .sim import ExecutionResult, ScenarioLayout, SimTarget, TargetBackend, scenario_layout
from .trace import TraceParseError, decode_trace, encode_trace

__version__ = "0.1.0"

__all__ = [
    "AddressFilter",
    "AddressFilterSet",
    "CampaignAborted",
    "CampaignConfig",
    "CampaignStats",
    "ClassifyResult",
    "ComparisonSummary",
    "ConfigError",
    "Corpus",
    "CoverageState",
    "EdgeHasher",
    "ExecutionResult",
    "FilterError",
    "FilterStats",
    "LineCoverage",
    "MutationRng",
    "QmpSession",
    "QmpSnapshotController",
    "ScenarioLayout",
    "Seed",
    "SimTarget",
    "SymbolTable",
    "TargetBackend",
    "TraceParseError",
    "UnifiedCoverage",
    "addr_in_filters",
    "aggregate_lines",
    "assign_energy",
    "build_trace_start",
    "build_trace_stop",
    "choose_next",
    "classify",
    "decode_trace",
    "encode_trace",
    "flow_hash",
    "is_interesting",
    "load_filters",
    "load_symbol_table",
    "merge_coverage",
    "mutate",
    "qemu_block_location",
    "render_html",
    "retain",
    "run_campaign",
    "run_comparison",
    "scenario_layout",
    "synthesize_filters",
]
