"""Seed corpus, energy assignment, and test interestingness.

Seeds rotate round-robin.  Energy follows three signals: how fast the
seed executes relative to the corpus mean, how much new coverage it
discovered, and how rare its execution flow is among everything observed
so far.  All coefficients live in EnergyPolicy so experiments can pin or
tune them.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path


class CorpusError(RuntimeError):
    pass


@dataclass
class Seed:
    """Retained input plus the scheduling metadata of its discovery."""

    id: int
    input: bytes
    flow: int
    new_coverage_at_discovery: int
    exec_time: float
    discovered_at: int
    parent: int | None = None


@dataclass
class CrashInput:
    input: bytes
    reason: str
    discovered_at: int


@dataclass(frozen=True)
class EnergyPolicy:
    base: int = 8
    min_energy: int = 1
    max_energy: int = 128
    time_factor_min: float = 0.25
    time_factor_max: float = 4.0
    cov_factor_cap: float = 3.0
    rarity_count_cap: int = 4


@dataclass
class Corpus:
    """Seed store, crash store, and flow-hash observation counts."""

    seeds: list[Seed] = field(default_factory=list)
    crashes: list[CrashInput] = field(default_factory=list)
    flow_counts: dict[int, int] = field(default_factory=dict)
    cursor: int = 0
    _next_id: int = 0
    _exec_time_total: float = 0.0
    _exec_count: int = 0

    @property
    def mean_exec_time(self) -> float:
        if self._exec_count == 0:
            raise CorpusError("no executions recorded yet")
        return self._exec_time_total / self._exec_count

    def _observe(self, flow: int, exec_time: float) -> None:
        self.flow_counts[flow] = self.flow_counts.get(flow, 0) + 1
        self._exec_time_total += exec_time
        self._exec_count += 1

    def _append_seed(
        self,
        data: bytes,
        flow: int,
        new_coverage: int,
        exec_time: float,
        discovered_at: int,
        parent: int | None,
    ) -> Seed:
        seed = Seed(
            id=self._next_id,
            input=data,
            flow=flow,
            new_coverage_at_discovery=new_coverage,
            exec_time=exec_time,
            discovered_at=discovered_at,
            parent=parent,
        )
        self._next_id += 1
        self.seeds.append(seed)
        return seed

    def add_initial_seed(
        self, data: bytes, flow: int, new_coverage: int, exec_time: float
    ) -> Seed:
        self._observe(flow, exec_time)
        return self._append_seed(data, flow, new_coverage, exec_time, 0, None)


def choose_next(corpus: Corpus) -> Seed:
    """Round-robin selection in insertion order, wrapping at the end."""
    if not corpus.seeds:
        raise CorpusError("corpus is empty; at least one initial seed is required")
    if corpus.cursor >= len(corpus.seeds):
        corpus.cursor = 0
    seed = corpus.seeds[corpus.cursor]
    corpus.cursor += 1
    return seed


def assign_energy(
    seed: Seed, corpus: Corpus, policy: EnergyPolicy = EnergyPolicy()
) -> int:
    """Mutations allotted to one scheduling round of this seed."""
    time_factor = corpus.mean_exec_time / seed.exec_time
    time_factor = min(max(time_factor, policy.time_factor_min), policy.time_factor_max)
    cov_factor = 1.0 + min(
        math.log2(1 + seed.new_coverage_at_discovery), policy.cov_factor_cap
    )
    observations = corpus.flow_counts.get(seed.flow, 1)
    if observations == 1:
        rarity_factor = 2.0
    else:
        rarity_factor = 1.0 / min(observations, policy.rarity_count_cap)
    energy = round(policy.base * time_factor * cov_factor * rarity_factor)
    return min(max(energy, policy.min_energy), policy.max_energy)


def is_interesting(kernel_found: bool, firmware_found: bool, mode: str) -> bool:
    """Novelty judgment; single mode ignores firmware-side discoveries."""
    if mode == "multi":
        return kernel_found or firmware_found
    if mode == "single":
        return kernel_found
    raise ValueError(f"unknown mode: {mode!r}")


def retain(
    corpus: Corpus,
    test_input: bytes,
    *,
    interesting: bool,
    flow: int,
    new_coverage: int,
    outcome: str,
    crash_reason: str | None,
    exec_time: float,
    exec_index: int,
    parent: int | None,
) -> Seed | None:
    """Record one executed test: crash bucket, new seed, or stats only.

    Returns the new Seed when one was added.  Crashes are stored verbatim
    and never pruned; their flows do not feed the rarity counts.
    """
    if outcome == "crash":
        corpus.crashes.append(
            CrashInput(input=test_input, reason=crash_reason or "", discovered_at=exec_index)
        )
        return None
    corpus._observe(flow, exec_time)
    if interesting:
        return corpus._append_seed(
            test_input, flow, new_coverage, exec_time, exec_index, parent
        )
    return None


def save_corpus(corpus: Corpus, directory: Path) -> None:
    """Persist seeds (raw bytes + JSON sidecar) and crashes to a directory."""
    directory = Path(directory)
    seed_dir = directory / "corpus"
    crash_dir = directory / "crashes"
    seed_dir.mkdir(parents=True, exist_ok=True)
    crash_dir.mkdir(parents=True, exist_ok=True)
    for seed in corpus.seeds:
        stem = seed_dir / f"seed_{seed.id:06d}"
        stem.with_suffix(".bin").write_bytes(seed.input)
        stem.with_suffix(".json").write_text(
            json.dumps(
                {
                    "id": seed.id,
                    "flow": f"0x{seed.flow:016x}",
                    "new_coverage_at_discovery": seed.new_coverage_at_discovery,
                    "exec_time": seed.exec_time,
                    "discovered_at": seed.discovered_at,
                    "parent": seed.parent,
                },
                indent=2,
            )
            + "\n"
        )
    for i, crash in enumerate(corpus.crashes):
        stem = crash_dir / f"crash_{i:06d}"
        stem.with_suffix(".bin").write_bytes(crash.input)
        stem.with_suffix(".json").write_text(
            json.dumps(
                {"reason": crash.reason, "discovered_at": crash.discovered_at},
                indent=2,
            )
            + "\n"
        )


def load_corpus(directory: Path) -> Corpus:
    """Rebuild seed/crash inventories written by save_corpus."""
    directory = Path(directory)
    corpus = Corpus()
    seed_metas = sorted((directory / "corpus").glob("seed_*.json"))
    for meta_path in seed_metas:
        meta = json.loads(meta_path.read_text())
        data = meta_path.with_suffix(".bin").read_bytes()
        seed = corpus._append_seed(
            data,
            flow=int(meta["flow"], 16),
            new_coverage=meta["new_coverage_at_discovery"],
            exec_time=meta["exec_time"],
            discovered_at=meta["discovered_at"],
            parent=meta["parent"],
        )
        if seed.id != meta["id"]:
            raise CorpusError(f"seed id mismatch in {meta_path}")
    for meta_path in sorted((directory / "crashes").glob("crash_*.json")):
        meta = json.loads(meta_path.read_text())
        corpus.crashes.append(
            CrashInput(
                input=meta_path.with_suffix(".bin").read_bytes(),
                reason=meta["reason"],
                discovered_at=meta["discovered_at"],
            )
        )
    return corpus
