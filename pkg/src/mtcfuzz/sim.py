"""Deterministic simulated two-component target.

A toy kernel dispatches selected inputs across an ecall-like boundary
into toy firmware.  Each component occupies its own address range and
emits PC traces in the shared trace-log format, so the whole feedback
pipeline can be exercised without an emulator.

Input contract (missing bytes read as 0x00):
  byte0  extension id; only 0x10 reaches the firmware dispatcher
  byte1  function id; 0..6 select distinct firmware branches, others
         fall through to the default branch
  byte2  call argument: its low bit selects a per-case subpath, its low
         three bits set the work-loop iteration count, and in the
         shm_bug scenario it doubles as the declared buffer length
  byte3  actual buffer length (shm_bug scenario, fid == 2)

In the shm_bug scenario a declared length larger than the actual length
drives the firmware overflow path and the kernel cleanup afterwards
crashes, modelling a missed-validation bug that only detonates on the
kernel side of the boundary.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace

from .rng import SplitMix64

SNAPSHOT_TAG = "mtcfuzz-snapshot"

DISPATCH_EID = 0x10
N_FIRMWARE_CASES = 7
N_CASE_BODY_PCS = 7

EXEC_TIME_BASE = 50e-6
EXEC_TIME_PER_PC = 1e-6

DEFAULT_SNAPSHOT_COST = 0.12
NOISE_PCS_PER_RUN = 6
_NOISE_SEED = 0x6E6F697365


class BackendError(RuntimeError):
    pass


class CapabilityError(BackendError):
    """Operation requires a capability this backend does not have."""


class SnapshotNotFoundError(BackendError):
    pass


class TargetDownError(BackendError):
    """The target crashed and must be restarted before running tests."""


@dataclass(frozen=True)
class ScenarioLayout:
    """Address layout of one scenario: disjoint component ranges plus
    the named PCs of every modelled branch point."""

    name: str
    kernel_range: tuple[int, int]
    firmware_range: tuple[int, int]
    noise_range: tuple[int, int]
    branch_pcs: dict[str, int]

    def firmware_case_pcs(self) -> list[int]:
        return [self.branch_pcs[f"fw_case_{i}"] for i in range(N_FIRMWARE_CASES)]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "kernel_range": [f"0x{b:x}" for b in self.kernel_range],
            "firmware_range": [f"0x{b:x}" for b in self.firmware_range],
            "noise_range": [f"0x{b:x}" for b in self.noise_range],
            "branch_pcs": {label: f"0x{pc:x}" for label, pc in self.branch_pcs.items()},
        }


_KERNEL_BASE = 0xFFFFFFFF80010000
_FIRMWARE_BASE = 0x0000000080000000
_NOISE_BASE = 0xFFFFFFFF90000000
_RANGE_SPAN = 0xFFFF


def _build_layout(scenario: str) -> ScenarioLayout:
    branch_pcs = {
        "k_syscall_entry": _KERNEL_BASE + 0x000,
        "k_dispatch_check": _KERNEL_BASE + 0x010,
        "k_err_invalid_eid": _KERNEL_BASE + 0x020,
        "k_err_return": _KERNEL_BASE + 0x030,
        "k_ecall_entry": _KERNEL_BASE + 0x040,
        "k_ret_from_ecall": _KERNEL_BASE + 0x050,
        "fw_prologue": _FIRMWARE_BASE + 0x000,
        "fw_default": _FIRMWARE_BASE + 0x010,
        "fw_loop_body": _FIRMWARE_BASE + 0x020,
        "fw_epilogue": _FIRMWARE_BASE + 0x030,
    }
    for fid in range(N_FIRMWARE_CASES):
        base = _FIRMWARE_BASE + 0x100 + 0x40 * fid
        branch_pcs[f"fw_case_{fid}"] = base
        for i in range(N_CASE_BODY_PCS):
            branch_pcs[f"fw_case_{fid}_body_{i}"] = base + 0x04 + 0x04 * i
        branch_pcs[f"fw_case_{fid}_arg"] = base + 0x24
    if scenario == "shm_bug":
        branch_pcs["fw_overflow"] = _FIRMWARE_BASE + 0x040
        branch_pcs["k_shm_cleanup"] = _KERNEL_BASE + 0x060
    return ScenarioLayout(
        name=scenario,
        kernel_range=(_KERNEL_BASE, _KERNEL_BASE + _RANGE_SPAN),
        firmware_range=(_FIRMWARE_BASE, _FIRMWARE_BASE + _RANGE_SPAN),
        noise_range=(_NOISE_BASE, _NOISE_BASE + _RANGE_SPAN),
        branch_pcs=branch_pcs,
    )


SCENARIOS = ("sbi_base", "shm_bug")


def scenario_layout(scenario: str) -> ScenarioLayout:
    if scenario not in SCENARIOS:
        raise ValueError(f"unknown scenario {scenario!r}; known: {', '.join(SCENARIOS)}")
    return _build_layout(scenario)


@dataclass
class SimState:
    """Mutable target state; snapshot load and restart must restore it exactly."""

    scenario: str
    persistent_counter: int = 0
    crashed: bool = False
    noise_cursor: int = 0


@dataclass
class ExecutionResult:
    trace: list[int]
    outcome: str  # "ok" | "crash" | "timeout"
    exec_time: float
    crash_reason: str | None = None


class TargetBackend(ABC):
    """Contract between the campaign loop and a fuzzing target.

    run() must be deterministic given (input, current state).  Backends
    without snapshot support raise CapabilityError from save_snapshot.
    clock() is the backend's own time base: wall-clock seconds for a real
    emulator, accumulated simulated seconds for the simulated target.
    Campaign wall budgets are measured against it.
    """

    supports_snapshot: bool = False

    @abstractmethod
    def run(self, data: bytes) -> ExecutionResult: ...

    @abstractmethod
    def save_snapshot(self, tag: str) -> None: ...

    @abstractmethod
    def load_snapshot(self, tag: str) -> None: ...

    @abstractmethod
    def restart(self) -> None: ...

    @abstractmethod
    def clock(self) -> float: ...


class SimTarget(TargetBackend):
    """In-process simulated target implementing the backend contract.

    The backend keeps a virtual clock: every run advances it by the
    execution's simulated duration, and every snapshot load charges a
    configurable fraction of the mean execution time seen so far.
    Throughput experiments measured on this clock are exactly
    reproducible on any machine.
    """

    supports_snapshot = True

    def __init__(
        self,
        scenario: str = "sbi_base",
        *,
        noise_enabled: bool = True,
        snapshot_cost: float = DEFAULT_SNAPSHOT_COST,
    ):
        self.layout = scenario_layout(scenario)
        self.noise_enabled = noise_enabled
        self.snapshot_cost = snapshot_cost
        self.state = SimState(scenario=scenario)
        self._snapshots: dict[str, SimState] = {}
        self._clock = 0.0
        self._exec_time_total = 0.0
        self._exec_count = 0

    # -- execution ---------------------------------------------------------

    def run(self, data: bytes) -> ExecutionResult:
        if self.state.crashed:
            raise TargetDownError("target crashed; restart() it before running tests")
        pcs = self.layout.branch_pcs
        eid = data[0] if len(data) > 0 else 0
        fid = data[1] if len(data) > 1 else 0
        trace = [pcs["k_syscall_entry"], pcs["k_dispatch_check"]]
        outcome = "ok"
        reason = None
        if eid != DISPATCH_EID:
            trace += [pcs["k_err_invalid_eid"], pcs["k_err_return"]]
        else:
            self.state.persistent_counter += 1
            trace += [pcs["k_ecall_entry"], pcs["fw_prologue"]]
            arg = data[2] if len(data) > 2 else 0
            overflow = False
            if fid < N_FIRMWARE_CASES:
                trace.append(pcs[f"fw_case_{fid}"])
                trace += [pcs[f"fw_case_{fid}_body_{i}"] for i in range(N_CASE_BODY_PCS)]
                if arg & 1:
                    trace.append(pcs[f"fw_case_{fid}_arg"])
            else:
                trace.append(pcs["fw_default"])
            # argument-driven work loop; iteration count feeds the flow hash
            trace += [pcs["fw_loop_body"]] * (arg & 0x7)
            if self.layout.name == "shm_bug" and fid == 2:
                declared = arg
                actual = data[3] if len(data) > 3 else 0
                if declared > actual:
                    trace.append(pcs["fw_overflow"])
                    overflow = True
            trace += [pcs["fw_epilogue"], pcs["k_ret_from_ecall"]]
            if overflow:
                trace.append(pcs["k_shm_cleanup"])
                outcome = "crash"
                reason = "null-deref in shm cleanup"
                self.state.crashed = True

        if self.noise_enabled:
            trace = self._weave_noise(trace)
        self.state.noise_cursor += 1
        exec_time = EXEC_TIME_BASE + EXEC_TIME_PER_PC * len(trace)
        self._clock += exec_time
        self._exec_time_total += exec_time
        self._exec_count += 1
        return ExecutionResult(
            trace=trace,
            outcome=outcome,
            exec_time=exec_time,
            crash_reason=reason,
        )

    def _weave_noise(self, trace: list[int]) -> list[int]:
        lo, hi = self.layout.noise_range
        rng = SplitMix64(_NOISE_SEED ^ (self.state.noise_cursor + 1))
        noise = [lo + rng.below(hi - lo + 1) for _ in range(NOISE_PCS_PER_RUN)]
        woven: list[int] = []
        for i, pc in enumerate(trace):
            if i < len(noise):
                woven.append(noise[i])
            woven.append(pc)
        woven.extend(noise[len(trace) :])
        return woven

    # -- state management --------------------------------------------------

    def save_snapshot(self, tag: str) -> None:
        if not self.supports_snapshot:
            raise CapabilityError("backend has no snapshot support")
        self._snapshots[tag] = replace(self.state)

    def load_snapshot(self, tag: str) -> None:
        if tag not in self._snapshots:
            raise SnapshotNotFoundError(f"no snapshot saved under tag {tag!r}")
        # restoring costs a fixed fraction of the mean execution time
        if self._exec_count:
            self._clock += self.snapshot_cost * (
                self._exec_time_total / self._exec_count
            )
        self.state = replace(self._snapshots[tag])

    def restart(self) -> None:
        self.state = SimState(scenario=self.layout.name)

    def clock(self) -> float:
        return self._clock
