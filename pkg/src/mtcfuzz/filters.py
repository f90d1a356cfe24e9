"""Address-range filters and trace classification.

Filters attribute observed PCs to the kernel or firmware component and
drop everything else (scheduler noise, unrelated subsystems).  Membership
is answered by binary search over the sorted lower bounds; classification
consults the coverage maps first so the search only runs for addresses
that have not been seen before.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .rng import SplitMix64
from .trace import PC_MAX


class FilterError(ValueError):
    """Raised when a filter definition is malformed or inconsistent."""


@dataclass(frozen=True)
class AddressFilter:
    """Named inclusive address range [lower, upper]."""

    name: str
    lower: int
    upper: int


@dataclass(frozen=True)
class AddressFilterSet:
    """Validated kernel/firmware filters plus their binary-search indexes.

    Both filter sequences are sorted ascending by lower bound and contain
    no overlapping ranges; the starts tuples are the precomputed lower
    bounds used by addr_in_filters.
    """

    kernel: tuple[AddressFilter, ...]
    firmware: tuple[AddressFilter, ...]
    kernel_starts: tuple[int, ...]
    firmware_starts: tuple[int, ...]

    @classmethod
    def build(
        cls,
        kernel: Iterable[AddressFilter] = (),
        firmware: Iterable[AddressFilter] = (),
    ) -> "AddressFilterSet":
        k = _validate_component(kernel, "kernel")
        f = _validate_component(firmware, "firmware")
        return cls(
            kernel=k,
            firmware=f,
            kernel_starts=tuple(flt.lower for flt in k),
            firmware_starts=tuple(flt.lower for flt in f),
        )

    @property
    def filter_count(self) -> int:
        return len(self.kernel) + len(self.firmware)


def _validate_component(
    filters: Iterable[AddressFilter], component: str
) -> tuple[AddressFilter, ...]:
    for flt in filters:
        if not (0 <= flt.lower <= PC_MAX and 0 <= flt.upper <= PC_MAX):
            raise FilterError(f"{component} filter {flt.name!r}: bound exceeds 64 bits")
        if flt.lower > flt.upper:
            raise FilterError(
                f"{component} filter {flt.name!r}: lower 0x{flt.lower:x} > upper 0x{flt.upper:x}"
            )
    ordered = tuple(sorted(filters, key=lambda flt: flt.lower))
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.lower <= prev.upper:
            raise FilterError(
                f"{component} filters {prev.name!r} and {cur.name!r} overlap"
            )
    return ordered


def _parse_bound(raw: object, what: str) -> int:
    if not isinstance(raw, str):
        raise FilterError(f"{what}: expected hex string, got {raw!r}")
    try:
        value = int(raw, 16)
    except ValueError:
        raise FilterError(f"{what}: not a hex address: {raw!r}") from None
    if not (0 <= value <= PC_MAX):
        raise FilterError(f"{what}: out of 64-bit range: {raw!r}")
    return value


def _parse_component(entries: object, component: str) -> list[AddressFilter]:
    if entries is None:
        return []
    if not isinstance(entries, list):
        raise FilterError(f"address_filters.{component} must be an array")
    parsed = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise FilterError(f"address_filters.{component}[{i}] must be an object")
        name = entry.get("name", f"{component}[{i}]")
        parsed.append(
            AddressFilter(
                name=str(name),
                lower=_parse_bound(entry.get("lower"), f"{component} filter {name!r} lower"),
                upper=_parse_bound(entry.get("upper"), f"{component} filter {name!r} upper"),
            )
        )
    return parsed


def filters_from_dict(config: dict) -> AddressFilterSet:
    """Build a filter set from an already-parsed address_filters document."""
    block = config.get("address_filters")
    if block is None:
        raise FilterError("missing top-level 'address_filters' key")
    if not isinstance(block, dict):
        raise FilterError("'address_filters' must be an object")
    return AddressFilterSet.build(
        kernel=_parse_component(block.get("kernel"), "kernel"),
        firmware=_parse_component(block.get("firmware"), "firmware"),
    )


def load_filters(data: bytes | str) -> AddressFilterSet:
    """Parse the JSON filter configuration into a validated filter set."""
    try:
        document = json.loads(data)
    except json.JSONDecodeError as exc:
        raise FilterError(f"invalid JSON: {exc}") from None
    if not isinstance(document, dict):
        raise FilterError("filter document must be a JSON object")
    return filters_from_dict(document)


def filters_to_dict(filter_set: AddressFilterSet) -> dict:
    """Inverse of filters_from_dict (hex strings, same key layout)."""
    return {
        "address_filters": {
            component: [
                {"name": flt.name, "lower": f"0x{flt.lower:x}", "upper": f"0x{flt.upper:x}"}
                for flt in getattr(filter_set, component)
            ]
            for component in ("kernel", "firmware")
        }
    }


def addr_in_filters(
    pc: int, filters: Sequence[AddressFilter], starts: Sequence[int]
) -> bool:
    """True iff some filter satisfies lower <= pc <= upper.

    Locates the rightmost filter whose lower bound is <= pc, then checks
    the upper bound; O(log N) comparisons.
    """
    idx = bisect_right(starts, pc) - 1
    if idx < 0:
        return False
    return pc <= filters[idx].upper


@dataclass
class CoverageState:
    """Per-component PC execution counts plus per-call discovery flags.

    The maps persist for a whole campaign; kernel_found/firmware_found are
    rewritten by every classify call and report whether that call inserted
    at least one new address for the component.
    """

    kernel_cov: dict[int, int] = field(default_factory=dict)
    firmware_cov: dict[int, int] = field(default_factory=dict)
    kernel_found: bool = False
    firmware_found: bool = False


@dataclass
class FilterStats:
    """Classification cost counters.

    membership_checks counts addr_in_filters invocations, distinct_addresses
    counts first-time map insertions, filter_count is the configured range
    count and trace_length the number of PCs consumed.
    """

    membership_checks: int = 0
    distinct_addresses: int = 0
    filter_count: int = 0
    trace_length: int = 0

    def add(self, other: "FilterStats") -> None:
        self.membership_checks += other.membership_checks
        self.distinct_addresses += other.distinct_addresses
        self.filter_count = max(self.filter_count, other.filter_count)
        self.trace_length += other.trace_length


@dataclass
class ClassifyResult:
    """Outcome of classifying one trace against the filter set."""

    observed: list[int]
    stats: FilterStats
    new_kernel: list[int]
    new_firmware: list[int]
    kernel_pcs: set[int]
    firmware_pcs: set[int]


def classify(
    trace: Iterable[int], filter_set: AddressFilterSet, state: CoverageState
) -> ClassifyResult:
    """Attribute each PC to kernel or firmware coverage, or drop it.

    Known addresses take the map fast path; unknown ones are checked against
    the kernel filters first, then the firmware filters.  The coverage maps
    in ``state`` are updated in place and the found flags are reset to
    reflect only this call.
    """
    kernel_cov = state.kernel_cov
    firmware_cov = state.firmware_cov
    state.kernel_found = False
    state.firmware_found = False

    observed: list[int] = []
    new_kernel: list[int] = []
    new_firmware: list[int] = []
    kernel_pcs: set[int] = set()
    firmware_pcs: set[int] = set()
    checks = 0
    length = 0

    for pc in trace:
        length += 1
        if pc in kernel_cov:
            kernel_cov[pc] += 1
            observed.append(pc)
            kernel_pcs.add(pc)
            continue
        if pc in firmware_cov:
            firmware_cov[pc] += 1
            observed.append(pc)
            firmware_pcs.add(pc)
            continue
        checks += 1
        if addr_in_filters(pc, filter_set.kernel, filter_set.kernel_starts):
            kernel_cov[pc] = 1
            state.kernel_found = True
            observed.append(pc)
            new_kernel.append(pc)
            kernel_pcs.add(pc)
            continue
        checks += 1
        if addr_in_filters(pc, filter_set.firmware, filter_set.firmware_starts):
            firmware_cov[pc] = 1
            state.firmware_found = True
            observed.append(pc)
            new_firmware.append(pc)
            firmware_pcs.add(pc)

    stats = FilterStats(
        membership_checks=checks,
        distinct_addresses=len(new_kernel) + len(new_firmware),
        filter_count=filter_set.filter_count,
        trace_length=length,
    )
    return ClassifyResult(
        observed=observed,
        stats=stats,
        new_kernel=new_kernel,
        new_firmware=new_firmware,
        kernel_pcs=kernel_pcs,
        firmware_pcs=firmware_pcs,
    )


# Synthetic ranges live far away from every scenario range so growing the
# filter count never changes classification results.
_SYNTHETIC_BASE = 0x0000400000000000
_SYNTHETIC_STRIDE = 0x1000


def synthesize_filters(
    count: int,
    seed: int,
    base: AddressFilterSet | None = None,
) -> AddressFilterSet:
    """Generate ``count`` disjoint synthetic kernel ranges plus ``base``.

    Deterministic in (count, seed).  The synthetic ranges are placed in an
    address region no target emits from, so coverage verdicts match the
    bare ``base`` set while the searchable filter population grows.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    rng = SplitMix64(seed)
    synthetic = []
    for i in range(count):
        slot = _SYNTHETIC_BASE + i * _SYNTHETIC_STRIDE
        lower = slot + rng.below(0x100)
        upper = lower + 0x10 + rng.below(0x100)
        synthetic.append(AddressFilter(name=f"synthetic_{i:05d}", lower=lower, upper=upper))
    kernel = list(base.kernel) if base else []
    firmware = list(base.firmware) if base else []
    return AddressFilterSet.build(kernel=kernel + synthetic, firmware=firmware)
