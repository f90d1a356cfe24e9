"""Coverage feedback structures: edge hashing, unified coverage, flow hash.

Two edge-hash flavours are provided for parity with the classic
instrumentation schemes (compile-time random block ids, and emulator-mode
block addresses folded by shift/XOR).  Campaign novelty itself is judged
from the classifier's found flags; the edge hasher is exposed for
map-based scheduling experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .trace import encode_trace

MASK64 = 0xFFFFFFFFFFFFFFFF

FNV64_OFFSET_BASIS = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3


class EdgeHasher:
    """Shared-memory style edge-transition counter.

    Index = cur_location XOR prev_location (masked to the map size), then
    prev_location becomes cur_location >> 1, which keeps transition
    direction distinguishable.
    """

    def __init__(self, map_size_bits: int = 16):
        self.map_size_bits = map_size_bits
        self.mask = (1 << map_size_bits) - 1
        self.prev_location = 0
        self.hit_map = [0] * (1 << map_size_bits)

    def reset(self) -> None:
        self.prev_location = 0
        self.hit_map = [0] * (1 << self.map_size_bits)

    def edge_step(self, cur_location: int) -> int:
        """Record one block execution; returns the edge index it hit."""
        index = (cur_location ^ self.prev_location) & self.mask
        self.hit_map[index] += 1
        self.prev_location = cur_location >> 1
        return index


def qemu_block_location(
    block_address: int,
    text_start: int,
    text_end: int,
    map_size_bits: int = 16,
) -> int | None:
    """Fold a block address into a map location, emulator style.

    Only addresses strictly inside (text_start, text_end) are recorded;
    the left shift is a plain 64-bit shift (overflow bits discarded)
    before reduction modulo the map size.
    """
    if not (block_address > text_start and block_address < text_end):
        return None
    cur = (block_address >> 4) ^ ((block_address << 8) & MASK64)
    return cur & ((1 << map_size_bits) - 1)


@dataclass
class UnifiedCoverage:
    """Union of covered PCs per component across all executions."""

    kernel_pcs: set[int] = field(default_factory=set)
    firmware_pcs: set[int] = field(default_factory=set)

    @property
    def total(self) -> int:
        return len(self.kernel_pcs) + len(self.firmware_pcs)


def merge_coverage(
    acc: UnifiedCoverage,
    exec_kernel: set[int],
    exec_firmware: set[int],
) -> UnifiedCoverage:
    """Fold one execution's per-component PC sets into the accumulator."""
    acc.kernel_pcs |= exec_kernel
    acc.firmware_pcs |= exec_firmware
    return acc


def fnv1a_64(data: bytes) -> int:
    h = FNV64_OFFSET_BASIS
    for b in data:
        h ^= b
        h = (h * FNV64_PRIME) & MASK64
    return h


def flow_hash(observed: list[int]) -> int:
    """Digest of the ordered, filtered PC list of one execution.

    Hashing the rendered trace keeps duplicates significant, so runs that
    differ only in loop iteration counts hash differently.
    """
    return fnv1a_64(encode_trace(observed))
