"""Deterministic 64-bit PRNG used everywhere replayability matters.

The generator is a splitmix64 stream.  It is intentionally implemented here
rather than delegated to ``random`` so the byte-level behaviour is pinned by
this module and stays stable across Python releases: re-running a campaign
with the same seed must reproduce the exact operator/offset/value sequence.
"""

from __future__ import annotations

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> tuple[int, int]:
    """Advance one splitmix64 step; returns (new_state, output)."""
    state = (state + _GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class SplitMix64:
    """Stateful splitmix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state, out = splitmix64(self.state)
        return out

    def below(self, bound: int) -> int:
        """Uniform-ish integer in [0, bound). bound must be >= 1."""
        if bound < 1:
            raise ValueError(f"bound must be >= 1, got {bound}")
        return self.next_u64() % bound

    def fork(self, salt: int) -> "SplitMix64":
        """Independent child stream; deterministic in (state, salt)."""
        return SplitMix64(self.next_u64() ^ ((salt * _GAMMA) & _MASK64))
