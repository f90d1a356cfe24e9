"""Seeded havoc-style input mutation.

The operator suite is a small byte-level set: bit flip, random byte,
wrapping add/sub, interesting-constant overwrite, truncate, append.
Every draw comes from the caller's MutationRng, so a campaign seed fully
determines the mutation stream.  Changing operator order or rng draw
order is a compatibility break for recorded campaigns.
"""

from __future__ import annotations

from .rng import SplitMix64

MutationRng = SplitMix64

DEFAULT_MAX_LEN = 256

# Boundary bytes plus one 32-bit magic value (little-endian) that guards
# like `if (x == 0xdeadbeef)` make otherwise 1/2^32 comparisons reachable.
INTERESTING_CONSTANTS: tuple[bytes, ...] = (
    b"\x00",
    b"\xff",
    b"\x7f",
    b"\x80",
    b"\xef\xbe\xad\xde",
)

_N_OPERATORS = 6


def overwrite_constant(data: bytearray, offset: int, constant: bytes) -> None:
    """Write a constant at offset, clipped to the end of the buffer."""
    end = min(offset + len(constant), len(data))
    data[offset:end] = constant[: end - offset]


def _apply_operator(data: bytearray, op: int, rng: MutationRng, max_len: int) -> None:
    if op == 0:  # bit flip
        pos = rng.below(len(data))
        data[pos] ^= 1 << rng.below(8)
    elif op == 1:  # byte set to random
        pos = rng.below(len(data))
        data[pos] = rng.below(256)
    elif op == 2:  # wrapping add/sub of 1..16
        pos = rng.below(len(data))
        delta = 1 + rng.below(16)
        if rng.below(2):
            delta = -delta
        data[pos] = (data[pos] + delta) & 0xFF
    elif op == 3:  # interesting-constant overwrite
        constant = INTERESTING_CONSTANTS[rng.below(len(INTERESTING_CONSTANTS))]
        overwrite_constant(data, rng.below(len(data)), constant)
    elif op == 4:  # truncate >= 1 byte, never below length 1
        if len(data) > 1:
            cut = 1 + rng.below(len(data) - 1)
            del data[len(data) - cut :]
    elif op == 5:  # append 1..8 random bytes, capped at max_len
        for _ in range(1 + rng.below(8)):
            if len(data) >= max_len:
                break
            data.append(rng.below(256))


def mutate(data: bytes, rng: MutationRng, max_len: int = DEFAULT_MAX_LEN) -> bytes:
    """Apply 1-4 randomly chosen operators; output length stays in [1, max_len]."""
    if not data:
        raise ValueError("input must be at least 1 byte")
    out = bytearray(data)
    for _ in range(1 + rng.below(4)):
        _apply_operator(out, rng.below(_N_OPERATORS), rng, max_len)
    if len(out) > max_len:
        del out[max_len:]
    return bytes(out)
