import random

from mtcfuzz.coverage import (
    FNV64_OFFSET_BASIS,
    EdgeHasher,
    UnifiedCoverage,
    flow_hash,
    merge_coverage,
    qemu_block_location,
)
from mtcfuzz.trace import encode_trace


# -- edge hashing ------------------------------------------------------------


def test_edge_step_worked_example():
    h = EdgeHasher()
    h.prev_location = 0x1000
    assert h.edge_step(0x4000) == 0x5000
    assert h.prev_location == 0x2000
    assert h.edge_step(0x3000) == 0x1000
    assert h.prev_location == 0x1800
    # reverse direction: 0x4000 ^ 0x1800
    assert h.edge_step(0x4000) == 0x5800


def test_edge_step_self_xor_is_zero():
    h = EdgeHasher()
    h.prev_location = 0x1234
    assert h.edge_step(0x1234) == 0


def test_edge_direction_sensitivity():
    forward = EdgeHasher()
    forward.prev_location = 0x2000  # i.e. after visiting 0x4000
    idx_ij = forward.edge_step(0x3000)
    backward = EdgeHasher()
    backward.prev_location = 0x1800  # i.e. after visiting 0x3000
    idx_ji = backward.edge_step(0x4000)
    assert idx_ij == 0x1000 and idx_ji == 0x5800
    assert idx_ij != idx_ji


def test_edge_step_updates_hit_map():
    h = EdgeHasher()
    h.edge_step(0x10)
    h.edge_step(0x10)
    assert h.hit_map[0x10] == 1  # 0x10 ^ 0
    assert h.hit_map[0x10 ^ 0x08] == 1


def test_edge_replay_reproduces_hit_map():
    rng = random.Random(3)
    locations = [rng.randrange(0, 1 << 16) for _ in range(500)]
    a, b = EdgeHasher(), EdgeHasher()
    for loc in locations:
        a.edge_step(loc)
    for loc in locations:
        b.edge_step(loc)
    assert a.hit_map == b.hit_map and a.prev_location == b.prev_location


def test_edge_index_masked_to_map():
    h = EdgeHasher(map_size_bits=8)
    h.prev_location = 0
    assert h.edge_step(0x1FF) == 0xFF


# -- emulator-mode block folding ----------------------------------------------


def test_block_location_strict_bounds():
    assert qemu_block_location(0x1000, 0x1000, 0x2000) is None
    assert qemu_block_location(0x2000, 0x1000, 0x2000) is None
    assert qemu_block_location(0x0500, 0x1000, 0x2000) is None


def test_block_location_formula():
    # (0x1000 >> 4) ^ (0x1000 << 8) = 0x100 ^ 0x100000 -> masked 0x0100
    assert qemu_block_location(0x1000, 0x0, 0x10000) == 0x0100


def test_block_location_matches_reference_formula():
    rng = random.Random(17)
    mask64 = (1 << 64) - 1
    for _ in range(2000):
        addr = rng.getrandbits(64)
        got = qemu_block_location(addr, 0x0, 1 << 64)
        if addr == 0:
            assert got is None
            continue
        expect = ((addr >> 4) ^ ((addr << 8) & mask64)) & 0xFFFF
        assert got == expect


# -- unified coverage ---------------------------------------------------------


def test_merge_basic():
    acc = UnifiedCoverage()
    merge_coverage(acc, {0xA}, {0xB})
    assert acc.kernel_pcs == {0xA} and acc.firmware_pcs == {0xB}
    assert acc.total == 2


def test_merge_idempotent():
    acc = UnifiedCoverage()
    merge_coverage(acc, {1, 2}, {3})
    snapshot = (set(acc.kernel_pcs), set(acc.firmware_pcs))
    merge_coverage(acc, {1, 2}, {3})
    assert (acc.kernel_pcs, acc.firmware_pcs) == snapshot


def test_merge_sequence_equals_one_shot_union():
    rng = random.Random(5)
    batches = [
        ({rng.randrange(100) for _ in range(5)}, {rng.randrange(100, 200) for _ in range(5)})
        for _ in range(50)
    ]
    acc = UnifiedCoverage()
    for k, f in batches:
        merge_coverage(acc, k, f)
    assert acc.kernel_pcs == set().union(*(k for k, _ in batches))
    assert acc.firmware_pcs == set().union(*(f for _, f in batches))


def test_merge_order_independent():
    rng = random.Random(6)
    batches = [({rng.randrange(50)}, {rng.randrange(50, 99)}) for _ in range(20)]
    a, b = UnifiedCoverage(), UnifiedCoverage()
    for k, f in batches:
        merge_coverage(a, k, f)
    for k, f in reversed(batches):
        merge_coverage(b, k, f)
    assert a == b


# -- flow hash ----------------------------------------------------------------


def reference_fnv1a_64(data: bytes) -> int:
    value = 0xCBF29CE484222325
    for byte in data:
        value = ((value ^ byte) * 0x100000001B3) % (1 << 64)
    return value


def test_flow_hash_empty_is_offset_basis():
    assert flow_hash([]) == 0xCBF29CE484222325 == FNV64_OFFSET_BASIS


def test_flow_hash_loop_count_sensitive():
    assert flow_hash([0x10]) != flow_hash([0x10, 0x10])


def test_flow_hash_matches_reference():
    assert flow_hash([0x10, 0x20]) == reference_fnv1a_64(b"0x10\n0x20\n")


def test_flow_hash_equality_iff_encoding_equality():
    rng = random.Random(21)
    for _ in range(500):
        a = [rng.randrange(4) for _ in range(rng.randrange(0, 6))]
        b = [rng.randrange(4) for _ in range(rng.randrange(0, 6))]
        same_enc = encode_trace(a) == encode_trace(b)
        assert (flow_hash(a) == flow_hash(b)) == same_enc
