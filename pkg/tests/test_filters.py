import json
import random

import pytest

from mtcfuzz.filters import (
    AddressFilter,
    AddressFilterSet,
    CoverageState,
    FilterError,
    classify,
    addr_in_filters,
    filters_to_dict,
    load_filters,
    synthesize_filters,
)

EXAMPLE_JSON = b"""
{
  "address_filters": {
    "kernel": [
      {"name": "riscv_ext_d_validate",
       "lower": "0xffffffff80010764",
       "upper": "0xffffffff80010772"}
    ],
    "firmware": []
  }
}
"""


def make_set(kernel=(), firmware=()):
    return AddressFilterSet.build(
        kernel=[AddressFilter(f"k{i}", lo, hi) for i, (lo, hi) in enumerate(kernel)],
        firmware=[AddressFilter(f"f{i}", lo, hi) for i, (lo, hi) in enumerate(firmware)],
    )


# -- loading -----------------------------------------------------------------


def test_load_example_document():
    fs = load_filters(EXAMPLE_JSON)
    assert len(fs.kernel) == 1 and len(fs.firmware) == 0
    flt = fs.kernel[0]
    assert flt.name == "riscv_ext_d_validate"
    assert flt.lower == 0xFFFFFFFF80010764
    assert flt.upper == 0xFFFFFFFF80010772
    assert fs.kernel_starts == (flt.lower,)


def test_load_empty_components():
    fs = load_filters(b'{"address_filters": {"kernel": [], "firmware": []}}')
    assert fs.kernel == () and fs.firmware == ()


def test_load_missing_component_is_empty():
    fs = load_filters(b'{"address_filters": {"kernel": []}}')
    assert fs.firmware == ()


def test_load_sorts_by_lower_bound():
    doc = {
        "address_filters": {
            "kernel": [
                {"name": "b", "lower": "0x200", "upper": "0x2ff"},
                {"name": "a", "lower": "0x100", "upper": "0x1ff"},
                {"name": "c", "lower": "0x300", "upper": "0x3ff"},
            ],
            "firmware": [],
        }
    }
    fs = load_filters(json.dumps(doc))
    # sort oracle: ascending by lower bound
    expected = sorted([0x200, 0x100, 0x300])
    assert [f.lower for f in fs.kernel] == expected
    assert list(fs.kernel_starts) == expected


def test_load_rejects_inverted_bounds_naming_filter():
    doc = b'{"address_filters": {"kernel": [{"name": "bad", "lower": "0x20", "upper": "0x10"}]}}'
    with pytest.raises(FilterError, match="bad"):
        load_filters(doc)


def test_load_rejects_overlap():
    doc = {
        "address_filters": {
            "kernel": [
                {"name": "one", "lower": "0x100", "upper": "0x200"},
                {"name": "two", "lower": "0x200", "upper": "0x300"},
            ]
        }
    }
    with pytest.raises(FilterError, match="overlap"):
        load_filters(json.dumps(doc))


def test_load_rejects_malformed_hex():
    doc = b'{"address_filters": {"kernel": [{"name": "x", "lower": "zz", "upper": "0x10"}]}}'
    with pytest.raises(FilterError):
        load_filters(doc)


def test_load_rejects_bad_json():
    with pytest.raises(FilterError):
        load_filters(b"{nope")


def test_filters_round_trip_through_dict():
    fs = load_filters(EXAMPLE_JSON)
    again = load_filters(json.dumps(filters_to_dict(fs)))
    assert again == fs


# -- membership --------------------------------------------------------------


def test_membership_bounds_inclusive():
    fs = load_filters(EXAMPLE_JSON)
    assert addr_in_filters(0xFFFFFFFF80010764, fs.kernel, fs.kernel_starts)
    assert addr_in_filters(0xFFFFFFFF80010772, fs.kernel, fs.kernel_starts)
    assert not addr_in_filters(0xFFFFFFFF80010763, fs.kernel, fs.kernel_starts)
    assert not addr_in_filters(0xFFFFFFFF80010773, fs.kernel, fs.kernel_starts)


def test_membership_empty_filter_list():
    fs = make_set()
    assert not addr_in_filters(0x1234, fs.kernel, fs.kernel_starts)


def test_membership_matches_linear_scan_oracle():
    rng = random.Random(2024)
    # 1,000 disjoint ranges over a wide space
    ranges = []
    cursor = 0
    for _ in range(1000):
        cursor += rng.randrange(1, 5000)
        width = rng.randrange(0, 200)
        ranges.append((cursor, cursor + width))
        cursor += width + 1
    fs = make_set(kernel=ranges)
    for _ in range(10_000):
        pc = rng.randrange(0, cursor + 10_000)
        oracle = any(lo <= pc <= hi for lo, hi in ranges)
        assert addr_in_filters(pc, fs.kernel, fs.kernel_starts) == oracle


# -- classification ----------------------------------------------------------


def naive_classify(trace, filter_set, kernel_cov, firmware_cov):
    """Linear-scan reimplementation without the coverage-map fast path."""
    observed = []
    k_found = f_found = False
    for pc in trace:
        if any(f.lower <= pc <= f.upper for f in filter_set.kernel):
            if pc not in kernel_cov:
                kernel_cov[pc] = 0
                k_found = True
            kernel_cov[pc] += 1
            observed.append(pc)
        elif any(f.lower <= pc <= f.upper for f in filter_set.firmware):
            if pc not in firmware_cov:
                firmware_cov[pc] = 0
                f_found = True
            firmware_cov[pc] += 1
            observed.append(pc)
    return observed, k_found, f_found


def test_classify_repeated_pc_counts_twice():
    fs = make_set(kernel=[(0x100, 0x1FF)])
    state = CoverageState()
    res = classify([0x150, 0x150], fs, state)
    assert state.kernel_cov == {0x150: 2}
    assert state.kernel_found
    assert not state.firmware_found
    assert res.observed == [0x150, 0x150]
    assert res.new_kernel == [0x150]


def test_classify_empty_trace():
    fs = make_set(kernel=[(0x100, 0x1FF)])
    state = CoverageState()
    res = classify([], fs, state)
    assert state.kernel_cov == {} and state.firmware_cov == {}
    assert res.observed == []
    assert not state.kernel_found and not state.firmware_found


def test_classify_kernel_wins_over_firmware():
    # same range registered for both components: kernel is checked first
    fs = make_set(kernel=[(0x100, 0x1FF)], firmware=[(0x100, 0x1FF)])
    state = CoverageState()
    classify([0x120], fs, state)
    assert 0x120 in state.kernel_cov and state.firmware_cov == {}


def test_classify_found_flags_reflect_only_last_call():
    fs = make_set(kernel=[(0x100, 0x1FF)])
    state = CoverageState()
    classify([0x110], fs, state)
    assert state.kernel_found
    classify([0x110], fs, state)
    assert not state.kernel_found  # already known now


def test_classify_drops_unmatched_pcs():
    fs = make_set(kernel=[(0x100, 0x1FF)])
    state = CoverageState()
    res = classify([0x50, 0x110, 0x5000], fs, state)
    assert res.observed == [0x110]
    assert res.stats.trace_length == 3


def random_instance(rng):
    ranges = []
    cursor = rng.randrange(0, 50)
    for _ in range(rng.randrange(0, 12)):
        cursor += rng.randrange(1, 40)
        width = rng.randrange(0, 30)
        ranges.append((cursor, cursor + width))
        cursor += width + 1
    split = rng.randrange(0, len(ranges) + 1)
    fs = make_set(kernel=ranges[:split], firmware=ranges[split:])
    trace = [rng.randrange(0, cursor + 50) for _ in range(rng.randrange(0, 120))]
    return fs, trace


@pytest.mark.parametrize("master_seed", [1, 2, 3])
def test_classify_equals_naive_oracle(master_seed):
    rng = random.Random(master_seed)
    for _ in range(200):
        fs, trace = random_instance(rng)
        state = CoverageState()
        k_oracle, f_oracle = {}, {}
        # several consecutive calls against persistent state
        for _ in range(3):
            res = classify(trace, fs, state)
            obs, k_found, f_found = naive_classify(trace, fs, k_oracle, f_oracle)
            assert res.observed == obs
            assert state.kernel_cov == k_oracle
            assert state.firmware_cov == f_oracle
            assert state.kernel_found == k_found
            assert state.firmware_found == f_found


def test_membership_checks_zero_for_known_trace():
    fs = make_set(kernel=[(0x100, 0x1FF)])
    state = CoverageState()
    classify([0x110, 0x111], fs, state)
    res = classify([0x110, 0x111, 0x110], fs, state)
    assert res.stats.membership_checks == 0


def test_membership_checks_bounded_by_first_sightings():
    rng = random.Random(7)
    for _ in range(100):
        fs, trace = random_instance(rng)
        state = CoverageState()
        res = classify(trace, fs, state)
        first_sightings = 0
        seen = set()
        for pc in trace:
            if pc not in seen:
                first_sightings += 1
            matched = any(f.lower <= pc <= f.upper for f in fs.kernel) or any(
                f.lower <= pc <= f.upper for f in fs.firmware
            )
            if matched:
                seen.add(pc)
        assert res.stats.membership_checks <= 2 * first_sightings


def test_count_sum_equals_retained_pcs():
    rng = random.Random(11)
    fs, _ = random_instance(rng)
    state = CoverageState()
    retained = 0
    for _ in range(20):
        trace = [rng.randrange(0, 600) for _ in range(rng.randrange(0, 80))]
        res = classify(trace, fs, state)
        retained += len(res.observed)
    assert sum(state.kernel_cov.values()) + sum(state.firmware_cov.values()) == retained


# -- synthesized filter sets -------------------------------------------------


def test_synthesize_includes_base_and_count():
    base = make_set(kernel=[(0x100, 0x1FF)], firmware=[(0x5000, 0x5FFF)])
    fs = synthesize_filters(2, seed=9, base=base)
    assert len(fs.kernel) == 3  # 1 base + 2 synthetic
    assert len(fs.firmware) == 1
    names = {f.name for f in fs.kernel}
    assert "k0" in names


def test_synthesize_large_population():
    fs = synthesize_filters(32768, seed=1)
    assert len(fs.kernel) == 32768
    assert list(fs.kernel_starts) == sorted(fs.kernel_starts)


def test_synthesize_deterministic():
    assert synthesize_filters(64, seed=5) == synthesize_filters(64, seed=5)
    assert synthesize_filters(64, seed=5) != synthesize_filters(64, seed=6)


def test_synthesize_rejects_zero():
    with pytest.raises(ValueError):
        synthesize_filters(0, seed=1)


def test_membership_check_count_independent_of_population():
    # fixed corpus of traces replayed against growing filter populations
    rng = random.Random(31)
    base = make_set(kernel=[(0x100, 0x1FF)], firmware=[(0x5000, 0x5FFF)])
    corpus = [
        [rng.choice([0x120, 0x150, 0x5100, 0x9999, 0xABCDEF]) for _ in range(30)]
        for _ in range(20)
    ]
    totals = []
    for exponent in range(1, 16):
        fs = synthesize_filters(2**exponent, seed=1, base=base)
        state = CoverageState()
        total = 0
        for trace in corpus:
            total += classify(trace, fs, state).stats.membership_checks
        totals.append(total)
    assert len(set(totals)) == 1
