import io
import random

import pytest

from mtcfuzz.trace import TraceParseError, decode_trace, encode_trace, iter_trace, read_trace


def test_encode_single_pc():
    assert encode_trace([0xFFFFFFFF81D88E26]) == b"0xffffffff81d88e26\n"


def test_encode_empty():
    assert encode_trace([]) == b""


def test_encode_preserves_order_and_duplicates():
    assert encode_trace([0x10, 0x10, 0x20]) == b"0x10\n0x10\n0x20\n"


def test_encode_no_zero_padding():
    assert encode_trace([0x1]) == b"0x1\n"


def test_decode_round_trip_small():
    assert decode_trace(b"0x10\n0x20\n") == [0x10, 0x20]


def test_decode_known_address():
    assert decode_trace(b"0xffffffff81d88c20\n") == [0xFFFFFFFF81D88C20]


def test_decode_malformed_line_number():
    with pytest.raises(TraceParseError) as err:
        decode_trace(b"zz\n")
    assert err.value.line_number == 1
    with pytest.raises(TraceParseError) as err:
        decode_trace(b"0x10\n0x20\nzz\n")
    assert err.value.line_number == 3


def test_decode_out_of_range():
    with pytest.raises(TraceParseError):
        decode_trace(b"0x10000000000000000\n")  # 2^64


def test_decode_accepts_padding_case_and_bare_hex():
    assert decode_trace(b"0x0010\nFF\n0XAB\n") == [0x10, 0xFF, 0xAB]


def test_decode_skips_blank_lines():
    assert decode_trace(b"0x10\n\n0x20\n") == [0x10, 0x20]


def test_decode_rejects_negative():
    with pytest.raises(TraceParseError):
        decode_trace(b"-0x10\n")


def test_round_trip_random_traces():
    rng = random.Random(1234)
    for _ in range(200):
        trace = [rng.getrandbits(64) for _ in range(rng.randrange(0, 50))]
        assert decode_trace(encode_trace(trace)) == trace


def test_encoding_injective_on_random_pairs():
    rng = random.Random(99)
    seen = {}
    for _ in range(500):
        trace = tuple(rng.getrandbits(16) for _ in range(rng.randrange(0, 6)))
        enc = encode_trace(trace)
        if enc in seen:
            assert seen[enc] == trace
        seen[enc] = trace


def test_stream_parse_from_file_object():
    payload = encode_trace([0x1, 0x2, 0x3])
    assert list(read_trace(io.BytesIO(payload))) == [0x1, 0x2, 0x3]


def test_iter_trace_accepts_str_lines():
    assert list(iter_trace(["0x10\n", "0x20\n"])) == [0x10, 0x20]
