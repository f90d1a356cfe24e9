"""Program-counter traces and the line-oriented trace-log format.

A trace log is one hex address per line: ``0x`` prefix, lowercase digits,
no zero padding, LF terminated.  The same format is produced by the
simulated target and consumed by the analysis pipeline, so encode/decode
must round-trip losslessly (order and duplicates preserved).
"""

from __future__ import annotations

from typing import IO, Iterable, Iterator

PC_MAX = 0xFFFFFFFFFFFFFFFF

_HEX_DIGITS = set("0123456789abcdefABCDEF")


class TraceParseError(ValueError):
    """Raised for a malformed or out-of-range trace-log line."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


def encode_trace(pcs: Iterable[int]) -> bytes:
    """Render a PC sequence as trace-log bytes; empty input yields b""."""
    return b"".join(b"0x%x\n" % pc for pc in pcs)


def _parse_line(line: str, line_number: int) -> int:
    text = line.strip()
    if text[:2] in ("0x", "0X"):
        digits = text[2:]
    else:
        digits = text
    if not digits or any(c not in _HEX_DIGITS for c in digits):
        raise TraceParseError(f"not a hex address: {text!r}", line_number)
    value = int(digits, 16)
    if value > PC_MAX:
        raise TraceParseError(f"address exceeds 64 bits: {text!r}", line_number)
    return value


def iter_trace(lines: Iterable[bytes | str]) -> Iterator[int]:
    """Stream-parse trace-log lines to PCs.  Blank lines are skipped."""
    for number, raw in enumerate(lines, start=1):
        line = raw.decode("ascii", "replace") if isinstance(raw, bytes) else raw
        if not line.strip():
            continue
        yield _parse_line(line, number)


def decode_trace(data: bytes | str) -> list[int]:
    """Parse a whole trace log; inverse of encode_trace."""
    return list(iter_trace(data.splitlines(keepends=True) if isinstance(data, str) else data.split(b"\n")))


def read_trace(stream: IO[bytes]) -> Iterator[int]:
    """Stream PCs from an open binary file without loading it whole."""
    return iter_trace(stream)
