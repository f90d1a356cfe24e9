"""Coverage symbolization and the two-run HTML comparison report.

Covered PCs are resolved to source lines through a TSV symbol table
(address, function, path:line per line - the batch output shape of an
addr2line-style resolver).  Lines are colored by which run reached them:
green for both, blue for the multi run only, orange for the single run
only.  Coverage is block-granular, so the line mapping is approximate;
the report says so in a banner instead of pretending otherwise.
"""

from __future__ import annotations

import html
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .coverage import fnv1a_64
from .sim import ScenarioLayout
from .trace import PC_MAX

log = logging.getLogger(__name__)

COLOR_BOTH = "green"
COLOR_MULTI_ONLY = "blue"
COLOR_SINGLE_ONLY = "orange"


class SymbolTableError(ValueError):
    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass
class SymbolEntry:
    function: str
    file: str
    line: int


@dataclass
class SymbolTable:
    entries: dict[int, SymbolEntry] = field(default_factory=dict)

    def resolve(self, pc: int) -> SymbolEntry | None:
        return self.entries.get(pc)


def load_symbol_table(data: bytes | str) -> SymbolTable:
    """Parse TSV lines of `0xADDR<TAB>function<TAB>path:line`."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    table = SymbolTable()
    for number, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 3:
            raise SymbolTableError(f"expected 3 tab-separated fields, got {len(parts)}", number)
        addr_text, function, location = parts
        try:
            pc = int(addr_text, 16)
        except ValueError:
            raise SymbolTableError(f"bad address {addr_text!r}", number) from None
        if not (0 <= pc <= PC_MAX):
            raise SymbolTableError(f"address out of range {addr_text!r}", number)
        path, sep, line_text = location.rpartition(":")
        if not sep or not line_text.isdigit():
            raise SymbolTableError(f"bad location {location!r}", number)
        if pc in table.entries:
            log.warning("duplicate symbol for 0x%x at line %d; last wins", pc, number)
        table.entries[pc] = SymbolEntry(function=function, file=path, line=int(line_text))
    return table


def symbols_from_layout(layout: ScenarioLayout) -> str:
    """Render a scenario layout as a symbol TSV (one pseudo-source file
    per component), so simulated runs can be reported like real ones."""
    lines = []
    for index, (label, pc) in enumerate(sorted(layout.branch_pcs.items(), key=lambda kv: kv[1])):
        component = "firmware" if label.startswith("fw_") else "kernel"
        lines.append(f"0x{pc:x}\t{label}\tsim/{component}.c:{10 + 2 * index}")
    return "\n".join(lines) + "\n"


@dataclass
class LineStats:
    multi_count: int = 0
    single_count: int = 0

    @property
    def color(self) -> str | None:
        return color_for(self.multi_count > 0, self.single_count > 0)


def color_for(multi_hit: bool, single_hit: bool) -> str | None:
    if multi_hit and single_hit:
        return COLOR_BOTH
    if multi_hit:
        return COLOR_MULTI_ONLY
    if single_hit:
        return COLOR_SINGLE_ONLY
    return None


@dataclass
class LineCoverage:
    """Per (file, line) execution counts plus the unresolved-PC bucket."""

    lines: dict[tuple[str, int], LineStats] = field(default_factory=dict)
    unresolved: dict[int, tuple[int, int]] = field(default_factory=dict)

    def files(self) -> list[str]:
        return sorted({file for file, _ in self.lines})


def aggregate_lines(
    multi_cov: dict[int, int],
    single_cov: dict[int, int],
    symbols: SymbolTable,
) -> LineCoverage:
    """Sum per-PC counts onto source lines; unknown PCs go to the
    unresolved bucket so nothing is silently dropped."""
    agg = LineCoverage()
    for pc in sorted(set(multi_cov) | set(single_cov)):
        multi_n = multi_cov.get(pc, 0)
        single_n = single_cov.get(pc, 0)
        entry = symbols.resolve(pc)
        if entry is None:
            agg.unresolved[pc] = (multi_n, single_n)
            continue
        stats = agg.lines.setdefault((entry.file, entry.line), LineStats())
        stats.multi_count += multi_n
        stats.single_count += single_n
    return agg


_PAGE_CSS = """\
body { font-family: monospace; margin: 1.5em; }
h1 { font-size: 1.2em; }
table { border-collapse: collapse; }
td { padding: 0 0.6em; white-space: pre; }
td.num { text-align: right; color: #888; }
tr.green { background: #c8eec8; }
tr.blue { background: #bcd4f5; }
tr.orange { background: #f5d7a8; }
.legend span { padding: 0.1em 0.6em; margin-right: 0.6em; }
.legend .green { background: #c8eec8; }
.legend .blue { background: #bcd4f5; }
.legend .orange { background: #f5d7a8; }
.note { color: #555; font-size: 0.9em; margin: 0.8em 0; }
"""

_LEGEND = (
    '<div class="legend">'
    '<span class="green">executed by both runs</span>'
    '<span class="blue">executed only by the multi run</span>'
    '<span class="orange">executed only by the single run</span>'
    "</div>"
)

_GRANULARITY_NOTE = (
    '<p class="note">Coverage is recorded per basic block, so line '
    "attribution is approximate rather than strictly one-to-one.</p>"
)


def _page(title: str, body: str) -> str:
    return (
        "<!DOCTYPE html>\n"
        '<html><head><meta charset="utf-8">'
        f"<title>{html.escape(title)}</title>"
        f"<style>\n{_PAGE_CSS}</style></head>\n"
        f"<body><h1>{html.escape(title)}</h1>\n"
        f"{_LEGEND}\n{_GRANULARITY_NOTE}\n{body}</body></html>\n"
    )


def _file_slug(path: str) -> str:
    safe = "".join(c if c.isalnum() or c in "._-" else "_" for c in path)
    return f"{safe}-{fnv1a_64(path.encode()) & 0xFFFF:04x}.html"


def _render_file_page(
    file: str, rows: dict[int, LineStats], source_root: Path
) -> str:
    source_path = source_root / file
    parts = ["<table>"]
    parts.append(
        "<tr><td class=num>line</td><td class=num>multi</td>"
        "<td class=num>single</td><td>source</td></tr>"
    )

    def row(line_no: int, text: str) -> str:
        stats = rows.get(line_no)
        klass = f' class="{stats.color}"' if stats and stats.color else ""
        multi = str(stats.multi_count) if stats else ""
        single = str(stats.single_count) if stats else ""
        return (
            f"<tr{klass}><td class=num>{line_no}</td><td class=num>{multi}</td>"
            f"<td class=num>{single}</td><td>{html.escape(text)}</td></tr>"
        )

    if source_path.is_file():
        source_lines = source_path.read_text(errors="replace").splitlines()
        for line_no, text in enumerate(source_lines, start=1):
            parts.append(row(line_no, text))
        # covered lines beyond the end of the file still get rows
        for line_no in sorted(n for n in rows if n > len(source_lines)):
            parts.append(row(line_no, "(beyond end of file)"))
    else:
        for line_no in sorted(rows):
            parts.append(row(line_no, "(source unavailable)"))
    parts.append("</table>")
    return _page(file, "\n".join(parts))


def render_html(
    line_coverage: LineCoverage, source_root: Path, out_dir: Path
) -> list[Path]:
    """Write the index plus one page per source file; returns written paths.

    Output is deterministic for a fixed input.  Files missing under
    source_root are rendered as address-only listings; an unreadable
    source root is an error.
    """
    source_root = Path(source_root)
    if not source_root.is_dir():
        raise FileNotFoundError(f"source root is not a directory: {source_root}")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    written = []
    index_rows = ["<table><tr><td>file</td><td class=num>covered lines</td></tr>"]
    for file in line_coverage.files():
        rows = {
            line: stats
            for (f, line), stats in line_coverage.lines.items()
            if f == file
        }
        slug = _file_slug(file)
        page_path = out_dir / slug
        page_path.write_text(_render_file_page(file, rows, source_root))
        written.append(page_path)
        index_rows.append(
            f'<tr><td><a href="{slug}">{html.escape(file)}</a></td>'
            f"<td class=num>{len(rows)}</td></tr>"
        )
    index_rows.append("</table>")

    if line_coverage.unresolved:
        index_rows.append("<h2>Unresolved addresses</h2>")
        index_rows.append(
            "<table><tr><td>address</td><td class=num>multi</td>"
            "<td class=num>single</td></tr>"
        )
        for pc, (multi_n, single_n) in sorted(line_coverage.unresolved.items()):
            index_rows.append(
                f"<tr><td>0x{pc:x}</td><td class=num>{multi_n}</td>"
                f"<td class=num>{single_n}</td></tr>"
            )
        index_rows.append("</table>")

    index_path = out_dir / "index.html"
    index_path.write_text(_page("Coverage comparison", "\n".join(index_rows)))
    written.append(index_path)
    return written
