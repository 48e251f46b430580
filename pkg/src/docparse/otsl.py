"""OTSL table token streams: parsing, validation and HTML/Markdown conversion.

Dialect: five cell tokens plus a row terminator, no header tokens.

    fcel{text}  cell anchor carrying text
    ecel        empty cell anchor
    lcel        merged with the cell to the left
    ucel        merged with the cell above
    xcel        merged with both (interior of a 2-D span)
    nl          end of row

The textual form separates tokens by single spaces. Inside ``fcel{...}`` the
characters ``}`` and ``\\`` are escaped with a backslash; any other
backslash is kept literally, so LaTeX inside cells survives unescaped input.
"""

from __future__ import annotations

import html
from dataclasses import dataclass
from html.parser import HTMLParser
from typing import Sequence, Union


class OtslError(ValueError):
    pass


class EmptyStream(OtslError):
    def __init__(self) -> None:
        super().__init__("empty OTSL stream")


class RaggedRows(OtslError):
    def __init__(self, row: int) -> None:
        self.row = row
        super().__init__(f"row {row} has a different length from row 0")


class IllegalMerge(OtslError):
    def __init__(self, row: int, col: int, token: str) -> None:
        self.row, self.col, self.token = row, col, token
        super().__init__(f"illegal {token} at row {row}, col {col}")


class OtslSyntaxError(OtslError):
    pass


class MalformedHtml(ValueError):
    pass


class OverlappingSpans(MalformedHtml):
    pass


@dataclass(frozen=True)
class FCel:
    text: str


@dataclass(frozen=True)
class ECel:
    pass


@dataclass(frozen=True)
class LCel:
    pass


@dataclass(frozen=True)
class UCel:
    pass


@dataclass(frozen=True)
class XCel:
    pass


@dataclass(frozen=True)
class NewLine:
    pass


CellToken = Union[FCel, ECel, LCel, UCel, XCel]
OtslToken = Union[FCel, ECel, LCel, UCel, XCel, NewLine]

_NAMES = {ECel: "ecel", LCel: "lcel", UCel: "ucel", XCel: "xcel", NewLine: "nl"}
_BY_NAME = {v: k for k, v in _NAMES.items()}


def token_name(tok: OtslToken) -> str:
    return "fcel" if isinstance(tok, FCel) else _NAMES[type(tok)]


@dataclass(frozen=True)
class OtslGrid:
    """Validated rectangular grid; ``origins[r][c]`` is the anchor owning (r, c)."""

    cells: tuple[tuple[CellToken, ...], ...]
    origins: tuple[tuple[tuple[int, int], ...], ...]

    @property
    def rows(self) -> int:
        return len(self.cells)

    @property
    def cols(self) -> int:
        return len(self.cells[0])

    def text_at(self, r: int, c: int) -> str:
        tok = self.cells[r][c]
        return tok.text if isinstance(tok, FCel) else ""

    def spans(self) -> dict[tuple[int, int], tuple[int, int]]:
        """Map each anchor to its (rowspan, colspan)."""
        extent: dict[tuple[int, int], tuple[int, int]] = {}
        for r, row in enumerate(self.origins):
            for c, anchor in enumerate(row):
                rs, cs = extent.get(anchor, (1, 1))
                extent[anchor] = (max(rs, r - anchor[0] + 1), max(cs, c - anchor[1] + 1))
        return extent

    def to_tokens(self) -> list[OtslToken]:
        out: list[OtslToken] = []
        for row in self.cells:
            out.extend(row)
            out.append(NewLine())
        return out


def _resolve_origins(cells: list[list[CellToken]]) -> list[list[tuple[int, int]]]:
    rows, cols = len(cells), len(cells[0])
    origins: list[list[tuple[int, int]]] = [[(-1, -1)] * cols for _ in range(rows)]
    for r in range(rows):
        for c in range(cols):
            tok = cells[r][c]
            if isinstance(tok, (FCel, ECel)):
                origins[r][c] = (r, c)
            elif isinstance(tok, LCel):
                if c == 0 or origins[r][c - 1][0] != r:
                    raise IllegalMerge(r, c, "lcel")
                origins[r][c] = origins[r][c - 1]
            elif isinstance(tok, UCel):
                if r == 0 or origins[r - 1][c][1] != c:
                    raise IllegalMerge(r, c, "ucel")
                origins[r][c] = origins[r - 1][c]
            else:
                if r == 0 or c == 0:
                    raise IllegalMerge(r, c, "xcel")
                up, left = origins[r - 1][c], origins[r][c - 1]
                if up != left or up[0] >= r or up[1] >= c:
                    raise IllegalMerge(r, c, "xcel")
                origins[r][c] = up

    # every region must be a solid rectangle
    members: dict[tuple[int, int], list[tuple[int, int]]] = {}
    for r in range(rows):
        for c in range(cols):
            members.setdefault(origins[r][c], []).append((r, c))
    for (ar, ac), cells_of in members.items():
        r_end = max(r for r, _ in cells_of)
        c_end = max(c for _, c in cells_of)
        for r in range(ar, r_end + 1):
            for c in range(ac, c_end + 1):
                if origins[r][c] != (ar, ac):
                    raise IllegalMerge(r, c, token_name(cells[r][c]))
    return origins


def _normalize_cell(tok: CellToken) -> CellToken:
    # fcel{} and ecel are indistinguishable once rendered; keep one form
    if isinstance(tok, FCel) and tok.text == "":
        return ECel()
    return tok


def parse_otsl(stream: Sequence[OtslToken]) -> OtslGrid:
    """Split a token stream into rows and validate merges.

    A trailing row without a final ``nl`` is accepted.
    """
    if not stream:
        raise EmptyStream()
    rows: list[list[CellToken]] = [[]]
    for tok in stream:
        if isinstance(tok, NewLine):
            rows.append([])
        else:
            rows[-1].append(_normalize_cell(tok))
    if not rows[-1]:
        rows.pop()
    if not any(rows):
        raise EmptyStream()
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width or width == 0:
            raise RaggedRows(i)
    origins = _resolve_origins(rows)
    return OtslGrid(tuple(tuple(r) for r in rows), tuple(tuple(r) for r in origins))


def tokenize_otsl(text: str) -> list[OtslToken]:
    """Parse the textual OTSL serialization into tokens."""
    tokens: list[OtslToken] = []
    i, n = 0, len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        if text.startswith("fcel{", i):
            i += 5
            buf = []
            while True:
                if i >= n:
                    raise OtslSyntaxError("unterminated fcel{...}")
                ch = text[i]
                if ch == "\\" and i + 1 < n and text[i + 1] in "}\\":
                    buf.append(text[i + 1])
                    i += 2
                elif ch == "}":
                    i += 1
                    break
                else:
                    buf.append(ch)
                    i += 1
            tokens.append(FCel("".join(buf)))
            continue
        j = i
        while j < n and not text[j].isspace():
            j += 1
        word = text[i:j]
        if word not in _BY_NAME:
            raise OtslSyntaxError(f"unknown token {word!r} at offset {i}")
        tokens.append(_BY_NAME[word]())
        i = j
    return tokens


def serialize_otsl(tokens: Sequence[OtslToken]) -> str:
    parts = []
    for tok in tokens:
        if isinstance(tok, FCel):
            escaped = tok.text.replace("\\", "\\\\").replace("}", "\\}")
            parts.append(f"fcel{{{escaped}}}")
        else:
            parts.append(_NAMES[type(tok)])
    return " ".join(parts)


def parse_otsl_text(text: str) -> OtslGrid:
    return parse_otsl(tokenize_otsl(text))


def grid_to_html(g: OtslGrid) -> str:
    spans = g.spans()
    out = ["<table>"]
    for r, row in enumerate(g.cells):
        out.append("<tr>")
        for c, tok in enumerate(row):
            if not isinstance(tok, (FCel, ECel)):
                continue
            rs, cs = spans[(r, c)]
            attrs = ""
            if rs > 1:
                attrs += f' rowspan="{rs}"'
            if cs > 1:
                attrs += f' colspan="{cs}"'
            out.append(f"<td{attrs}>{html.escape(g.text_at(r, c), quote=False)}</td>")
        out.append("</tr>")
    out.append("</table>")
    return "".join(out)


class _TableParser(HTMLParser):
    """Collects rows of (rowspan, colspan, text) from a single table."""

    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.rows: list[list[tuple[int, int, str]]] = []
        self.tables = 0
        self.depth = 0
        self.closed = False
        self.in_row = False
        self.cell: list | None = None

    def error(self, message: str) -> None:  # pragma: no cover - py<3.10 hook
        raise MalformedHtml(message)

    @staticmethod
    def _span(attrs, name: str) -> int:
        for key, value in attrs:
            if key == name:
                try:
                    span = int(value)
                except (TypeError, ValueError):
                    raise MalformedHtml(f"bad {name} {value!r}") from None
                if span < 1:
                    raise MalformedHtml(f"bad {name} {value!r}")
                return span
        return 1

    def handle_starttag(self, tag, attrs):
        if tag == "table":
            if self.tables or self.closed:
                raise MalformedHtml("expected exactly one table")
            self.tables = 1
            self.depth = 1
        elif self.depth == 0:
            if tag in ("tr", "td", "th", "thead", "tbody", "tfoot"):
                raise MalformedHtml(f"<{tag}> outside table")
        elif tag == "tr":
            if self.in_row:
                self._end_row()
            self.rows.append([])
            self.in_row = True
        elif tag in ("td", "th"):
            if not self.in_row:
                raise MalformedHtml(f"<{tag}> outside <tr>")
            if self.cell is not None:
                self._end_cell()
            self.cell = [self._span(attrs, "rowspan"), self._span(attrs, "colspan"), []]
        elif tag == "br" and self.cell is not None:
            self.cell[2].append("\n")

    def handle_endtag(self, tag):
        if tag == "table":
            if self.depth == 0:
                raise MalformedHtml("</table> without <table>")
            if self.cell is not None:
                self._end_cell()
            if self.in_row:
                self._end_row()
            self.depth = 0
            self.closed = True
        elif tag in ("td", "th"):
            if self.cell is None:
                raise MalformedHtml(f"</{tag}> without open cell")
            self._end_cell()
        elif tag == "tr":
            if not self.in_row:
                raise MalformedHtml("</tr> without <tr>")
            self._end_row()

    def handle_data(self, data):
        if self.cell is not None:
            self.cell[2].append(data)
        elif data.strip() and self.depth:
            raise MalformedHtml(f"text outside a cell: {data.strip()[:20]!r}")

    def _end_cell(self):
        rs, cs, parts = self.cell
        self.rows[-1].append((rs, cs, "".join(parts)))
        self.cell = None

    def _end_row(self):
        if self.cell is not None:
            self._end_cell()
        self.in_row = False


def html_to_grid(h: str) -> OtslGrid:
    """Expand an HTML table's row/col spans into an OTSL grid.

    ``th`` is treated as ``td``; ``thead``/``tbody``/``tfoot`` wrappers are
    ignored. Positions no cell covers become empty cells.
    """
    parser = _TableParser()
    parser.feed(h)
    parser.close()
    if not parser.closed:
        raise MalformedHtml("no complete <table> element")
    rows = parser.rows
    if not rows:
        raise MalformedHtml("table has no rows")
    n_rows = len(rows)
    occupied: dict[tuple[int, int], tuple[int, int]] = {}
    anchors: dict[tuple[int, int], str] = {}
    for r, row in enumerate(rows):
        c = 0
        for rs, cs, text in row:
            while (r, c) in occupied:
                c += 1
            if r + rs > n_rows:
                raise MalformedHtml(f"rowspan at row {r} runs past the last row")
            for dr in range(rs):
                for dc in range(cs):
                    pos = (r + dr, c + dc)
                    if pos in occupied:
                        raise OverlappingSpans(f"cell at row {r} overlaps {pos}")
                    occupied[pos] = (r, c)
            anchors[(r, c)] = text
            c += cs
    n_cols = max((c for _, c in occupied), default=-1) + 1
    if n_cols == 0:
        raise MalformedHtml("table has no cells")
    cells: list[list[CellToken]] = []
    for r in range(n_rows):
        row_tokens: list[CellToken] = []
        for c in range(n_cols):
            owner = occupied.get((r, c))
            if owner is None:
                row_tokens.append(ECel())
            elif owner == (r, c):
                text = anchors[owner]
                row_tokens.append(FCel(text) if text else ECel())
            elif owner[0] == r:
                row_tokens.append(LCel())
            elif owner[1] == c:
                row_tokens.append(UCel())
            else:
                row_tokens.append(XCel())
        cells.append(row_tokens)
    return parse_otsl([tok for row in cells for tok in (*row, NewLine())])


def _md_cell(text: str) -> str:
    return text.replace("|", "\\|").replace("\n", " ")


def grid_to_markdown(g: OtslGrid) -> str:
    """Pipe table; merged regions keep the anchor text and blank the rest."""
    lines = []
    for r in range(g.rows):
        cells = [_md_cell(g.text_at(r, c)) if g.origins[r][c] == (r, c) else "" for c in range(g.cols)]
        lines.append("| " + " | ".join(cells) + " |")
        if r == 0:
            lines.append("| " + " | ".join(["---"] * g.cols) + " |")
    return "\n".join(lines)
