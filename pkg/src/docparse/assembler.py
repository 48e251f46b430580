"""Aggregate recognized elements into Markdown and structured JSON."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Union

from docparse import SCHEMA_VERSION, __version__
from docparse.domain import BBox, Category, LayoutElement, parse_category
from docparse.otsl import grid_to_markdown, parse_otsl_text
from docparse.recognizer import (
    ChartTable,
    FormulaLatex,
    RecognizedContent,
    TableGrid,
    TextMd,
    content_to_dict,
)

_HEADER_FOOTER = (Category.HEADER, Category.FOOTER)


@dataclass(frozen=True)
class FigureRef:
    path: str


@dataclass(frozen=True)
class ErrorPlaceholder:
    message: str


ElementContent = Union[RecognizedContent, FigureRef, ErrorPlaceholder]


@dataclass(frozen=True)
class DocElement:
    order_index: int
    source: LayoutElement
    content: ElementContent


@dataclass(frozen=True)
class DocMetadata:
    source: str
    page_count: int
    tool_version: str = __version__
    schema_version: str = SCHEMA_VERSION


@dataclass(frozen=True)
class Document:
    pages: tuple[tuple[DocElement, ...], ...]
    metadata: DocMetadata
    # figure crops keyed by the relative path used in FigureRef; not serialized
    images: dict[str, bytes] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.metadata.page_count != len(self.pages):
            raise ValueError("metadata page_count does not match pages")
        for page in self.pages:
            if sorted(el.order_index for el in page) != list(range(len(page))):
                raise ValueError("order_index must be dense 0..n-1 within a page")


@dataclass(frozen=True)
class AssemblyOptions:
    include_headers_footers: bool = False
    image_dir: str = "images"
    formula_display_delimiters: str = "$$"

    def __post_init__(self) -> None:
        if not self.image_dir:
            raise ValueError("image_dir must be non-empty")
        if self.formula_display_delimiters != "$$":
            raise ValueError("display formulas are always delimited by $$")


def _block(el: DocElement) -> str:
    c = el.content
    if isinstance(c, TextMd):
        if el.source.category is Category.TITLE:
            return "# " + c.text
        return c.text
    if isinstance(c, FormulaLatex):
        if c.display:
            return f"$$\n{c.latex}\n$$"
        return f"\\({c.latex}\\)"
    if isinstance(c, TableGrid):
        return grid_to_markdown(c.grid)
    if isinstance(c, ChartTable):
        return c.markdown
    if isinstance(c, FigureRef):
        return f"![]({c.path})"
    return f"<!-- recognition failed: {c.message} -->"


def assemble_markdown(doc: Document, opts: AssemblyOptions | None = None) -> str:
    opts = opts or AssemblyOptions()
    blocks = []
    for page in doc.pages:
        for el in sorted(page, key=lambda e: e.order_index):
            if el.source.category in _HEADER_FOOTER and not opts.include_headers_footers:
                continue
            blocks.append(_block(el).strip("\n"))
    return "\n\n".join(blocks) + "\n"


def _content_dict(c: ElementContent) -> dict:
    if isinstance(c, FigureRef):
        return {"type": "figure", "value": c.path}
    if isinstance(c, ErrorPlaceholder):
        return {"type": "error", "value": c.message}
    return content_to_dict(c)


_FIXED = "\x00f2:"
_FIXED_RE = re.compile(r'"\\u0000f2:(-?\d+\.\d\d)"')


def assemble_json(doc: Document) -> str:
    """Deterministic JSON: sorted keys, coordinates with exactly two decimals."""
    pages = []
    for page in doc.pages:
        items = []
        for el in sorted(page, key=lambda e: e.order_index):
            src = el.source
            items.append({
                "order": el.order_index,
                "id": src.id,
                "page": src.page_index,
                "category": src.category.value,
                "bbox": [f"{_FIXED}{v:.2f}" for v in src.bbox.to_list()],
                "score": round(src.score, 4),
                "content": _content_dict(el.content),
            })
        pages.append(items)
    m = doc.metadata
    body = {
        "metadata": {
            "source": m.source,
            "page_count": m.page_count,
            "tool_version": m.tool_version,
            "schema_version": m.schema_version,
        },
        "pages": pages,
    }
    text = json.dumps(body, sort_keys=True, indent=2, ensure_ascii=False)
    return _FIXED_RE.sub(r"\1", text) + "\n"


def _content_from_dict(d: dict) -> ElementContent:
    kind = d["type"]
    if kind == "text":
        return TextMd(d["value"])
    if kind == "formula":
        return FormulaLatex(d["value"], bool(d["display"]))
    if kind == "table":
        return TableGrid(parse_otsl_text(d["value"]))
    if kind == "chart":
        return ChartTable(d["value"])
    if kind == "figure":
        return FigureRef(d["value"])
    if kind == "error":
        return ErrorPlaceholder(d["value"])
    raise ValueError(f"unknown content type {kind!r}")


def document_from_json(text: str) -> Document:
    """Inverse of assemble_json (figure image bytes are not restored)."""
    data = json.loads(text)
    pages = []
    for items in data["pages"]:
        page = []
        for it in items:
            src = LayoutElement(
                it["id"], it["page"], BBox.from_list(it["bbox"]),
                parse_category(it["category"]), float(it["score"]),
            )
            page.append(DocElement(it["order"], src, _content_from_dict(it["content"])))
        pages.append(tuple(page))
    m = data["metadata"]
    meta = DocMetadata(m["source"], m["page_count"], m["tool_version"], m["schema_version"])
    return Document(tuple(pages), meta)
