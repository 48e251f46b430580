"""Detector output ingestion: fixture loading, per-class thresholds, crop planning.

Layout fixture schema (JSON)::

    {"pages": [{"page_index": 0, "width": 612, "height": 792,
                "elements": [{"bbox": [x0, y0, x1, y1],
                              "category": "text", "score": 0.93}]}]}

Element ids are not stored in the file; they are assigned densely per page
in file order on load.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from docparse.domain import BBox, Category, LayoutElement, UnknownCategory, parse_category

DEFAULT_THRESHOLD = 0.5
DEFAULT_PADDING = 1.0


class SchemaError(ValueError):
    """A layout fixture violates the schema; names the field and page."""

    def __init__(self, field_name: str, page: int | None, detail: str = ""):
        self.field = field_name
        self.page = page
        where = f"page {page}" if page is not None else "document"
        msg = f"invalid {field_name!r} in {where}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


@dataclass(frozen=True)
class PageLayout:
    page_index: int
    page_width: float
    page_height: float
    elements: tuple[LayoutElement, ...] = ()

    def __post_init__(self) -> None:
        if not (self.page_width > 0 and self.page_height > 0):
            raise ValueError("page dimensions must be positive")


@dataclass(frozen=True)
class ThresholdConfig:
    thresholds: dict[Category, float] = field(default_factory=dict)
    default_threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self) -> None:
        for value in [*self.thresholds.values(), self.default_threshold]:
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"threshold {value} outside [0, 1]")

    def threshold_for(self, category: Category) -> float:
        return self.thresholds.get(category, self.default_threshold)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> ThresholdConfig:
        per_class = {parse_category(k): float(v) for k, v in data.get("per_class", {}).items()}
        return cls(per_class, float(data.get("default", DEFAULT_THRESHOLD)))


def _renumber(elements) -> tuple[LayoutElement, ...]:
    return tuple(replace(el, id=i) for i, el in enumerate(elements))


def _clamp_box(coords: list[float], width: float, height: float) -> list[float]:
    x0, y0, x1, y1 = coords
    return [min(max(x0, 0.0), width), min(max(y0, 0.0), height),
            min(max(x1, 0.0), width), min(max(y1, 0.0), height)]


def _parse_page(raw: Any, position: int) -> PageLayout:
    if not isinstance(raw, dict):
        raise SchemaError("pages", position, "page entry must be an object")
    page_index = raw.get("page_index")
    if not isinstance(page_index, int) or isinstance(page_index, bool) or page_index < 0:
        raise SchemaError("page_index", position, "expected a non-negative integer")
    dims = []
    for key in ("width", "height"):
        value = raw.get(key)
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
            raise SchemaError(key, page_index, "expected a positive number")
        dims.append(float(value))
    width, height = dims

    raw_elements = raw.get("elements", [])
    if not isinstance(raw_elements, list):
        raise SchemaError("elements", page_index, "expected a list")
    elements = []
    for i, item in enumerate(raw_elements):
        if not isinstance(item, dict):
            raise SchemaError("elements", page_index, f"element {i} must be an object")
        coords = item.get("bbox")
        if (not isinstance(coords, list) or len(coords) != 4
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in coords)
                or not all(math.isfinite(v) for v in coords)):
            raise SchemaError("bbox", page_index, f"element {i}: expected 4 finite numbers")
        if not (coords[0] < coords[2] and coords[1] < coords[3]):
            raise SchemaError("bbox", page_index, f"element {i}: degenerate box {coords}")
        clamped = _clamp_box([float(v) for v in coords], width, height)
        try:
            bbox = BBox(*clamped)
        except ValueError as exc:
            raise SchemaError("bbox", page_index, f"element {i}: {exc}") from None
        try:
            category = parse_category(item.get("category"))
        except UnknownCategory as exc:
            raise SchemaError("category", page_index, f"element {i}: {exc}") from None
        score = item.get("score")
        if isinstance(score, bool) or not isinstance(score, (int, float)) or not 0 <= score <= 1:
            raise SchemaError("score", page_index, f"element {i}: expected a number in [0, 1]")
        elements.append(LayoutElement(i, page_index, bbox, category, float(score)))
    return PageLayout(page_index, width, height, tuple(elements))


def parse_layout(data: Any) -> list[PageLayout]:
    """Validate an already-decoded layout fixture document."""
    if not isinstance(data, dict) or not isinstance(data.get("pages"), list):
        raise SchemaError("pages", None, "top level must be an object with a 'pages' list")
    pages = [_parse_page(raw, pos) for pos, raw in enumerate(data["pages"])]
    seen = set()
    for page in pages:
        if page.page_index in seen:
            raise SchemaError("page_index", page.page_index, "duplicate page")
        seen.add(page.page_index)
    return sorted(pages, key=lambda p: p.page_index)


def load_layout(path: str | Path) -> list[PageLayout]:
    """Read a layout fixture file.

    Raises:
        OSError: the file cannot be read.
        SchemaError: the content does not match the fixture schema.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError("json", None, str(exc)) from None
    return parse_layout(data)


def layout_to_dict(pages: list[PageLayout]) -> dict[str, Any]:
    return {
        "pages": [
            {
                "page_index": p.page_index,
                "width": p.page_width,
                "height": p.page_height,
                "elements": [
                    {"bbox": el.bbox.to_list(), "category": el.category.value, "score": el.score}
                    for el in p.elements
                ],
            }
            for p in pages
        ]
    }


def filter_proposals(layout: PageLayout, cfg: ThresholdConfig) -> PageLayout:
    """Keep elements whose score reaches their class threshold (inclusive)."""
    kept = [el for el in layout.elements if el.score >= cfg.threshold_for(el.category)]
    return replace(layout, elements=_renumber(kept))


def plan_crops(layout: PageLayout, padding: float = DEFAULT_PADDING) -> list[tuple[int, BBox]]:
    """Pad every element box and clamp it to the page rectangle.

    Figures get a crop too; the caller decides that they are saved as images
    rather than sent to the recognizer.
    """
    if padding < 0:
        raise ValueError("padding must be non-negative")
    crops = []
    for el in layout.elements:
        b = el.bbox
        crop = BBox(
            max(b.x0 - padding, 0.0),
            max(b.y0 - padding, 0.0),
            min(b.x1 + padding, layout.page_width),
            min(b.y1 + padding, layout.page_height),
        )
        crops.append((el.id, crop))
    return crops
