"""Geometric and categorical value types shared across the package."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class UnknownCategory(ValueError):
    """Raised when a category name is not one of the canonical strings."""


class Category(str, Enum):
    TEXT = "text"
    TITLE = "title"
    TABLE = "table"
    FORMULA = "formula"
    CHART = "chart"
    FIGURE = "figure"
    HEADER = "header"
    FOOTER = "footer"
    FIGURE_CAPTION = "figure_caption"
    TABLE_CAPTION = "table_caption"
    FOOTNOTE = "footnote"

    def __str__(self) -> str:
        return self.value


def parse_category(name: str) -> Category:
    """Map a canonical lowercase name to its Category member."""
    try:
        return Category(name)
    except ValueError:
        raise UnknownCategory(f"unknown category {name!r}") from None


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box in page pixels, origin at the top-left corner."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self) -> None:
        coords = (self.x0, self.y0, self.x1, self.y1)
        if not all(math.isfinite(v) for v in coords):
            raise ValueError(f"non-finite bbox coordinate in {coords}")
        if min(coords) < 0:
            raise ValueError(f"negative bbox coordinate in {coords}")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate bbox {coords}")

    @classmethod
    def from_list(cls, coords) -> BBox:
        if len(coords) != 4:
            raise ValueError(f"bbox needs 4 coordinates, got {len(coords)}")
        return cls(*(float(v) for v in coords))

    def to_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height


@dataclass(frozen=True)
class LayoutElement:
    id: int
    page_index: int
    bbox: BBox
    category: Category
    score: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union; 0 for disjoint boxes."""
    iw = min(a.x1, b.x1) - max(a.x0, b.x0)
    ih = min(a.y1, b.y1) - max(a.y0, b.y0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    if a == b:
        return 1.0
    return inter / (a.area + b.area - inter)


def x_overlap_ratio(a: BBox, b: BBox) -> float:
    """Length of the shared x-interval over the shorter of the two widths."""
    overlap = min(a.x1, b.x1) - max(a.x0, b.x0)
    if overlap <= 0:
        return 0.0
    return overlap / min(a.width, b.width)
