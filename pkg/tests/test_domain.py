import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from docparse.domain import BBox, Category, LayoutElement, UnknownCategory, iou, parse_category, x_overlap_ratio


@st.composite
def boxes(draw):
    x0 = draw(st.floats(0, 500, allow_nan=False))
    y0 = draw(st.floats(0, 500, allow_nan=False))
    w = draw(st.floats(0.01, 300, allow_nan=False))
    h = draw(st.floats(0.01, 300, allow_nan=False))
    return BBox(x0, y0, x0 + w, y0 + h)


def test_parse_category_lookup():
    assert parse_category("table") is Category.TABLE
    assert parse_category("formula") is Category.FORMULA


def test_parse_category_rejects_misspelling():
    with pytest.raises(UnknownCategory):
        parse_category("tabel")
    with pytest.raises(UnknownCategory):
        parse_category("Table")


@pytest.mark.parametrize("cat", list(Category))
def test_category_round_trip(cat):
    assert parse_category(str(cat)) is cat


def test_iou_examples():
    unit = BBox(0, 0, 1, 1)
    assert iou(unit, BBox(0, 0, 1, 1)) == 1.0
    assert iou(BBox(0, 0, 10, 10), BBox(20, 20, 30, 30)) == 0.0
    # intersection 5x10 = 50, union 100 + 100 - 50 = 150
    assert iou(BBox(0, 0, 10, 10), BBox(5, 0, 15, 10)) == pytest.approx(50 / 150)


def test_x_overlap_examples():
    assert x_overlap_ratio(BBox(0, 0, 10, 5), BBox(0, 9, 10, 20)) == 1.0
    assert x_overlap_ratio(BBox(0, 0, 10, 5), BBox(11, 0, 20, 5)) == 0.0
    assert x_overlap_ratio(BBox(0, 0, 10, 5), BBox(5, 0, 25, 5)) == 0.5


@given(boxes(), boxes())
def test_iou_symmetric_and_bounded(a, b):
    assert iou(a, b) == iou(b, a)
    assert 0.0 <= iou(a, b) <= 1.0


@given(boxes())
def test_iou_self_is_exactly_one(a):
    assert iou(a, BBox(a.x0, a.y0, a.x1, a.y1)) == 1.0


@pytest.mark.parametrize(
    "coords",
    [(5, 0, 5, 10), (0, 5, 10, 5), (10, 0, 5, 10), (-1, 0, 5, 5), (0, 0, math.inf, 5), (0, 0, math.nan, 5)],
)
def test_degenerate_boxes_rejected(coords):
    with pytest.raises(ValueError):
        BBox(*coords)


def test_score_range_enforced():
    with pytest.raises(ValueError):
        LayoutElement(0, 0, BBox(0, 0, 1, 1), Category.TEXT, 1.5)
