"""Pairwise precedence scoring and win-accumulation decoding of reading order."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from docparse.domain import LayoutElement, x_overlap_ratio

PRECEDES = 0.95
FOLLOWS = 0.05
COLUMN_OVERLAP_THRESHOLD = 0.5
_COMPLEMENT_TOL = 1e-9


class EmptyPage(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class InvalidRelationMatrix(ValueError):
    pass


@dataclass(frozen=True)
class RelationMatrix:
    """s[i][j] is the score that element i is read before element j."""

    s: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.s)
        for i, row in enumerate(self.s):
            if len(row) != n:
                raise InvalidRelationMatrix(f"row {i} has {len(row)} entries, expected {n}")
            for j, v in enumerate(row):
                if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                    raise InvalidRelationMatrix(f"s[{i}][{j}] = {v} outside [0, 1]")
            if row[i] != 0.5:
                raise InvalidRelationMatrix(f"diagonal s[{i}][{i}] must be 0.5")
        for i in range(n):
            for j in range(i + 1, n):
                if abs(self.s[i][j] + self.s[j][i] - 1.0) > _COMPLEMENT_TOL:
                    raise InvalidRelationMatrix(f"s[{i}][{j}] + s[{j}][{i}] != 1")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> RelationMatrix:
        return cls(tuple(tuple(float(v) for v in row) for row in rows))

    @property
    def n(self) -> int:
        return len(self.s)

    def to_dict(self) -> dict:
        return {"n": self.n, "s": [list(row) for row in self.s]}


def load_relation_matrix(path: str | Path) -> RelationMatrix:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict) or "s" not in data or "n" not in data:
        raise InvalidRelationMatrix("relation fixture needs 'n' and 's'")
    m = RelationMatrix.from_rows(data["s"])
    if m.n != data["n"]:
        raise InvalidRelationMatrix(f"'n' is {data['n']} but matrix is {m.n}x{m.n}")
    return m


@dataclass(frozen=True)
class OrderResult:
    permutation: tuple[int, ...]
    win_counts: tuple[int, ...]


def _column_groups(elements: Sequence[LayoutElement], threshold: float) -> list[list[int]]:
    # union-find over the "x-intervals overlap enough" relation
    parent = list(range(len(elements)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(elements)):
        for j in range(i + 1, len(elements)):
            if x_overlap_ratio(elements[i].bbox, elements[j].bbox) >= threshold:
                ri, rj = find(i), find(j)
                if ri != rj:
                    parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list[int]] = {}
    for i in range(len(elements)):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def geometric_order(
    elements: Sequence[LayoutElement], column_overlap_threshold: float = COLUMN_OVERLAP_THRESHOLD
) -> list[int]:
    """Column-major reading order: columns left to right, each top to bottom."""
    columns = _column_groups(elements, column_overlap_threshold)

    def within(i: int):
        el = elements[i]
        return (el.bbox.y0, el.bbox.x0, el.id)

    def column_key(col: list[int]):
        return (min(elements[i].bbox.x0 for i in col), min(within(i) for i in col))

    order = []
    for col in sorted(columns, key=column_key):
        order.extend(sorted(col, key=within))
    return order


def geometric_relation_scores(
    elements: Sequence[LayoutElement], column_overlap_threshold: float = COLUMN_OVERLAP_THRESHOLD
) -> RelationMatrix:
    """Model-free relation matrix encoding the column-major geometric order."""
    n = len(elements)
    if n == 0:
        raise EmptyPage("cannot score an empty page")
    rank = {idx: pos for pos, idx in enumerate(geometric_order(elements, column_overlap_threshold))}
    rows = [
        [0.5 if i == j else (PRECEDES if rank[i] < rank[j] else FOLLOWS) for j in range(n)]
        for i in range(n)
    ]
    return RelationMatrix.from_rows(rows)


def decode_reading_order(m: RelationMatrix, elements: Sequence[LayoutElement]) -> OrderResult:
    """Rank elements by pairwise wins (s[i][j] > 0.5).

    Ties fall back to top-to-bottom, left-to-right position and then id, so
    the result is a total order even for cyclic or tied matrices.
    """
    n = m.n
    if n != len(elements):
        raise DimensionMismatch(f"matrix is {n}x{n} but {len(elements)} elements given")
    wins = tuple(sum(1 for j in range(n) if j != i and m.s[i][j] > 0.5) for i in range(n))

    def key(i: int):
        b = elements[i].bbox
        return (-wins[i], b.y0, b.x0, elements[i].id)

    return OrderResult(tuple(sorted(range(n), key=key)), wins)


def is_consistent_tournament(m: RelationMatrix) -> bool:
    """True iff thresholding at 0.5 gives a strict total order."""
    n = m.n
    s = m.s
    for i in range(n):
        for j in range(n):
            if i != j and s[i][j] == 0.5:
                return False
    for i in range(n):
        for j in range(n):
            if i == j or s[i][j] <= 0.5:
                continue
            for k in range(n):
                if k != i and k != j and s[j][k] > 0.5 and s[i][k] <= 0.5:
                    return False
    return True
