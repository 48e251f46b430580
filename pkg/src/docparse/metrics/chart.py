"""Chart extraction scoring: (row, column, value) triples with one-to-one matching."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from docparse.metrics.text import normalized_edit_distance
from docparse.recognizer import MalformedChartTable, split_pipe_row, validate_pipe_table

Triple = tuple[str, str, str]


@dataclass(frozen=True)
class ChartScore:
    precision: float
    recall: float
    f1: float


def chart_triples(markdown_table: str) -> list[Triple]:
    """One (row header, column header, value) triple per body cell."""
    lines = validate_pipe_table(markdown_table)
    header = split_pipe_row(lines[0])
    col_headers = header[1:]
    if not col_headers:
        raise MalformedChartTable("chart table needs at least one value column")
    triples = []
    for line in lines[2:]:
        cells = split_pipe_row(line)
        row_header = cells[0]
        for k, col in enumerate(col_headers, start=1):
            value = cells[k] if k < len(cells) else ""
            triples.append((row_header, col, value))
    return triples


def parse_number(s: str) -> float | None:
    """Float value of a chart label after dropping '%', ',' and whitespace."""
    cleaned = s.strip().replace("%", "").replace(",", "").strip()
    try:
        value = float(cleaned)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def value_similarity(pred: str, gt: str) -> float:
    p, t = parse_number(pred), parse_number(gt)
    if p is not None and t is not None:
        if t == 0:
            return 1.0 if p == t else 0.0
        return 1.0 - min(1.0, abs(p - t) / abs(t))
    return 1.0 - normalized_edit_distance(pred, gt)


def triple_similarity(pred: Triple, gt: Triple) -> float:
    key_sim = 1.0 - normalized_edit_distance(pred[0] + pred[1], gt[0] + gt[1])
    return key_sim * value_similarity(pred[2], gt[2])


def similarity_matrix(pred: list[Triple], gt: list[Triple]) -> np.ndarray:
    return np.array([[triple_similarity(p, t) for t in gt] for p in pred], dtype=float).reshape(
        len(pred), len(gt)
    )


def matched_score(pred: list[Triple], gt: list[Triple]) -> float:
    """Total similarity of the best one-to-one matching."""
    if not pred or not gt:
        return 0.0
    sim = similarity_matrix(pred, gt)
    rows, cols = linear_sum_assignment(sim, maximize=True)
    return float(sim[rows, cols].sum())


def _unique(triples: list[Triple]) -> list[Triple]:
    return list(dict.fromkeys(triples))


def rms_f1(pred: list[Triple], gt: list[Triple]) -> ChartScore:
    """Precision, recall and F1 of the best one-to-one matching.

    Both sides are scored as sets: a repeated triple is counted once, so a
    duplicate can neither earn an extra match nor dilute the score.
    """
    pred, gt = _unique(pred), _unique(gt)
    if not pred and not gt:
        return ChartScore(1.0, 1.0, 1.0)
    if not pred or not gt:
        return ChartScore(0.0, 0.0, 0.0)
    total = matched_score(pred, gt)
    precision = total / len(pred)
    recall = total / len(gt)
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return ChartScore(precision, recall, f1)
