"""Element-level evaluation metrics and corpus aggregation."""

from docparse.metrics.bleu import bleu, tokenize_latex
from docparse.metrics.chart import ChartScore, chart_triples, rms_f1
from docparse.metrics.teds import teds
from docparse.metrics.text import levenshtein, normalized_edit_distance

__all__ = [
    "ChartScore",
    "bleu",
    "chart_triples",
    "levenshtein",
    "normalized_edit_distance",
    "rms_f1",
    "teds",
    "tokenize_latex",
]
