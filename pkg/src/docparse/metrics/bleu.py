"""Sentence BLEU-4 over LaTeX tokens."""

from __future__ import annotations

import math
import re
from collections import Counter

_TOKEN_RE = re.compile(r"\\[A-Za-z]+|\S")
MAX_ORDER = 4


def tokenize_latex(s: str) -> list[str]:
    """Control words (``\\frac``) are one token; every other non-space char is one."""
    return _TOKEN_RE.findall(s)


def _ngrams(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu(pred: str, gt: str) -> float:
    """BLEU-4 with uniform weights and brevity penalty.

    Orders 2-4 use add-one smoothing, (matches + 1) / (total + 1); the unigram
    precision is left unsmoothed so a prediction sharing no token scores 0.
    Two empty strings score 1.
    """
    hyp, ref = tokenize_latex(pred), tokenize_latex(gt)
    if not hyp and not ref:
        return 1.0
    if not hyp or not ref:
        return 0.0
    log_sum = 0.0
    for n in range(1, MAX_ORDER + 1):
        hyp_counts, ref_counts = _ngrams(hyp, n), _ngrams(ref, n)
        matches = sum(min(c, ref_counts[g]) for g, c in hyp_counts.items())
        total = max(len(hyp) - n + 1, 0)
        if n == 1:
            if matches == 0:
                return 0.0
            precision = matches / total
        else:
            precision = (matches + 1) / (total + 1)
        log_sum += math.log(precision)
    c, r = len(hyp), len(ref)
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return min(1.0, bp * math.exp(log_sum / MAX_ORDER))
