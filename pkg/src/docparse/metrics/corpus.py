"""Corpus evaluation over a JSON-lines manifest.

Each manifest line::

    {"id": "t-001", "task": "ocr|table|formula|chart", "tags": ["handwritten_cn"],
     "pred": "pred/t-001.txt", "gt": "gt/t-001.txt"}

Paths are relative to the manifest's directory.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from docparse.metrics.bleu import bleu
from docparse.metrics.chart import chart_triples, rms_f1
from docparse.metrics.teds import teds
from docparse.metrics.text import normalized_edit_distance
from docparse.otsl import grid_to_html, parse_otsl_text
from docparse.recognizer import RecognitionTask, classify_formula

REPORT_VERSION = "1"


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class EvalSample:
    id: str
    task: RecognitionTask
    tags: tuple[str, ...]
    prediction: str
    ground_truth: str


@dataclass
class SampleResult:
    id: str
    task: RecognitionTask
    tags: tuple[str, ...]
    metrics: dict[str, float] = field(default_factory=dict)
    error: str | None = None


def _as_table_html(text: str) -> str:
    text = text.strip()
    if text.startswith("<"):
        return text
    return grid_to_html(parse_otsl_text(text))


def _as_latex(text: str) -> str:
    text = text.strip()
    return classify_formula(text).latex if text else ""


def score_sample(task: RecognitionTask, pred: str, gt: str) -> dict[str, float]:
    """Task-appropriate metrics for one prediction/ground-truth pair."""
    if task is RecognitionTask.OCR:
        return {"edit_distance": normalized_edit_distance(pred.strip(), gt.strip())}
    if task is RecognitionTask.TABLE:
        p, g = _as_table_html(pred), _as_table_html(gt)
        return {"teds": teds(p, g), "teds_s": teds(p, g, structure_only=True)}
    if task is RecognitionTask.FORMULA:
        return {"bleu": bleu(_as_latex(pred), _as_latex(gt))}
    score = rms_f1(chart_triples(pred), chart_triples(gt))
    return {"rms_f1": score.f1, "rms_precision": score.precision, "rms_recall": score.recall}


def read_manifest(path: str | Path) -> list[dict[str, Any]]:
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    entries = []
    for n, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{n}: invalid JSON ({exc})") from None
        if not isinstance(entry, dict):
            raise ManifestError(f"{path}:{n}: expected an object")
        for key in ("id", "task", "pred", "gt"):
            if not isinstance(entry.get(key), str):
                raise ManifestError(f"{path}:{n}: missing or non-string {key!r}")
        try:
            entry["task"] = RecognitionTask(entry["task"])
        except ValueError:
            raise ManifestError(f"{path}:{n}: unknown task {entry['task']!r}") from None
        tags = entry.get("tags", [])
        if not isinstance(tags, list) or not all(isinstance(t, str) for t in tags):
            raise ManifestError(f"{path}:{n}: 'tags' must be a list of strings")
        entries.append(entry)
    if not entries:
        raise ManifestError(f"{path}: manifest has no samples")
    ids = [e["id"] for e in entries]
    if len(set(ids)) != len(ids):
        raise ManifestError(f"{path}: duplicate sample ids")
    return entries


def _evaluate_entry(entry: dict[str, Any], root: Path) -> SampleResult:
    result = SampleResult(entry["id"], entry["task"], tuple(entry.get("tags", [])))
    try:
        pred = (root / entry["pred"]).read_text(encoding="utf-8")
        gt = (root / entry["gt"]).read_text(encoding="utf-8")
        result.metrics = score_sample(entry["task"], pred, gt)
    except Exception as exc:
        result.error = f"{type(exc).__name__}: {exc}"
    return result


def _aggregate(results: list[SampleResult]) -> dict[str, Any]:
    by_task: dict[str, Any] = {}
    for task in RecognitionTask:
        mine = [r for r in results if r.task is task]
        if not mine:
            continue
        ok = [r for r in mine if r.error is None]
        names = sorted({k for r in ok for k in r.metrics})
        by_task[task.value] = {
            "count": len(ok),
            "errors": len(mine) - len(ok),
            "mean": {k: (sum(r.metrics[k] for r in ok) / len(ok)) for k in names},
        }
    return by_task


def build_report(results: list[SampleResult]) -> dict[str, Any]:
    results = sorted(results, key=lambda r: r.id)
    tags = sorted({t for r in results for t in r.tags})
    return {
        "version": REPORT_VERSION,
        "samples_total": len(results),
        "samples_errored": sum(1 for r in results if r.error is not None),
        "overall": _aggregate(results),
        "tags": {t: _aggregate([r for r in results if t in r.tags]) for t in tags},
        "samples": [
            {"id": r.id, "task": r.task.value, "tags": list(r.tags), "metrics": r.metrics}
            if r.error is None
            else {"id": r.id, "task": r.task.value, "tags": list(r.tags), "error": r.error}
            for r in results
        ],
    }


def evaluate_corpus(manifest: str | Path, workers: int = 4) -> dict[str, Any]:
    """Score every manifest sample and aggregate per task, overall and per tag.

    Samples that fail to load or score are reported with their error and left
    out of the means.
    """
    manifest = Path(manifest)
    entries = read_manifest(manifest)
    root = manifest.parent
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(lambda e: _evaluate_entry(e, root), entries))
    return build_report(results)


def report_to_json(report: dict[str, Any]) -> str:
    return json.dumps(report, indent=2, ensure_ascii=False) + "\n"
