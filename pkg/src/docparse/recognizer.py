"""Recognition requests, the HTTP batch client, and response parsing.

Wire protocol (HTTP POST, JSON)::

    request:  {"batch": [{"id": 7, "task": "table", "prompt_id": "table_otsl",
                          "image_b64": "..."}]}
    response: {"results": [{"id": 7, "text": "fcel{A} nl"} | {"id": 7, "error": "..."}]}
"""

from __future__ import annotations

import base64
import logging
import os
import time
from dataclasses import dataclass
from enum import Enum
from typing import Union

import requests

from docparse.domain import Category, LayoutElement
from docparse.otsl import OtslError, OtslGrid, grid_to_html, parse_otsl_text, serialize_otsl

log = logging.getLogger(__name__)


class RecognitionTask(str, Enum):
    OCR = "ocr"
    TABLE = "table"
    FORMULA = "formula"
    CHART = "chart"


PROMPTS = {
    RecognitionTask.OCR: "ocr",
    RecognitionTask.TABLE: "table_otsl",
    RecognitionTask.FORMULA: "formula_latex",
    RecognitionTask.CHART: "chart_markdown",
}

_TASK_BY_CATEGORY = {
    Category.TABLE: RecognitionTask.TABLE,
    Category.FORMULA: RecognitionTask.FORMULA,
    Category.CHART: RecognitionTask.CHART,
}


class RecognizerError(Exception):
    pass


class NotRecognizable(RecognizerError):
    pass


class EmptyResponse(RecognizerError):
    pass


class MalformedChartTable(RecognizerError, ValueError):
    pass


class OtslParseError(RecognizerError):
    def __init__(self, cause: OtslError, raw: str) -> None:
        self.cause = cause
        self.raw = raw
        super().__init__(f"could not parse table output: {cause}")


class ServiceUnavailable(RecognizerError):
    pass


class Timeout(RecognizerError):
    pass


def task_for(category: Category) -> RecognitionTask:
    if category is Category.FIGURE:
        raise NotRecognizable("figures are saved as images, not recognized")
    return _TASK_BY_CATEGORY.get(category, RecognitionTask.OCR)


@dataclass(frozen=True)
class RecognitionRequest:
    sequence_id: int
    task: RecognitionTask
    image: bytes
    prompt_id: str

    def to_wire(self) -> dict:
        return {
            "id": self.sequence_id,
            "task": self.task.value,
            "prompt_id": self.prompt_id,
            "image_b64": base64.b64encode(self.image).decode("ascii"),
        }


def build_request(crop: bytes, element: LayoutElement, seq: int) -> RecognitionRequest:
    task = task_for(element.category)
    return RecognitionRequest(seq, task, crop, PROMPTS[task])


@dataclass(frozen=True)
class TextMd:
    text: str


@dataclass(frozen=True)
class TableGrid:
    grid: OtslGrid


@dataclass(frozen=True)
class FormulaLatex:
    latex: str
    display: bool

    def __post_init__(self) -> None:
        if not self.latex:
            raise ValueError("formula latex must be non-empty")


@dataclass(frozen=True)
class ChartTable:
    markdown: str


RecognizedContent = Union[TextMd, TableGrid, FormulaLatex, ChartTable]


def split_pipe_row(line: str) -> list[str]:
    """Cells of one pipe-table row; ``\\|`` is a literal pipe."""
    line = line.strip()
    if line.startswith("|"):
        line = line[1:]
    if line.endswith("|") and not line.endswith("\\|"):
        line = line[:-1]
    cells, buf, i = [], [], 0
    while i < len(line):
        if line[i] == "\\" and i + 1 < len(line) and line[i + 1] == "|":
            buf.append("|")
            i += 2
            continue
        if line[i] == "|":
            cells.append("".join(buf).strip())
            buf = []
        else:
            buf.append(line[i])
        i += 1
    cells.append("".join(buf).strip())
    return cells


def _is_separator(cells: list[str]) -> bool:
    return bool(cells) and all(
        len(c) >= 1 and set(c) <= set("-:") and "-" in c for c in cells
    )


def validate_pipe_table(markdown: str) -> list[str]:
    """Return the non-blank lines of a pipe table or raise MalformedChartTable."""
    lines = [ln.strip() for ln in markdown.strip().splitlines() if ln.strip()]
    if len(lines) < 2:
        raise MalformedChartTable("chart table needs a header and a separator line")
    if not lines[0].startswith("|") or "|" not in lines[0][1:]:
        raise MalformedChartTable("header line is not a pipe row")
    header, sep = split_pipe_row(lines[0]), split_pipe_row(lines[1])
    if not _is_separator(sep):
        raise MalformedChartTable("second line is not a separator row")
    if len(sep) != len(header):
        raise MalformedChartTable("separator width differs from header width")
    for ln in lines[2:]:
        if not ln.startswith("|"):
            raise MalformedChartTable(f"body line is not a pipe row: {ln[:30]!r}")
    return lines


def classify_formula(raw: str) -> FormulaLatex:
    text = raw.strip()
    if text.startswith("\\(") and text.endswith("\\)") and len(text) >= 4:
        inner, display = text[2:-2], False
    elif text.startswith("\\[") and text.endswith("\\]") and len(text) >= 4:
        inner, display = text[2:-2], True
    elif text.startswith("$$") and text.endswith("$$") and len(text) >= 4:
        inner, display = text[2:-2], True
    else:
        inner, display = text, True
    inner = inner.strip()
    if not inner:
        raise EmptyResponse("formula output has no content")
    return FormulaLatex(inner, display)


def parse_response(task: RecognitionTask, raw: str) -> RecognizedContent:
    if not raw.strip():
        raise EmptyResponse(f"empty {task.value} response")
    if task is RecognitionTask.OCR:
        return TextMd(raw.strip())
    if task is RecognitionTask.FORMULA:
        return classify_formula(raw)
    if task is RecognitionTask.TABLE:
        try:
            return TableGrid(parse_otsl_text(raw))
        except OtslError as exc:
            raise OtslParseError(exc, raw) from exc
    lines = validate_pipe_table(raw)
    return ChartTable("\n".join(lines))


def serialize_content(content: RecognizedContent) -> str:
    """Render content the way the recognizer would emit it."""
    if isinstance(content, TextMd):
        return content.text
    if isinstance(content, FormulaLatex):
        left, right = ("\\[", "\\]") if content.display else ("\\(", "\\)")
        return f"{left}{content.latex}{right}"
    if isinstance(content, TableGrid):
        return serialize_otsl(content.grid.to_tokens())
    return content.markdown


def content_to_dict(content: RecognizedContent) -> dict:
    if isinstance(content, TextMd):
        return {"type": "text", "value": content.text}
    if isinstance(content, FormulaLatex):
        return {"type": "formula", "value": content.latex, "display": content.display}
    if isinstance(content, TableGrid):
        return {
            "type": "table",
            "value": serialize_otsl(content.grid.to_tokens()),
            "html": grid_to_html(content.grid),
        }
    return {"type": "chart", "value": content.markdown}


@dataclass(frozen=True)
class ServiceConfig:
    endpoint: str = "http://127.0.0.1:8080/recognize"
    request_timeout_ms: int = 30000
    retries: int = 2
    max_batch: int = 64
    backoff_base_s: float = 0.05

    @classmethod
    def from_env(cls, environ=None) -> ServiceConfig:
        env = os.environ if environ is None else environ
        base = cls()
        return cls(
            endpoint=env.get("DOCPARSE_RECOGNIZER_URL", base.endpoint),
            request_timeout_ms=int(env.get("DOCPARSE_REQUEST_TIMEOUT_MS", base.request_timeout_ms)),
            retries=int(env.get("DOCPARSE_RETRIES", base.retries)),
            max_batch=int(env.get("DOCPARSE_MAX_BATCH", base.max_batch)),
        )


BatchResult = list[tuple[int, Union[str, RecognizerError]]]


class RecognizerClient:
    """Shareable across worker threads; every call is independent."""

    def __init__(self, cfg: ServiceConfig) -> None:
        self.cfg = cfg

    def submit_batch(self, batch: list[RecognitionRequest]) -> BatchResult:
        return submit_batch(batch, self.cfg)


def submit_batch(batch: list[RecognitionRequest], cfg: ServiceConfig) -> BatchResult:
    """POST one batch and pair every request with its text or error.

    Transport failures and 5xx responses are retried ``cfg.retries`` times with
    exponential backoff. Results come back in request order.
    """
    if not 1 <= len(batch) <= cfg.max_batch:
        raise ValueError(f"batch size {len(batch)} outside [1, {cfg.max_batch}]")
    payload = {"batch": [req.to_wire() for req in batch]}
    timeout = cfg.request_timeout_ms / 1000.0
    last_error = ""
    for attempt in range(cfg.retries + 1):
        if attempt:
            time.sleep(cfg.backoff_base_s * 2 ** (attempt - 1))
        try:
            resp = requests.post(cfg.endpoint, json=payload, timeout=timeout)
        except requests.ConnectTimeout as exc:
            last_error = str(exc)
            log.warning("recognizer connect timeout (attempt %d)", attempt + 1)
            continue
        except requests.Timeout as exc:
            raise Timeout(f"no response from {cfg.endpoint} within {cfg.request_timeout_ms} ms") from exc
        except requests.RequestException as exc:
            last_error = str(exc)
            log.warning("recognizer transport error (attempt %d): %s", attempt + 1, exc)
            continue
        if resp.status_code >= 500:
            last_error = f"HTTP {resp.status_code}"
            log.warning("recognizer returned %s (attempt %d)", resp.status_code, attempt + 1)
            continue
        if resp.status_code != 200:
            raise ServiceUnavailable(f"recognizer rejected batch: HTTP {resp.status_code}")
        return _match_results(batch, resp.json())
    raise ServiceUnavailable(f"recognizer unavailable after {cfg.retries + 1} attempts: {last_error}")


def _match_results(batch: list[RecognitionRequest], body) -> BatchResult:
    by_id: dict[int, Union[str, RecognizerError]] = {}
    for item in body.get("results", []) if isinstance(body, dict) else []:
        if not isinstance(item, dict) or "id" not in item:
            continue
        if "text" in item and isinstance(item["text"], str):
            by_id[item["id"]] = item["text"]
        else:
            by_id[item["id"]] = RecognizerError(str(item.get("error", "malformed result")))
    return [
        (req.sequence_id, by_id.get(req.sequence_id, RecognizerError("missing result for request")))
        for req in batch
    ]
