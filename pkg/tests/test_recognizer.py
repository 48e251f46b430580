import io
import socket

import pytest
from hypothesis import given
from hypothesis import strategies as st
from PIL import Image

from docparse.domain import BBox, Category, LayoutElement
from docparse.images import encode_png, pixel_digest
from docparse.mock_server import MockBehavior, MockServer, synthetic_response
from docparse.otsl import parse_otsl_text
from docparse.recognizer import (
    ChartTable,
    EmptyResponse,
    FormulaLatex,
    MalformedChartTable,
    NotRecognizable,
    OtslParseError,
    RecognitionTask,
    ServiceConfig,
    ServiceUnavailable,
    TableGrid,
    TextMd,
    Timeout,
    build_request,
    classify_formula,
    parse_response,
    serialize_content,
    submit_batch,
    task_for,
)


def _png(color) -> bytes:
    return encode_png(Image.new("RGB", (4, 3), color))


def _element(cat):
    return LayoutElement(0, 0, BBox(0, 0, 1, 1), cat, 1.0)


def test_task_mapping():
    req = build_request(b"x", _element(Category.TABLE), 3)
    assert (req.task, req.prompt_id, req.sequence_id) == (RecognitionTask.TABLE, "table_otsl", 3)
    assert task_for(Category.TITLE) is RecognitionTask.OCR
    assert task_for(Category.FORMULA) is RecognitionTask.FORMULA
    assert task_for(Category.CHART) is RecognitionTask.CHART
    with pytest.raises(NotRecognizable):
        task_for(Category.FIGURE)


def test_parse_response_examples():
    assert parse_response(RecognitionTask.FORMULA, r"\[E=mc^2\]") == FormulaLatex("E=mc^2", True)
    assert parse_response(RecognitionTask.FORMULA, r"\(a\)") == FormulaLatex("a", False)
    assert parse_response(RecognitionTask.FORMULA, "$$x$$") == FormulaLatex("x", True)
    assert parse_response(RecognitionTask.TABLE, "fcel{A} nl") == TableGrid(parse_otsl_text("fcel{A} nl"))
    assert parse_response(RecognitionTask.OCR, " hi \n") == TextMd("hi")


def test_parse_response_errors():
    with pytest.raises(EmptyResponse):
        parse_response(RecognitionTask.OCR, "   ")
    with pytest.raises(EmptyResponse):
        parse_response(RecognitionTask.FORMULA, r"\[ \]")
    with pytest.raises(OtslParseError) as info:
        parse_response(RecognitionTask.TABLE, "ucel nl")
    assert info.value.raw == "ucel nl"
    with pytest.raises(MalformedChartTable):
        parse_response(RecognitionTask.CHART, "| a |\n| b |")


@given(st.text(min_size=1).filter(lambda s: s.strip()))
def test_formula_classification_is_total(raw):
    try:
        f = classify_formula(raw)
    except EmptyResponse:
        return
    assert f.display in (True, False)


CONTENTS = [
    TextMd("hello *world*"),
    FormulaLatex("a^2", False),
    FormulaLatex(r"\frac{1}{2}", True),
    TableGrid(parse_otsl_text("fcel{a\\}b} lcel nl ecel fcel{c} nl")),
    ChartTable("| | Q1 |\n| --- | --- |\n| Rev | 5 |"),
]
TASKS = [RecognitionTask.OCR, RecognitionTask.FORMULA, RecognitionTask.FORMULA, RecognitionTask.TABLE, RecognitionTask.CHART]


@pytest.mark.parametrize("task, content", list(zip(TASKS, CONTENTS)))
def test_serialize_parse_identity(task, content):
    assert parse_response(task, serialize_content(content)) == content


@pytest.mark.parametrize("task", list(RecognitionTask))
def test_synthetic_responses_parse(task):
    parse_response(task, synthetic_response(task.value, "ab12cd34ef"))


def test_pixel_digest_ignores_encoding():
    im = Image.new("RGB", (4, 3), (1, 2, 3))
    a = io.BytesIO()
    im.save(a, format="PNG", compress_level=0)
    assert pixel_digest(a.getvalue()) == pixel_digest(_png((1, 2, 3)))
    assert pixel_digest(_png((1, 2, 3))) != pixel_digest(_png((1, 2, 4)))


def _requests(n, tasks=(RecognitionTask.OCR,)):
    out = []
    for i in range(n):
        task = tasks[i % len(tasks)]
        out.append(build_request(_png((i, 0, 0)), _element({
            RecognitionTask.OCR: Category.TEXT,
            RecognitionTask.TABLE: Category.TABLE,
            RecognitionTask.FORMULA: Category.FORMULA,
            RecognitionTask.CHART: Category.CHART,
        }[task]), 100 + i))
    return out


def test_echo_three_requests():
    reqs = _requests(3)
    canned = {pixel_digest(reqs[0].image): "first"}
    with MockServer(MockBehavior(responses=canned)) as srv:
        results = submit_batch(reqs, ServiceConfig(endpoint=srv.url))
    assert [sid for sid, _ in results] == [100, 101, 102]
    assert results[0][1] == "first"
    assert all(isinstance(text, str) for _, text in results)


def test_retry_then_success():
    behavior = MockBehavior(fail_first=2)
    with MockServer(behavior) as srv:
        results = submit_batch(_requests(2), ServiceConfig(endpoint=srv.url, retries=2, backoff_base_s=0.001))
    assert behavior.calls == 3
    assert len(results) == 2


def test_retries_exhausted():
    with MockServer(MockBehavior(fail_first=5)) as srv:
        with pytest.raises(ServiceUnavailable):
            submit_batch(_requests(1), ServiceConfig(endpoint=srv.url, retries=1, backoff_base_s=0.001))


def test_timeout():
    with MockServer(MockBehavior(hang_s=1.0)) as srv:
        with pytest.raises(Timeout):
            submit_batch(_requests(1), ServiceConfig(endpoint=srv.url, request_timeout_ms=100, retries=0))


def test_connection_refused_is_unavailable():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    cfg = ServiceConfig(endpoint=f"http://127.0.0.1:{port}/recognize", retries=1, backoff_base_s=0.001)
    with pytest.raises(ServiceUnavailable):
        submit_batch(_requests(1), cfg)


def test_batch_size_bounds():
    with pytest.raises(ValueError):
        submit_batch([], ServiceConfig())
    with pytest.raises(ValueError):
        submit_batch(_requests(3), ServiceConfig(max_batch=2))


@pytest.mark.parametrize("behavior_kwargs", [{}, {"fail_first": 1}, {"latency_ms": 5}, {"error_digests": "first"}])
def test_id_multiset_preserved(behavior_kwargs):
    reqs = _requests(7, tasks=list(RecognitionTask))
    if behavior_kwargs.get("error_digests") == "first":
        behavior_kwargs = {"error_digests": {pixel_digest(reqs[0].image)}}
    with MockServer(MockBehavior(**behavior_kwargs)) as srv:
        results = submit_batch(reqs, ServiceConfig(endpoint=srv.url, backoff_base_s=0.001))
    assert sorted(sid for sid, _ in results) == sorted(r.sequence_id for r in reqs)


def test_element_error_is_per_item():
    reqs = _requests(3)
    behavior = MockBehavior(error_digests={pixel_digest(reqs[1].image)})
    with MockServer(behavior) as srv:
        results = submit_batch(reqs, ServiceConfig(endpoint=srv.url))
    assert isinstance(results[1][1], Exception)
    assert isinstance(results[0][1], str) and isinstance(results[2][1], str)


def test_service_config_from_env():
    cfg = ServiceConfig.from_env({"DOCPARSE_RECOGNIZER_URL": "http://x/r", "DOCPARSE_RETRIES": "5"})
    assert cfg.endpoint == "http://x/r" and cfg.retries == 5 and cfg.max_batch == 64
