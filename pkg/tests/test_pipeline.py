import json
from dataclasses import replace
from pathlib import Path

import pytest

from docparse.assembler import ErrorPlaceholder, assemble_json, assemble_markdown
from docparse.config import ConfigError, PipelineConfig
from docparse.images import image_digest, crop_image
from docparse.layout import load_layout, plan_crops
from docparse.mock_server import MockBehavior, MockServer
from docparse.pipeline.executor import run_pipeline
from docparse.pipeline.sources import DecodeError, LayoutUnavailable, PageSource, canned_responses
from docparse.recognizer import ServiceConfig
from synthetic import make_corpus


def _cfg(url, **kw):
    return replace(PipelineConfig(**kw), service=ServiceConfig(endpoint=url, backoff_base_s=0.001))


def test_golden_fixture(doc1_dir, golden_dir):
    with MockServer(MockBehavior(responses=canned_responses(doc1_dir))) as srv:
        cfg = _cfg(srv.url)
        run = run_pipeline([doc1_dir], cfg)
    doc = run.results[0]
    assert assemble_markdown(doc, cfg.assembly) == (golden_dir / "doc1.md").read_text(encoding="utf-8")
    assert assemble_json(doc) == (golden_dir / "doc1.json").read_text(encoding="utf-8")


def test_bad_input_is_isolated(tmp_path, doc1_dir, golden_dir):
    bad = tmp_path / "broken.png"
    bad.write_bytes(b"not an image at all")
    missing = tmp_path / "absent.png"
    with MockServer(MockBehavior(responses=canned_responses(doc1_dir))) as srv:
        run = run_pipeline([bad, doc1_dir, missing], _cfg(srv.url))
    assert isinstance(run.results[0], DecodeError)
    assert isinstance(run.results[2], FileNotFoundError)
    assert assemble_json(run.results[1]) == (golden_dir / "doc1.json").read_text(encoding="utf-8")


def test_missing_layout_fails_only_that_document(tmp_path, doc1_dir):
    lone = tmp_path / "lone.png"
    lone.write_bytes((doc1_dir / "page_0.png").read_bytes())
    with MockServer() as srv:
        run = run_pipeline([lone, doc1_dir], _cfg(srv.url))
    assert isinstance(run.results[0], LayoutUnavailable)
    assert not isinstance(run.results[1], Exception)


def test_element_failure_becomes_placeholder(doc1_dir):
    responses = canned_responses(doc1_dir)
    page = load_layout(doc1_dir / "layout.json")[0]
    doc = PageSource().load(doc1_dir)
    title_box = dict(plan_crops(page, 1.0))[1]
    bad = image_digest(crop_image(doc.pages[0], title_box))
    with MockServer(MockBehavior(responses=responses, error_digests={bad})) as srv:
        result = run_pipeline([doc1_dir], _cfg(srv.url)).results[0]
    contents = [el.content for el in result.pages[0]]
    failed = [c for c in contents if isinstance(c, ErrorPlaceholder)]
    assert len(failed) == 1
    assert "<!-- recognition failed:" in assemble_markdown(result)
    assert "Results" not in assemble_markdown(result).split("\n")[0]


def test_service_down_marks_every_element(doc1_dir):
    cfg = replace(PipelineConfig(), service=ServiceConfig(endpoint="http://127.0.0.1:9/none", retries=0))
    doc = run_pipeline([doc1_dir], cfg).results[0]
    recognized = [el for page in doc.pages for el in page if el.source.category.value != "figure"]
    assert recognized and all(isinstance(el.content, ErrorPlaceholder) for el in recognized)


def test_batches_respect_threshold_and_backpressure(tmp_path):
    docs = make_corpus(tmp_path, n_docs=3, pages_per_doc=4)
    behavior = MockBehavior()
    events = []
    with MockServer(behavior) as srv:
        cfg = _cfg(srv.url, batch_threshold=4, queue_capacity=3, layout_workers=3, recognition_workers=2)
        run = run_pipeline(docs, cfg, progress=events.append)
    assert all(not isinstance(r, Exception) for r in run.results)
    assert behavior.batch_sizes and max(behavior.batch_sizes) <= 4
    assert sum(behavior.batch_sizes) == 3 * 4 * 5
    for stage in ("load", "layout", "recognition"):
        assert run.stats[stage]["max_queue_depth"] <= 3
    flushes = [e for e in events if e["event"] == "flush"]
    assert {e["reason"] for e in flushes} <= {"threshold", "timeout", "drain"}
    assert {e["stage"] for e in events if e["event"] == "summary"} == {"load", "layout", "recognition"}


def test_outputs_independent_of_concurrency(tmp_path):
    from synthetic import render_outputs

    docs = make_corpus(tmp_path, n_docs=2, pages_per_doc=3)
    seen = set()
    with MockServer() as srv:
        for workers, threshold in ((1, 1), (4, 16), (2, 5)):
            cfg = _cfg(srv.url, layout_workers=workers, recognition_workers=workers, batch_threshold=threshold)
            seen.add(render_outputs(run_pipeline(docs, cfg), docs, cfg))
    assert len(seen) == 1


def test_no_inputs():
    with pytest.raises(ConfigError):
        run_pipeline([], PipelineConfig())


def test_config_rejects_threshold_over_max_batch():
    with pytest.raises(ConfigError):
        PipelineConfig(batch_threshold=65)
