"""Three-stage concurrent executor: load, layout, recognition.

Stages are worker pools connected by bounded queues. Recognition requests
from any page of any document share batches; a single consumer on the
calling thread reassembles results into per-document reading order.
"""

from __future__ import annotations

import itertools
import json
import logging
import queue
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence, Union

from docparse.assembler import DocElement, DocMetadata, Document, ErrorPlaceholder, FigureRef
from docparse.config import ConfigError, PipelineConfig
from docparse.domain import Category, LayoutElement
from docparse.images import crop_image, encode_png, image_digest
from docparse.layout import filter_proposals, plan_crops
from docparse.pipeline.batching import BatchQueue, Closed
from docparse.pipeline.reassembly import Reassembler
from docparse.pipeline.sources import FixtureLayoutBackend, LayoutBackend, LoadedDocument, PageSource
from docparse.reading_order import decode_reading_order, geometric_relation_scores
from docparse.recognizer import (
    RecognitionRequest,
    RecognizerClient,
    RecognizerError,
    build_request,
    parse_response,
)

log = logging.getLogger(__name__)

_STOP = object()
_FIGURE_NS = uuid.UUID("6f1c2d1e-8d3a-5b7e-9a41-2c0f1e5d7b93")


@dataclass(frozen=True)
class WorkItem:
    doc_index: int
    page_index: int
    sequence_id: int | None
    payload: Any


@dataclass(frozen=True)
class _PageRecord:
    elements: list[LayoutElement]
    # per element in reading order: a fixed content or a pending sequence id
    slots: list[Union[FigureRef, int]]
    images: dict[str, bytes]


class InstrumentedQueue(queue.Queue):
    """Bounded queue recording its peak depth and throughput."""

    def __init__(self, maxsize: int) -> None:
        super().__init__(maxsize)
        self.max_depth = 0
        self.items_in = 0

    def _put(self, item) -> None:
        super()._put(item)
        if item is not _STOP:
            self.items_in += 1
        self.max_depth = max(self.max_depth, len(self.queue))


class JsonLinesProgress:
    """Writes one JSON object per progress event to a text stream."""

    def __init__(self, stream) -> None:
        self._stream = stream
        self._lock = threading.Lock()

    def __call__(self, event: dict) -> None:
        line = json.dumps(event, sort_keys=True)
        with self._lock:
            self._stream.write(line + "\n")
            self._stream.flush()


@dataclass
class PipelineRun:
    results: list[Union[Document, Exception]]
    stats: dict[str, Any] = field(default_factory=dict)


class _Countdown:
    """Runs ``on_zero`` once, when the last of ``n`` workers finishes."""

    def __init__(self, n: int, on_zero: Callable[[], None]) -> None:
        self._n = n
        self._on_zero = on_zero
        self._lock = threading.Lock()

    def done(self) -> None:
        with self._lock:
            self._n -= 1
            last = self._n == 0
        if last:
            self._on_zero()


def _figure_path(image_dir: str, doc_name: str, page: int, order: int, digest: str) -> str:
    name = uuid.uuid5(_FIGURE_NS, f"{doc_name}/{page}/{order}/{digest}")
    return f"{image_dir}/{name}.png"


class _Executor:
    def __init__(self, inputs, cfg, page_source, layout_backend, client, progress):
        self.inputs = [Path(p) for p in inputs]
        self.cfg = cfg
        self.page_source = page_source
        self.backend = layout_backend
        self.client = client
        self.progress = progress or (lambda event: None)
        cap = cfg.queue_capacity
        self.input_q = InstrumentedQueue(cap)
        self.page_q = InstrumentedQueue(cap)
        self.batch_q: BatchQueue[RecognitionRequest] = BatchQueue(cap)
        self.events = InstrumentedQueue(cap)
        self._seq = itertools.count()
        self._seq_lock = threading.Lock()
        self.counters = {
            "load": {"items_in": 0, "items_out": 0},
            "layout": {"items_in": 0, "items_out": 0},
            "recognition": {"items_in": 0, "items_out": 0, "batches": 0},
        }
        self._count_lock = threading.Lock()

    def _count(self, stage: str, key: str, n: int = 1) -> None:
        with self._count_lock:
            self.counters[stage][key] += n

    # -- stage 1 -------------------------------------------------------------
    def _feed(self) -> None:
        for i, path in enumerate(self.inputs):
            self.input_q.put((i, path))
        for _ in range(self.cfg.load_workers):
            self.input_q.put(_STOP)

    def _load_worker(self, countdown: _Countdown) -> None:
        try:
            while (item := self.input_q.get()) is not _STOP:
                idx, path = item
                self._count("load", "items_in")
                try:
                    doc = self.page_source.load(path)
                except Exception as exc:
                    self.events.put(("doc_error", idx, exc))
                    continue
                self.events.put(("doc", idx, doc, len(doc.pages)))
                for p in range(len(doc.pages)):
                    self.page_q.put(WorkItem(idx, p, None, doc))
                    self._count("load", "items_out")
        finally:
            countdown.done()

    # -- stage 2 -------------------------------------------------------------
    def _layout_page(self, item: WorkItem) -> tuple[_PageRecord, list[RecognitionRequest]]:
        doc: LoadedDocument = item.payload
        cfg = self.cfg
        page = filter_proposals(self.backend.detect(doc, item.page_index), cfg.thresholds)
        elements = list(page.elements)
        if elements:
            matrix = geometric_relation_scores(elements, cfg.column_overlap_threshold)
            order = decode_reading_order(matrix, elements).permutation
        else:
            order = ()
        crops = dict(plan_crops(page, cfg.crop_padding))
        im = doc.pages[item.page_index]
        sx, sy = im.width / page.page_width, im.height / page.page_height

        ordered = [elements[i] for i in order]
        slots: list[Union[FigureRef, int]] = []
        images: dict[str, bytes] = {}
        requests: list[RecognitionRequest] = []
        n_pending = sum(1 for el in ordered if el.category is not Category.FIGURE)
        with self._seq_lock:
            seqs = [next(self._seq) for _ in range(n_pending)]
        seq_iter = iter(seqs)
        for pos, el in enumerate(ordered):
            crop = crop_image(im, crops[el.id], sx, sy)
            if el.category is Category.FIGURE:
                path = _figure_path(cfg.assembly.image_dir, doc.name, item.page_index, pos,
                                    image_digest(crop))
                images[path] = encode_png(crop)
                slots.append(FigureRef(path))
            else:
                seq = next(seq_iter)
                requests.append(build_request(encode_png(crop), el, seq))
                slots.append(seq)
        return _PageRecord(ordered, slots, images), requests

    def _layout_worker(self, countdown: _Countdown) -> None:
        try:
            while (item := self.page_q.get()) is not _STOP:
                self._count("layout", "items_in")
                try:
                    record, requests = self._layout_page(item)
                except Exception as exc:
                    self.events.put(("page_error", item.doc_index, item.page_index, exc))
                    continue
                self.events.put(("page", item.doc_index, item.page_index, record))
                for req in requests:
                    self.batch_q.put(req)
                    self._count("layout", "items_out")
        finally:
            countdown.done()

    # -- stage 3 -------------------------------------------------------------
    def _recognize(self, batch: list[RecognitionRequest]) -> list[tuple[int, Any]]:
        try:
            raw = dict(self.client.submit_batch(batch))
        except Exception as exc:
            log.warning("recognition batch of %d failed: %s", len(batch), exc)
            return [(req.sequence_id, ErrorPlaceholder(str(exc))) for req in batch]
        out = []
        for req in batch:
            value = raw.get(req.sequence_id)
            if isinstance(value, str):
                try:
                    content = parse_response(req.task, value)
                except (RecognizerError, ValueError) as exc:
                    content = ErrorPlaceholder(str(exc))
            else:
                content = ErrorPlaceholder(str(value))
            out.append((req.sequence_id, content))
        return out

    def _recognition_worker(self, countdown: _Countdown) -> None:
        threshold = self.cfg.batch_threshold
        max_wait = self.cfg.batch_max_wait_ms / 1000.0
        try:
            while True:
                try:
                    batch = self.batch_q.collect_batch(threshold, max_wait)
                except Closed:
                    break
                with self._count_lock:
                    c = self.counters["recognition"]
                    c["items_in"] += len(batch.items)
                    c["batches"] += 1
                    flushed = c["batches"]
                self.progress({
                    "stage": "recognition",
                    "event": "flush",
                    "reason": batch.reason,
                    "size": len(batch.items),
                    "queue_depth": len(self.batch_q),
                    "batches_flushed": flushed,
                })
                results = self._recognize(batch.items)
                self.events.put(("results", results))
                self._count("recognition", "items_out", len(results))
        finally:
            countdown.done()

    # -- reassembly ----------------------------------------------------------
    def run(self) -> PipelineRun:
        cfg = self.cfg
        threads = [threading.Thread(target=self._feed, name="feed", daemon=True)]
        load_done = _Countdown(cfg.load_workers, lambda: [self.page_q.put(_STOP) for _ in range(cfg.layout_workers)])
        layout_done = _Countdown(cfg.layout_workers, self.batch_q.close)
        recog_done = _Countdown(cfg.recognition_workers, lambda: self.events.put(("done",)))
        threads += [threading.Thread(target=self._load_worker, args=(load_done,), name=f"load-{i}", daemon=True)
                    for i in range(cfg.load_workers)]
        threads += [threading.Thread(target=self._layout_worker, args=(layout_done,), name=f"layout-{i}", daemon=True)
                    for i in range(cfg.layout_workers)]
        threads += [threading.Thread(target=self._recognition_worker, args=(recog_done,), name=f"recog-{i}", daemon=True)
                    for i in range(cfg.recognition_workers)]
        started = time.monotonic()
        for t in threads:
            t.start()

        results: list[Union[Document, Exception, None]] = [None] * len(self.inputs)
        docs: dict[int, dict[str, Any]] = {}
        reasm = Reassembler()
        resolved: dict[int, Any] = {}

        def finish(idx: int) -> None:
            state = docs[idx]
            if state["error"] is not None:
                for rec in state["pages"].values():
                    for slot in rec.slots:
                        if isinstance(slot, int):
                            resolved.pop(slot, None)
                results[idx] = state["error"]
                return
            pages, images = [], {}
            for p in range(state["n_pages"]):
                rec: _PageRecord = state["pages"][p]
                page = []
                for pos, (el, slot) in enumerate(zip(rec.elements, rec.slots)):
                    content = resolved.pop(slot) if isinstance(slot, int) else slot
                    page.append(DocElement(pos, el, content))
                pages.append(tuple(page))
                images.update(rec.images)
            doc: LoadedDocument = state["doc"]
            meta = DocMetadata(source=doc.source.name, page_count=len(pages))
            results[idx] = Document(tuple(pages), meta, images)

        def page_arrived(idx: int) -> None:
            state = docs[idx]
            if len(state["pages"]) + state["failed_pages"] == state["n_pages"]:
                for done_idx, items in reasm.seal(idx):
                    resolved.update(items)
                    finish(done_idx)

        while True:
            event = self.events.get()
            kind = event[0]
            if kind == "done":
                break
            if kind == "doc_error":
                results[event[1]] = event[2]
            elif kind == "doc":
                _, idx, doc, n_pages = event
                docs[idx] = {"doc": doc, "n_pages": n_pages, "pages": {}, "failed_pages": 0, "error": None}
            elif kind == "page":
                _, idx, p, record = event
                docs[idx]["pages"][p] = record
                reasm.register(idx, [s for s in record.slots if isinstance(s, int)])
                page_arrived(idx)
            elif kind == "page_error":
                _, idx, p, exc = event
                state = docs[idx]
                state["failed_pages"] += 1
                if state["error"] is None:
                    state["error"] = exc
                page_arrived(idx)
            elif kind == "results":
                for seq, content in event[1]:
                    for done_idx, items in reasm.add(seq, content):
                        resolved.update(items)
                        finish(done_idx)
        for t in threads:
            t.join()
        reasm.close()
        elapsed = time.monotonic() - started

        stats = {
            "elapsed_s": elapsed,
            "load": {**self.counters["load"], "max_queue_depth": self.input_q.max_depth},
            "layout": {**self.counters["layout"], "max_queue_depth": self.page_q.max_depth},
            "recognition": {
                **self.counters["recognition"],
                "max_queue_depth": self.batch_q.max_depth,
                "flushes": dict(self.batch_q.flushes),
            },
            "events_max_queue_depth": self.events.max_depth,
        }
        for stage in ("load", "layout", "recognition"):
            self.progress({"stage": stage, "event": "summary", **stats[stage]})
        final = [r if r is not None else RuntimeError("input produced no result") for r in results]
        return PipelineRun(final, stats)


def run_pipeline(
    inputs: Sequence[str | Path],
    cfg: PipelineConfig,
    *,
    page_source: PageSource | None = None,
    layout_backend: LayoutBackend | None = None,
    client: RecognizerClient | None = None,
    progress: Callable[[dict], None] | None = None,
) -> PipelineRun:
    """Parse every input into a Document; per-input failures become exceptions
    in the matching result slot instead of aborting the run."""
    if not inputs:
        raise ConfigError("no inputs given")
    if cfg.batch_threshold > cfg.service.max_batch:
        raise ConfigError("batch_threshold exceeds service.max_batch")
    ex = _Executor(
        inputs,
        cfg,
        page_source or PageSource(renderer=cfg.renderer, dpi=cfg.dpi),
        layout_backend or FixtureLayoutBackend(),
        client or RecognizerClient(cfg.service),
        progress,
    )
    return ex.run()
