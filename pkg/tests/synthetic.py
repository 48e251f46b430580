"""Synthetic multi-page corpora and latency-injecting stage stand-ins."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from docparse.pipeline.sources import FixtureLayoutBackend, PageSource

W, H = 160, 200

# (category, bbox) per page; all regions get distinct noise
PAGE_ELEMENTS = [
    ("title", [10, 8, 150, 28]),
    ("text", [10, 36, 76, 120]),
    ("text", [84, 36, 150, 120]),
    ("table", [10, 128, 150, 160]),
    ("formula", [40, 168, 120, 180]),
    ("figure", [10, 184, 60, 196]),
]


def make_corpus(root: Path, n_docs: int, pages_per_doc: int, seed: int = 0) -> list[Path]:
    rng = np.random.default_rng(seed)
    docs = []
    for d in range(n_docs):
        doc_dir = root / f"doc{d:03d}"
        doc_dir.mkdir(parents=True)
        pages = []
        for p in range(pages_per_doc):
            pixels = rng.integers(0, 256, size=(H, W, 3), dtype=np.uint8)
            Image.fromarray(pixels, "RGB").save(doc_dir / f"page_{p}.png", compress_level=1)
            pages.append({
                "page_index": p, "width": W, "height": H,
                "elements": [{"bbox": b, "category": c, "score": 0.9} for c, b in PAGE_ELEMENTS],
            })
        (doc_dir / "layout.json").write_text(json.dumps({"pages": pages}))
        docs.append(doc_dir)
    return docs


@dataclass
class SlowPageSource(PageSource):
    per_page_s: float = 0.005

    def load(self, path):
        doc = super().load(path)
        time.sleep(self.per_page_s * len(doc.pages))
        return doc


class SlowLayoutBackend(FixtureLayoutBackend):
    def __init__(self, per_page_s: float = 0.010) -> None:
        super().__init__()
        self.per_page_s = per_page_s

    def detect(self, doc, page_index):
        time.sleep(self.per_page_s)
        return super().detect(doc, page_index)


def render_outputs(run, inputs, cfg) -> bytes:
    """Every byte the CLI would write for a run, concatenated in a fixed order."""
    from docparse.assembler import assemble_json, assemble_markdown

    out = []
    for path, doc in zip(inputs, run.results):
        if isinstance(doc, Exception):
            out.append(f"{Path(path).name}: error {type(doc).__name__}\n".encode())
            continue
        out.append(assemble_markdown(doc, cfg.assembly).encode())
        out.append(assemble_json(doc).encode())
        for rel, data in sorted(doc.images.items()):
            out.append(rel.encode())
            out.append(data)
    return b"".join(out)
