"""Input resolution for the load and layout stages.

Accepted inputs:

* a directory holding ``page_<n>.<ext>`` images and a ``layout.json`` fixture
* a single image ``name.png`` with a sidecar ``name.layout.json``
* a PDF ``name.pdf`` rasterized by an external renderer, with ``name.layout.json``
"""

from __future__ import annotations

import json
import re
import shlex
import subprocess
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

from PIL import Image, UnidentifiedImageError

from docparse.images import crop_image, image_digest
from docparse.layout import DEFAULT_PADDING, PageLayout, load_layout, plan_crops

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".tif", ".tiff", ".bmp", ".webp"}
DEFAULT_RENDERER = "pdftoppm -r {dpi} -png {input} {output}/page"
DEFAULT_DPI = 200
_PAGE_RE = re.compile(r"^page_(\d+)$")


class DecodeError(ValueError):
    """An input yielded no decodable pages."""


class LayoutUnavailable(ValueError):
    pass


@dataclass
class LoadedDocument:
    name: str
    source: Path
    pages: list[Image.Image]
    layout_path: Path | None = None


def _natural_key(path: Path):
    return [int(tok) if tok.isdigit() else tok for tok in re.split(r"(\d+)", path.stem)]


def _open_image(path: Path) -> Image.Image:
    try:
        with Image.open(path) as im:
            return im.convert("RGB")
    except (UnidentifiedImageError, OSError) as exc:
        if not path.exists():
            raise
        raise DecodeError(f"{path}: cannot decode image ({exc})") from None


def document_name(path: Path) -> str:
    return path.name if path.is_dir() else path.stem


@dataclass
class PageSource:
    """Loads page images for one input path."""

    renderer: str = DEFAULT_RENDERER
    dpi: int = DEFAULT_DPI

    def load(self, path: str | Path) -> LoadedDocument:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"{path}: no such file or directory")
        if path.is_dir():
            files = sorted(
                (p for p in path.iterdir()
                 if p.suffix.lower() in IMAGE_SUFFIXES and _PAGE_RE.match(p.stem)),
                key=lambda p: int(_PAGE_RE.match(p.stem).group(1)),
            )
            pages = [_open_image(p) for p in files]
            layout = path / "layout.json"
        elif path.suffix.lower() == ".pdf":
            pages = self._render_pdf(path)
            layout = path.with_suffix(".layout.json")
        else:
            pages = [_open_image(path)]
            layout = path.with_suffix(".layout.json")
        if not pages:
            raise DecodeError(f"{path}: no pages found")
        return LoadedDocument(document_name(path), path, pages, layout if layout.exists() else None)

    def _render_pdf(self, path: Path) -> list[Image.Image]:
        with tempfile.TemporaryDirectory(prefix="docparse-render-") as out:
            cmd = [
                part.format(dpi=self.dpi, input=str(path), output=out)
                for part in shlex.split(self.renderer)
            ]
            try:
                proc = subprocess.run(cmd, capture_output=True, text=True, check=False)
            except FileNotFoundError:
                raise DecodeError(f"{path}: renderer {cmd[0]!r} not found") from None
            if proc.returncode != 0:
                raise DecodeError(f"{path}: renderer failed: {proc.stderr.strip()[:200]}")
            files = sorted((p for p in Path(out).iterdir() if p.suffix.lower() == ".png"),
                           key=_natural_key)
            return [_open_image(p) for p in files]


class LayoutBackend(Protocol):
    def detect(self, doc: LoadedDocument, page_index: int) -> PageLayout: ...


@dataclass
class FixtureLayoutBackend:
    """Serves detector output from the document's layout fixture file."""

    _cache: dict[Path, dict[int, PageLayout]] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def _pages(self, path: Path) -> dict[int, PageLayout]:
        with self._lock:
            if path not in self._cache:
                self._cache[path] = {p.page_index: p for p in load_layout(path)}
            return self._cache[path]

    def detect(self, doc: LoadedDocument, page_index: int) -> PageLayout:
        if doc.layout_path is None:
            raise LayoutUnavailable(f"{doc.source}: no layout fixture and no detector configured")
        page = self._pages(doc.layout_path).get(page_index)
        if page is None:
            im = doc.pages[page_index]
            return PageLayout(page_index, float(im.width), float(im.height), ())
        return page


def canned_responses(doc_dir: str | Path, padding: float = DEFAULT_PADDING) -> dict[str, str]:
    """Map crop pixel digests to the canned texts in ``responses.json``.

    ``responses.json`` is keyed ``"<page_index>/<element position in layout.json>"``.
    """
    doc_dir = Path(doc_dir)
    path = doc_dir / "responses.json" if doc_dir.is_dir() else doc_dir.with_suffix(".responses.json")
    if not path.exists():
        return {}
    canned = json.loads(path.read_text(encoding="utf-8"))
    doc = PageSource().load(doc_dir)
    table: dict[str, str] = {}
    for page in load_layout(doc.layout_path):
        im = doc.pages[page.page_index]
        sx, sy = im.width / page.page_width, im.height / page.page_height
        for el_id, box in plan_crops(page, padding):
            key = f"{page.page_index}/{el_id}"
            if key not in canned:
                continue
            digest = image_digest(crop_image(im, box, sx, sy))
            if digest in table and table[digest] != canned[key]:
                raise ValueError(f"{path}: crop for {key} is pixel-identical to another element")
            table[digest] = canned[key]
    return table
