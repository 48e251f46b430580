"""Crop extraction and encoding helpers for page images."""

from __future__ import annotations

import hashlib
import io
import math

from PIL import Image

from docparse.domain import BBox


def pixel_digest(image_bytes: bytes) -> str:
    """SHA-256 over mode, size and raw pixels; stable across PNG encoders."""
    with Image.open(io.BytesIO(image_bytes)) as im:
        im.load()
        return image_digest(im)


def image_digest(im: Image.Image) -> str:
    h = hashlib.sha256()
    h.update(f"{im.mode}:{im.width}x{im.height}:".encode())
    h.update(im.tobytes())
    return h.hexdigest()


def encode_png(im: Image.Image) -> bytes:
    buf = io.BytesIO()
    im.save(buf, format="PNG")
    return buf.getvalue()


def crop_image(page: Image.Image, box: BBox, scale_x: float = 1.0, scale_y: float = 1.0) -> Image.Image:
    """Cut ``box`` (layout pixels) out of ``page``; edges round outward."""
    left = max(0, math.floor(box.x0 * scale_x))
    top = max(0, math.floor(box.y0 * scale_y))
    right = min(page.width, max(left + 1, math.ceil(box.x1 * scale_x)))
    bottom = min(page.height, max(top + 1, math.ceil(box.y1 * scale_y)))
    return page.crop((left, top, right, bottom))
