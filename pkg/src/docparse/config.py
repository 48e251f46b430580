"""Single-document JSON configuration with dotted-name overrides.

Every leaf of ``DEFAULTS`` can be set in the config file and overridden on
the command line, e.g. ``--pipeline.batch_threshold 8`` or
``--thresholds.per_class.table 0.6``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from docparse.assembler import AssemblyOptions
from docparse.domain import Category, UnknownCategory
from docparse.layout import DEFAULT_PADDING, DEFAULT_THRESHOLD, ThresholdConfig
from docparse.pipeline.sources import DEFAULT_DPI, DEFAULT_RENDERER
from docparse.reading_order import COLUMN_OVERLAP_THRESHOLD
from docparse.recognizer import ServiceConfig


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, Any] = {
    "pipeline": {
        "load_workers": 1,
        "layout_workers": 2,
        "recognition_workers": 2,
        "queue_capacity": 64,
        "batch_threshold": 16,
        "batch_max_wait_ms": 50.0,
        "crop_padding": DEFAULT_PADDING,
        "column_overlap_threshold": COLUMN_OVERLAP_THRESHOLD,
        "renderer": DEFAULT_RENDERER,
        "dpi": DEFAULT_DPI,
    },
    "service": {
        "endpoint": ServiceConfig.endpoint,
        "request_timeout_ms": ServiceConfig.request_timeout_ms,
        "retries": ServiceConfig.retries,
        "max_batch": ServiceConfig.max_batch,
    },
    "thresholds": {
        "default": DEFAULT_THRESHOLD,
        "per_class": {c.value: None for c in Category},
    },
    "assembly": {
        "include_headers_footers": False,
        "image_dir": "images",
    },
}


@dataclass(frozen=True)
class PipelineConfig:
    load_workers: int = 1
    layout_workers: int = 2
    recognition_workers: int = 2
    queue_capacity: int = 64
    batch_threshold: int = 16
    batch_max_wait_ms: float = 50.0
    crop_padding: float = DEFAULT_PADDING
    column_overlap_threshold: float = COLUMN_OVERLAP_THRESHOLD
    renderer: str = DEFAULT_RENDERER
    dpi: int = DEFAULT_DPI
    service: ServiceConfig = field(default_factory=ServiceConfig)
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    assembly: AssemblyOptions = field(default_factory=AssemblyOptions)

    def __post_init__(self) -> None:
        for name in ("load_workers", "layout_workers", "recognition_workers",
                     "queue_capacity", "batch_threshold"):
            if getattr(self, name) < 1:
                raise ConfigError(f"pipeline.{name} must be >= 1")
        if self.batch_max_wait_ms < 0:
            raise ConfigError("pipeline.batch_max_wait_ms must be >= 0")
        if self.crop_padding < 0:
            raise ConfigError("pipeline.crop_padding must be >= 0")
        if self.batch_threshold > self.service.max_batch:
            raise ConfigError(
                f"pipeline.batch_threshold ({self.batch_threshold}) exceeds "
                f"service.max_batch ({self.service.max_batch})"
            )


def flatten(tree: dict[str, Any], prefix: str = "") -> dict[str, Any]:
    out: dict[str, Any] = {}
    for key, value in tree.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            out.update(flatten(value, name + "."))
        else:
            out[name] = value
    return out


def _merge(base: dict[str, Any], update: dict[str, Any], path: str = "") -> None:
    for key, value in update.items():
        name = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config field {name!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config field {name!r} must be an object")
            _merge(base[key], value, name + ".")
        else:
            base[key] = value


def set_dotted(tree: dict[str, Any], dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    node = tree
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"unknown config field {dotted!r}")
        node = node[part]
    if parts[-1] not in node or isinstance(node[parts[-1]], dict):
        raise ConfigError(f"unknown config field {dotted!r}")
    node[parts[-1]] = value


def load_config_tree(path: str | Path | None) -> dict[str, Any]:
    tree = copy.deepcopy(DEFAULTS)
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        _merge(tree, data)
    return tree


def build_config(tree: dict[str, Any]) -> PipelineConfig:
    try:
        p, s, t, a = tree["pipeline"], tree["service"], tree["thresholds"], tree["assembly"]
        per_class = {k: v for k, v in t["per_class"].items() if v is not None}
        thresholds = ThresholdConfig.from_dict({"default": t["default"], "per_class": per_class})
        return PipelineConfig(
            load_workers=int(p["load_workers"]),
            layout_workers=int(p["layout_workers"]),
            recognition_workers=int(p["recognition_workers"]),
            queue_capacity=int(p["queue_capacity"]),
            batch_threshold=int(p["batch_threshold"]),
            batch_max_wait_ms=float(p["batch_max_wait_ms"]),
            crop_padding=float(p["crop_padding"]),
            column_overlap_threshold=float(p["column_overlap_threshold"]),
            renderer=str(p["renderer"]),
            dpi=int(p["dpi"]),
            service=ServiceConfig(
                endpoint=str(s["endpoint"]),
                request_timeout_ms=int(s["request_timeout_ms"]),
                retries=int(s["retries"]),
                max_batch=int(s["max_batch"]),
            ),
            thresholds=thresholds,
            assembly=AssemblyOptions(
                include_headers_footers=bool(a["include_headers_footers"]),
                image_dir=str(a["image_dir"]),
            ),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, UnknownCategory) as exc:
        raise ConfigError(str(exc)) from None
