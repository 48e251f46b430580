"""Command-line entry point: parse, eval, order, otsl2html, html2otsl."""

from __future__ import annotations

import argparse
import contextlib
import logging
import sys
from dataclasses import replace
from pathlib import Path

from docparse import SCHEMA_VERSION, __version__
from docparse.assembler import assemble_json, assemble_markdown
from docparse.config import ConfigError, DEFAULTS, build_config, flatten, load_config_tree, set_dotted
from docparse.layout import SchemaError, load_layout
from docparse.metrics.corpus import ManifestError, evaluate_corpus, report_to_json
from docparse.otsl import (
    MalformedHtml,
    OtslError,
    grid_to_html,
    html_to_grid,
    parse_otsl_text,
    serialize_otsl,
)
from docparse.reading_order import (
    InvalidRelationMatrix,
    decode_reading_order,
    geometric_relation_scores,
    is_consistent_tournament,
    load_relation_matrix,
)

log = logging.getLogger("docparse")


class _Formatter(logging.Formatter):
    def format(self, record: logging.LogRecord) -> str:
        return f"{record.levelname.lower()}: {record.getMessage()}"


def _error(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _warning(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def _parse_bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    group = p.add_argument_group("config overrides (same dotted names as the config file)")
    for name, default in flatten(DEFAULTS).items():
        if isinstance(default, bool):
            kind = _parse_bool
        elif isinstance(default, int):
            kind = int
        elif isinstance(default, str):
            kind = str
        else:
            kind = float
        group.add_argument(f"--{name}", dest=name, type=kind, default=None, metavar="V")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="docparse", description=__doc__.splitlines()[0])
    parser.add_argument(
        "--version", action="version",
        version=f"docparse {__version__} (output schema {SCHEMA_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse documents into Markdown and JSON")
    p.add_argument("inputs", nargs="+", help="image, PDF or fixture-directory inputs")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--mock-recognizer", action="store_true",
                   help="serve canned/synthetic responses from a loopback mock")
    p.add_argument("--progress-log", help="write JSON-lines progress events here")
    _add_config_flags(p)

    e = sub.add_parser("eval", help="evaluate predictions listed in a manifest")
    e.add_argument("manifest")
    e.add_argument("--report", help="report path (default: <manifest stem>.report.json)")
    e.add_argument("--workers", type=int, default=4)

    o = sub.add_parser("order", help="print the decoded reading order of a layout fixture")
    o.add_argument("layout")
    o.add_argument("--relations", help="relation-matrix fixture for the selected page")
    o.add_argument("--page", type=int, help="only this page index")
    o.add_argument("--column-overlap", type=float, default=0.5)

    for name, helptext in (("otsl2html", "convert OTSL text to HTML"),
                           ("html2otsl", "convert an HTML table to OTSL text")):
        c = sub.add_parser(name, help=helptext)
        c.add_argument("input", help="input file or '-' for stdin")
        c.add_argument("output", help="output file or '-' for stdout")
    return parser


def _cmd_parse(args) -> int:
    from docparse.mock_server import MockBehavior, MockServer
    from docparse.pipeline.executor import JsonLinesProgress, run_pipeline
    from docparse.pipeline.sources import canned_responses, document_name

    try:
        tree = load_config_tree(args.config)
        for name in flatten(DEFAULTS):
            value = getattr(args, name)
            if value is not None:
                set_dotted(tree, name, value)
        cfg = build_config(tree)
    except ConfigError as exc:
        _error(str(exc))
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with contextlib.ExitStack() as stack:
        if args.mock_recognizer:
            responses: dict[str, str] = {}
            for path in args.inputs:
                try:
                    responses.update(canned_responses(path, cfg.crop_padding))
                except Exception as exc:
                    _warning(f"{path}: no canned responses ({exc})")
            server = stack.enter_context(MockServer(MockBehavior(responses=responses)))
            cfg = replace(cfg, service=replace(cfg.service, endpoint=server.url))
        progress = None
        if args.progress_log:
            progress = JsonLinesProgress(stack.enter_context(open(args.progress_log, "w", encoding="utf-8")))
        try:
            run = run_pipeline(args.inputs, cfg, progress=progress)
        except ConfigError as exc:
            _error(str(exc))
            return 2

    failed = 0
    for path, result in zip(args.inputs, run.results):
        if isinstance(result, Exception):
            _error(f"{path}: {result}")
            failed += 1
            continue
        name = document_name(Path(path))
        (out / f"{name}.md").write_text(assemble_markdown(result, cfg.assembly), encoding="utf-8")
        (out / f"{name}.json").write_text(assemble_json(result), encoding="utf-8")
        for rel, data in sorted(result.images.items()):
            target = out / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)
        print(out / f"{name}.md")
    return 1 if failed else 0


def _cmd_eval(args) -> int:
    try:
        report = evaluate_corpus(args.manifest, workers=args.workers)
    except ManifestError as exc:
        _error(str(exc))
        return 2
    path = Path(args.report) if args.report else Path(args.manifest).with_suffix(".report.json")
    path.write_text(report_to_json(report), encoding="utf-8")
    if report["samples_errored"]:
        _warning(f"{report['samples_errored']} sample(s) could not be scored")
    print(path)
    return 0


def _cmd_order(args) -> int:
    try:
        pages = load_layout(args.layout)
        relation = load_relation_matrix(args.relations) if args.relations else None
    except (OSError, SchemaError, InvalidRelationMatrix, ValueError) as exc:
        _error(str(exc))
        return 1
    if args.page is not None:
        pages = [p for p in pages if p.page_index == args.page]
    if not pages:
        _error("empty page")
        return 1
    status = 0
    for page in pages:
        elements = list(page.elements)
        if not elements:
            _error(f"empty page (page {page.page_index})" if len(pages) > 1 else "empty page")
            status = 1
            continue
        if relation is not None and page is pages[0]:
            matrix = relation
            if not is_consistent_tournament(matrix):
                _warning("inconsistent tournament; order decoded anyway")
        else:
            matrix = geometric_relation_scores(elements, args.column_overlap)
        try:
            result = decode_reading_order(matrix, elements)
        except ValueError as exc:
            _error(str(exc))
            status = 1
            continue
        if len(pages) > 1:
            print(f"# page {page.page_index}")
        for pos, idx in enumerate(result.permutation):
            el = elements[idx]
            box = ",".join(f"{v:.2f}" for v in el.bbox.to_list())
            print(f"{pos}\t{el.id}\t{el.category.value}\t{box}\t{result.win_counts[idx]}")
    return status


def _read(path: str) -> str:
    return sys.stdin.read() if path == "-" else Path(path).read_text(encoding="utf-8")


def _write(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _cmd_convert(args) -> int:
    try:
        text = _read(args.input)
        if args.command == "otsl2html":
            result = grid_to_html(parse_otsl_text(text)) + "\n"
        else:
            result = serialize_otsl(html_to_grid(text).to_tokens()) + "\n"
        _write(args.output, result)
    except (OSError, OtslError, MalformedHtml) as exc:
        _error(str(exc))
        return 1
    return 0


def main(argv=None) -> int:
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(_Formatter())
    logging.getLogger("docparse").handlers[:] = [handler]
    logging.getLogger("docparse").setLevel(logging.WARNING)
    logging.getLogger("docparse").propagate = False

    args = build_parser().parse_args(argv)
    commands = {
        "parse": _cmd_parse,
        "eval": _cmd_eval,
        "order": _cmd_order,
        "otsl2html": _cmd_convert,
        "html2otsl": _cmd_convert,
    }
    return commands[args.command](args)


if __name__ == "__main__":
    raise SystemExit(main())
