"""Loopback recognizer speaking the batch protocol, for hermetic runs and tests.

Responses are looked up by ``pixel_digest`` of the submitted crop; unknown
crops get a deterministic synthetic answer derived from the digest.
"""

from __future__ import annotations

import argparse
import base64
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from docparse.images import pixel_digest

log = logging.getLogger(__name__)


def synthetic_response(task: str, digest: str) -> str:
    tag = digest[:8]
    if task == "table":
        return f"fcel{{{tag}}} lcel nl fcel{{a}} fcel{{b}} nl"
    if task == "formula":
        return f"\\[x_{{{tag[:4]}}}\\]"
    if task == "chart":
        return f"| | value |\n| --- | --- |\n| {tag[:4]} | {int(tag[:2], 16)} |"
    return f"text {tag}"


@dataclass
class MockBehavior:
    """Knobs for exercising the client; all counters are shared across requests."""

    responses: dict[str, str] = field(default_factory=dict)
    error_digests: set[str] = field(default_factory=set)
    latency_ms: float = 0.0
    fail_first: int = 0
    hang_s: float = 0.0
    calls: int = 0
    batch_sizes: list[int] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)


def _make_handler(behavior: MockBehavior):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("mock: " + fmt, *args)

        def _send(self, status: int, body: dict) -> None:
            data = json.dumps(body).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_POST(self):
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length)
            with behavior.lock:
                behavior.calls += 1
                call = behavior.calls
            if behavior.hang_s:
                time.sleep(behavior.hang_s)
            if call <= behavior.fail_first:
                self._send(500, {"error": "injected failure"})
                return
            try:
                batch = json.loads(raw)["batch"]
            except (ValueError, KeyError, TypeError):
                self._send(400, {"error": "bad request body"})
                return
            with behavior.lock:
                behavior.batch_sizes.append(len(batch))
            if behavior.latency_ms:
                time.sleep(behavior.latency_ms / 1000.0)
            results = []
            for item in batch:
                try:
                    digest = pixel_digest(base64.b64decode(item["image_b64"]))
                except Exception as exc:  # undecodable crop
                    results.append({"id": item.get("id"), "error": f"bad image: {exc}"})
                    continue
                if digest in behavior.error_digests:
                    results.append({"id": item["id"], "error": "injected element failure"})
                    continue
                text = behavior.responses.get(digest)
                if text is None:
                    text = synthetic_response(item.get("task", "ocr"), digest)
                results.append({"id": item["id"], "text": text})
            self._send(200, {"results": results})

    return Handler


class MockServer:
    """Runs the mock on an ephemeral loopback port in a background thread."""

    def __init__(self, behavior: MockBehavior | None = None, host: str = "127.0.0.1", port: int = 0):
        self.behavior = behavior or MockBehavior()
        self._httpd = ThreadingHTTPServer((host, port), _make_handler(self.behavior))
        self._httpd.daemon_threads = True
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}/recognize"

    def start(self) -> MockServer:
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        self._thread.join(timeout=5)

    def __enter__(self) -> MockServer:
        return self.start()

    def __exit__(self, *exc) -> None:
        self.stop()


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="docparse-mock", description=__doc__.splitlines()[0])
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8080)
    parser.add_argument("--responses", help="JSON object mapping pixel digest to response text")
    parser.add_argument("--latency-ms", type=float, default=0.0)
    args = parser.parse_args(argv)
    behavior = MockBehavior(latency_ms=args.latency_ms)
    if args.responses:
        with open(args.responses, encoding="utf-8") as fh:
            behavior.responses = json.load(fh)
    server = MockServer(behavior, args.host, args.port)
    print(f"listening on {server.url}", flush=True)
    try:
        server._httpd.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server._httpd.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
