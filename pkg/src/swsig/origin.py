"""Minimal origin server used behind the signing gateway in experiments.

Serves a small built-in site (markup, stylesheet, image, worker script,
and a JSON API endpoint) so end-to-end runs need no external content.  A
directory can be mounted instead to serve real files.  The origin itself
knows nothing about signing; classification and envelopes are entirely
the gateway's business.
"""

from __future__ import annotations

import json
import logging
import mimetypes
import threading
from pathlib import Path
from typing import Optional

from .httpd import BackgroundServer, Handler, ResponseData

logger = logging.getLogger(__name__)

DEFAULT_WORKER_PATH = "/sw.js"

_INDEX_HTML = b"""<!doctype html>
<html>
<head>
  <meta charset="utf-8">
  <title>Demo origin</title>
  <link rel="stylesheet" href="/style.css">
</head>
<body>
  <h1>Demo origin</h1>
  <img src="/logo.png" alt="logo">
  <script>
    if ('serviceWorker' in navigator) {
      navigator.serviceWorker.register('/sw.js');
    }
  </script>
</body>
</html>
"""

_STYLE_CSS = b"body { font-family: sans-serif; margin: 2rem; }\n"

# 1x1 transparent PNG.
_LOGO_PNG = bytes.fromhex(
    "89504e470d0a1a0a0000000d49484452000000010000000108060000001f15c489"
    "0000000d4944415478da63fcffff3f030005fe02fea7356081000000004945"
    "4e44ae426082"
)

_WORKER_JS = b"""// Placeholder worker script; the real client replaces this.
self.addEventListener('install', function () { self.skipWaiting(); });
self.addEventListener('activate', function (event) {
  event.waitUntil(self.clients.claim());
});
"""


class DemoOrigin:
    """Origin with a fixed static set plus a stateful JSON API route."""

    def __init__(
        self,
        listen_host: str = "127.0.0.1",
        listen_port: int = 0,
        docroot: Optional[str] = None,
    ) -> None:
        self._listen = (listen_host, listen_port)
        self._docroot = Path(docroot) if docroot is not None else None
        self._server: Optional[BackgroundServer] = None
        self._counter_lock = threading.Lock()
        self._counter = 0
        self._static: dict[str, tuple[bytes, str]] = {
            "/": (_INDEX_HTML, "text/html; charset=utf-8"),
            "/index.html": (_INDEX_HTML, "text/html; charset=utf-8"),
            "/style.css": (_STYLE_CSS, "text/css; charset=utf-8"),
            "/logo.png": (_LOGO_PNG, "image/png"),
            DEFAULT_WORKER_PATH: (_WORKER_JS, "application/javascript"),
        }

    def set_asset(self, path: str, body: bytes, content_type: str = "application/octet-stream") -> None:
        """Install or replace a built-in asset (for update experiments)."""
        self._static[path] = (body, content_type)

    def asset_body(self, path: str) -> bytes:
        return self._static[path][0]

    def static_paths(self) -> list[str]:
        return sorted(self._static)

    def handle_request(self, method: str, path: str, body: bytes) -> ResponseData:
        path = path.split("?", 1)[0]
        if self._docroot is not None:
            return self._serve_file(path)
        if path == "/api/data":
            with self._counter_lock:
                self._counter += 1
                count = self._counter
            payload = json.dumps({"sequence": count, "status": "ok"}).encode("utf-8")
            return ResponseData(
                status=200,
                headers={"Content-Type": "application/json"},
                body=payload,
            )
        if path in self._static:
            content, content_type = self._static[path]
            return ResponseData(status=200, headers={"Content-Type": content_type}, body=content)
        return ResponseData(
            status=404, headers={"Content-Type": "text/plain"}, body=b"not found"
        )

    def _serve_file(self, path: str) -> ResponseData:
        assert self._docroot is not None
        relative = path.lstrip("/") or "index.html"
        candidate = (self._docroot / relative).resolve()
        root = self._docroot.resolve()
        if root not in candidate.parents and candidate != root:
            return ResponseData(status=404, headers={}, body=b"not found")
        if not candidate.is_file():
            return ResponseData(status=404, headers={}, body=b"not found")
        content_type = mimetypes.guess_type(str(candidate))[0] or "application/octet-stream"
        return ResponseData(
            status=200, headers={"Content-Type": content_type}, body=candidate.read_bytes()
        )

    def _make_handler(self) -> type:
        origin = self

        class OriginHandler(Handler):
            def _serve(self) -> None:
                data = origin.handle_request(self.command, self.path, self.read_body())
                self.send_response_data(data)

            do_GET = do_HEAD = do_POST = do_PUT = do_DELETE = _serve

        return OriginHandler

    def start(self) -> "DemoOrigin":
        if self._server is None:
            self._server = BackgroundServer(self._make_handler(), *self._listen)
            self._server.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.stop()
            self._server = None

    @property
    def port(self) -> int:
        assert self._server is not None, "origin not started"
        return self._server.port

    @property
    def host(self) -> str:
        assert self._server is not None, "origin not started"
        return self._server.host

    def __enter__(self) -> "DemoOrigin":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
