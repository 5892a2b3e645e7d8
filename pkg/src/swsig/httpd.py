"""Small shared HTTP plumbing for the loopback components.

Everything here is ordinary request/response buffering on top of the
standard library: a threaded server wrapper that binds an ephemeral port
and shuts down cleanly, a keep-alive upstream client with one persistent
connection per thread, and hop-by-hop header filtering for the two
proxy-shaped components.
"""

from __future__ import annotations

import http.client
import logging
import socket
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Mapping, Optional

logger = logging.getLogger(__name__)

# Headers that describe the connection rather than the payload; a proxy must
# not forward these.
HOP_BY_HOP = frozenset(
    {
        "connection",
        "keep-alive",
        "proxy-authenticate",
        "proxy-authorization",
        "te",
        "trailer",
        "transfer-encoding",
        "upgrade",
    }
)


@dataclass
class ResponseData:
    """One fully buffered HTTP response."""

    status: int
    headers: dict[str, str] = field(default_factory=dict)
    body: bytes = b""

    def header(self, name: str) -> Optional[str]:
        lowered = name.lower()
        for key, value in self.headers.items():
            if key.lower() == lowered:
                return value
        return None


def filter_hop_headers(headers: Mapping[str, str]) -> dict[str, str]:
    out = {}
    for name, value in headers.items():
        low = name.lower()
        if low in HOP_BY_HOP or low == "content-length":
            continue
        out[name] = value
    return out


class Handler(BaseHTTPRequestHandler):
    """Base handler: HTTP/1.1 keep-alive, quiet logging, buffered replies."""

    protocol_version = "HTTP/1.1"
    disable_nagle_algorithm = True

    # Servers embed their component here via make_handler().
    def log_message(self, format: str, *args) -> None:  # noqa: A002
        logger.debug("%s %s", self.address_string(), format % args)

    def read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length > 0 else b""

    def send_response_data(self, data: ResponseData) -> None:
        self.send_response(data.status)
        for name, value in data.headers.items():
            if name.lower() in HOP_BY_HOP or name.lower() == "content-length":
                continue
            self.send_header(name, value)
        self.send_header("Content-Length", str(len(data.body)))
        self.end_headers()
        if self.command != "HEAD":
            self.wfile.write(data.body)


class BackgroundServer:
    """ThreadingHTTPServer bound to loopback, run on a daemon thread."""

    def __init__(self, handler_class: type, host: str = "127.0.0.1", port: int = 0) -> None:
        self._server = ThreadingHTTPServer((host, port), handler_class)
        self._server.daemon_threads = True
        self._thread: Optional[threading.Thread] = None

    @property
    def host(self) -> str:
        return self._server.server_address[0]

    @property
    def port(self) -> int:
        return self._server.server_address[1]

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    def url(self, path: str = "/") -> str:
        return f"http://{self.host}:{self.port}{path}"

    def start(self) -> "BackgroundServer":
        if self._thread is not None:
            return self
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        if self._thread is None:
            return
        self._server.shutdown()
        self._server.server_close()
        self._thread.join(timeout=5)
        self._thread = None

    def __enter__(self) -> "BackgroundServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()


class UpstreamClient:
    """Keep-alive client: one persistent connection per calling thread.

    A connection dropped by the peer (idle timeout, server restart) is
    transparently reopened and the request retried once.
    """

    def __init__(self, host: str, port: int, timeout: float = 10.0) -> None:
        self.host = host
        self.port = port
        self.timeout = timeout
        self._local = threading.local()

    def _connection(self) -> http.client.HTTPConnection:
        conn = getattr(self._local, "conn", None)
        if conn is None:
            conn = http.client.HTTPConnection(self.host, self.port, timeout=self.timeout)
            conn.connect()
            conn.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self._local.conn = conn
        return conn

    def _drop_connection(self) -> None:
        conn = getattr(self._local, "conn", None)
        if conn is not None:
            try:
                conn.close()
            finally:
                self._local.conn = None

    def request(
        self,
        method: str,
        path: str,
        headers: Optional[Mapping[str, str]] = None,
        body: bytes = b"",
    ) -> ResponseData:
        sent_headers = dict(headers or {})
        last_error: Optional[Exception] = None
        for attempt in range(2):
            conn = self._connection()
            try:
                conn.request(method, path, body=body or None, headers=sent_headers)
                raw = conn.getresponse()
                data = raw.read()
                return ResponseData(
                    status=raw.status,
                    headers={name: value for name, value in raw.getheaders()},
                    body=data,
                )
            except (http.client.HTTPException, ConnectionError, socket.timeout, OSError) as exc:
                last_error = exc
                self._drop_connection()
        raise ConnectionError(f"upstream {self.host}:{self.port} unreachable: {last_error}")

    def close(self) -> None:
        self._drop_connection()
