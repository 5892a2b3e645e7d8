"""Reverse proxy that signs every origin response into its headers.

The gateway buffers the full origin response, classifies the path as static
or dynamic, builds the matching envelope (fresh timestamp and nonce for
dynamic content, the current build version for static content), signs the
body and attaches the ``X-SW-*`` headers.  The body itself is forwarded
byte-for-byte; origin headers other than hop-by-hop ones are preserved, and
any envelope headers the origin tried to set are dropped so only the
gateway can speak for the signature.

Static content is signed once per (path, version, body) and the signature
reused, matching how cached static assets are not re-signed per delivery.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional

from . import crypto, headers, manifest
from .crypto import ContentClass, SignatureEnvelope, SigningKey
from .httpd import BackgroundServer, Handler, ResponseData, UpstreamClient, filter_hop_headers

logger = logging.getLogger(__name__)

DEFAULT_MAX_BODY_BYTES = 16 * 1024 * 1024

ERROR_ORIGIN_UNREACHABLE = "origin_unreachable"
ERROR_BODY_TOO_LARGE = "body_too_large"


def _system_clock() -> int:
    return int(time.time())


@dataclass
class GatewayConfig:
    """Operating parameters for one gateway instance.

    ``rules`` maps path suffixes to a content class; the longest matching
    suffix wins and anything unmatched is dynamic, the safe default since
    dynamic content is freshness-checked.
    """

    origin_host: str
    origin_port: int
    key: SigningKey
    listen_host: str = "127.0.0.1"
    listen_port: int = 0
    rules: Mapping[str, ContentClass] = field(default_factory=dict)
    build_version: int = 1
    clock: Callable[[], int] = _system_clock
    nonce_source: Callable[[], bytes] = crypto.fresh_nonce
    max_body_bytes: int = DEFAULT_MAX_BODY_BYTES

    def __post_init__(self) -> None:
        if self.build_version < 1:
            raise ValueError("build_version must be at least 1")
        for suffix, klass in self.rules.items():
            if not isinstance(klass, ContentClass):
                raise ValueError(f"rule for {suffix!r} must map to a ContentClass")

    def classify(self, path: str) -> ContentClass:
        best: Optional[tuple[int, ContentClass]] = None
        for suffix, klass in self.rules.items():
            if path.endswith(suffix) and (best is None or len(suffix) > best[0]):
                best = (len(suffix), klass)
        return best[1] if best else ContentClass.DYNAMIC

    @classmethod
    def from_file(cls, path: str | Path) -> "GatewayConfig":
        """Load a JSON config file.

        Schema::

            {
              "listen": "127.0.0.1:8440",
              "origin": "127.0.0.1:8000",
              "key_file": "signing-key.pem",
              "key_id": "k1",
              "rules": {".css": "sta", ".png": "sta", ".html": "sta"},
              "build_version": 3,
              "max_body_bytes": 16777216
            }
        """
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        listen_host, listen_port = _split_address(raw.get("listen", "127.0.0.1:0"))
        origin_host, origin_port = _split_address(raw["origin"])
        key_pem = Path(raw["key_file"]).read_bytes()
        key = SigningKey.from_pem(raw["key_id"], key_pem)
        rules = {
            suffix: ContentClass(value) for suffix, value in (raw.get("rules") or {}).items()
        }
        return cls(
            origin_host=origin_host,
            origin_port=origin_port,
            key=key,
            listen_host=listen_host,
            listen_port=listen_port,
            rules=rules,
            build_version=int(raw.get("build_version", 1)),
            max_body_bytes=int(raw.get("max_body_bytes", DEFAULT_MAX_BODY_BYTES)),
        )


def _split_address(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    return host or "127.0.0.1", int(port)


class SigningGateway:
    """Signs proxied responses; key and build version swap atomically."""

    def __init__(self, config: GatewayConfig) -> None:
        self.config = config
        self._lock = threading.Lock()
        self._key = config.key
        self._build_version = config.build_version
        self._static_cache: dict[tuple[str, int, bytes], bytes] = {}
        self._upstream = UpstreamClient(config.origin_host, config.origin_port)
        self._server: Optional[BackgroundServer] = None

    @property
    def key(self) -> SigningKey:
        with self._lock:
            return self._key

    @property
    def build_version(self) -> int:
        with self._lock:
            return self._build_version

    def rotate_key(self, new_key: SigningKey) -> None:
        """Swap the signing key; in-flight responses may finish under the old one."""
        with self._lock:
            if new_key.key_id == self._key.key_id:
                raise crypto.CryptoError(
                    f"rotation requires a new key id, got {new_key.key_id!r} again"
                )
            self._key = new_key
            self._static_cache.clear()

    def set_build_version(self, version: int) -> None:
        if version < 1:
            raise ValueError("build_version must be at least 1")
        with self._lock:
            self._build_version = version

    def sign_response(self, path: str, origin_response: ResponseData) -> ResponseData:
        """Attach a signature envelope to one buffered origin response."""
        if len(origin_response.body) > self.config.max_body_bytes:
            return ResponseData(
                status=502,
                headers={headers.HEADER_GATEWAY_ERROR: ERROR_BODY_TOO_LARGE},
                body=b"",
            )
        with self._lock:
            key = self._key
            version = self._build_version
        body = origin_response.body
        content_class = self.config.classify(path)
        if content_class is ContentClass.STATIC:
            envelope = self._static_envelope(key, version, path, body)
        else:
            envelope = crypto.sign(
                key,
                SignatureEnvelope.for_dynamic(
                    key.key_id, self.config.clock(), self.config.nonce_source()
                ),
                body,
            )
        out_headers = headers.strip_envelope_headers(filter_hop_headers(origin_response.headers))
        out_headers.update(headers.envelope_to_headers(envelope))
        return ResponseData(status=origin_response.status, headers=out_headers, body=body)

    def _static_envelope(
        self, key: SigningKey, version: int, path: str, body: bytes
    ) -> SignatureEnvelope:
        cache_key = (path, version, hashlib.sha256(body).digest())
        with self._lock:
            cached = self._static_cache.get(cache_key)
        if cached is not None:
            return SignatureEnvelope(
                key_id=key.key_id,
                content_class=ContentClass.STATIC,
                signature=cached,
                version=version,
            )
        envelope = crypto.sign(key, SignatureEnvelope.for_static(key.key_id, version), body)
        with self._lock:
            self._static_cache[cache_key] = envelope.signature
        return envelope

    def handle_request(self, method: str, path: str, request_headers: Mapping[str, str], body: bytes) -> ResponseData:
        forward = filter_hop_headers(request_headers)
        forward.pop("Host", None)
        try:
            origin_response = self._upstream.request(method, path, headers=forward, body=body)
        except ConnectionError:
            return ResponseData(
                status=502,
                headers={headers.HEADER_GATEWAY_ERROR: ERROR_ORIGIN_UNREACHABLE},
                body=b"",
            )
        return self.sign_response(path, origin_response)

    def emit_manifest(self, paths, asset_bytes) -> manifest.StaticManifest:
        with self._lock:
            key = self._key
            version = self._build_version
        return manifest.emit_manifest(paths, asset_bytes, key=key, version=version)

    # -- HTTP server wiring ------------------------------------------------

    def _make_handler(self) -> type:
        gateway = self

        class GatewayHandler(Handler):
            def _serve(self) -> None:
                data = gateway.handle_request(
                    self.command, self.path, dict(self.headers.items()), self.read_body()
                )
                self.send_response_data(data)

            do_GET = do_HEAD = do_POST = do_PUT = do_DELETE = _serve

        return GatewayHandler

    def start(self) -> "SigningGateway":
        if self._server is None:
            self._server = BackgroundServer(
                self._make_handler(), self.config.listen_host, self.config.listen_port
            )
            self._server.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.stop()
            self._server = None
        self._upstream.close()

    @property
    def port(self) -> int:
        assert self._server is not None, "gateway not started"
        return self._server.port

    @property
    def host(self) -> str:
        assert self._server is not None, "gateway not started"
        return self._server.host

    def __enter__(self) -> "SigningGateway":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
