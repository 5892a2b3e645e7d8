"""Attack simulator sitting between client and gateway.

The proxy forwards requests upstream unchanged and tampers with a seeded
fraction of the responses on the way back.  The tamper decision and every
mutation are drawn from a generator derived from (master seed, request id),
so runs are reproducible regardless of request ordering or parallelism.
The per-response log is the experiment's ground truth: a record says
``tampered`` exactly when the emitted response differs from the upstream
one in body or envelope.

Strategies:

    body_mutation      XOR a random byte range of the body, headers intact
    envelope_strip     remove every X-SW-* header
    replay_recorded    substitute the earliest recorded response for the path
    version_downgrade  substitute a recorded static response with a lower version
    worker_swap        append an injected statement when the path is the
                       worker script
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import threading
from dataclasses import dataclass, field, replace as dc_replace
from enum import Enum
from typing import Optional, Sequence

from . import headers
from .httpd import BackgroundServer, Handler, ResponseData, UpstreamClient, filter_hop_headers

logger = logging.getLogger(__name__)

REQUEST_ID_HEADER = "X-Req-Id"


class TamperStrategy(str, Enum):
    BODY_MUTATION = "body_mutation"
    ENVELOPE_STRIP = "envelope_strip"
    REPLAY_RECORDED = "replay_recorded"
    VERSION_DOWNGRADE = "version_downgrade"
    WORKER_SWAP = "worker_swap"


@dataclass(frozen=True)
class AttackConfig:
    interception_rate: float
    strategy: TamperStrategy
    seed: int = 0
    replay_capacity: int = 256
    worker_path: str = "/sw.js"

    def __post_init__(self) -> None:
        if not 0.0 <= self.interception_rate <= 1.0:
            raise ValueError("interception_rate must be within [0, 1]")
        if self.replay_capacity < 1:
            raise ValueError("replay_capacity must be positive")

    @classmethod
    def from_file(cls, path: str) -> "AttackConfig":
        raw = json.loads(open(path, "r", encoding="utf-8").read())
        return cls(
            interception_rate=float(raw["interception_rate"]),
            strategy=TamperStrategy(raw["strategy"]),
            seed=int(raw.get("seed", 0)),
            replay_capacity=int(raw.get("replay_capacity", 256)),
            worker_path=str(raw.get("worker_path", "/sw.js")),
        )


@dataclass(frozen=True)
class TamperRecord:
    request_id: str
    path: str
    tampered: bool
    strategy: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "request_id": self.request_id,
            "path": self.path,
            "tampered": self.tampered,
            "strategy": self.strategy,
        }


class TamperLog:
    """Thread-safe append-only ground-truth log, one record per response."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._records: list[TamperRecord] = []

    def append(self, record: TamperRecord) -> None:
        with self._lock:
            self._records.append(record)

    def records(self) -> list[TamperRecord]:
        with self._lock:
            return list(self._records)

    def tampered_count(self) -> int:
        with self._lock:
            return sum(1 for r in self._records if r.tampered)

    def __len__(self) -> int:
        with self._lock:
            return len(self._records)

    def clear(self) -> None:
        with self._lock:
            self._records.clear()

    def write_jsonl(self, path: str) -> None:
        with self._lock:
            records = list(self._records)
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record.to_dict()) + "\n")


class ReplayBuffer:
    """Bounded first-wins capture of untampered responses, keyed by path.

    Keeping the earliest response per path means replays serve the stalest
    material available, which is exactly what a replay attacker wants.
    """

    def __init__(self, capacity: int) -> None:
        self.capacity = capacity
        self._lock = threading.Lock()
        self._responses: dict[str, ResponseData] = {}

    def record(self, path: str, response: ResponseData) -> None:
        with self._lock:
            if path in self._responses or len(self._responses) >= self.capacity:
                return
            self._responses[path] = ResponseData(
                status=response.status, headers=dict(response.headers), body=response.body
            )

    def get(self, path: str) -> Optional[ResponseData]:
        with self._lock:
            return self._responses.get(path)

    def clear(self) -> None:
        with self._lock:
            self._responses.clear()

    def __len__(self) -> int:
        with self._lock:
            return len(self._responses)


def _envelope_view(response: ResponseData) -> dict[str, str]:
    low = {}
    wanted = {name.lower() for name in headers.ENVELOPE_HEADERS}
    for name, value in response.headers.items():
        if name.lower() in wanted:
            low[name.lower()] = value
    return low


def _materially_different(a: ResponseData, b: ResponseData) -> bool:
    """True when the responses differ in body or envelope (or status)."""
    return (
        a.status != b.status
        or a.body != b.body
        or _envelope_view(a) != _envelope_view(b)
    )


class TamperEngine:
    """Pure tampering core; the HTTP proxy is a thin wrapper around it."""

    def __init__(
        self,
        config: AttackConfig,
        *,
        buffer: Optional[ReplayBuffer] = None,
        strategy_pool: Sequence[TamperStrategy] = (),
    ) -> None:
        self.config = config
        self.buffer = buffer if buffer is not None else ReplayBuffer(config.replay_capacity)
        # When a pool is given the per-request generator also picks which
        # strategy to apply, for mixed-strategy runs.
        self.strategy_pool = tuple(strategy_pool)

    def _rng(self, request_id: str) -> random.Random:
        digest = hashlib.sha256(f"{self.config.seed}|{request_id}".encode("utf-8")).digest()
        return random.Random(int.from_bytes(digest[:8], "big"))

    def apply(
        self, request_id: str, path: str, response: ResponseData
    ) -> tuple[ResponseData, TamperRecord]:
        """Maybe tamper with one response; always returns a ground-truth record."""
        rng = self._rng(request_id)
        intercept = rng.random() < self.config.interception_rate
        strategy = self.config.strategy
        if intercept and self.strategy_pool:
            strategy = rng.choice(self.strategy_pool)

        mutated: Optional[ResponseData] = None
        if intercept:
            mutated = self._apply_strategy(strategy, rng, path, response)

        if mutated is not None and _materially_different(response, mutated):
            record = TamperRecord(
                request_id=request_id, path=path, tampered=True, strategy=strategy.value
            )
            self._record_passthrough(path, response, tampered=True)
            return mutated, record

        # Pass-through (either not sampled, or the strategy had nothing to
        # work with and fell back).
        self._record_passthrough(path, response, tampered=False)
        return response, TamperRecord(request_id=request_id, path=path, tampered=False)

    def _record_passthrough(self, path: str, response: ResponseData, *, tampered: bool) -> None:
        # The buffer only captures genuine upstream responses; it does so
        # whether or not this particular response was delivered tampered,
        # since the attacker saw the genuine bytes either way.
        self.buffer.record(path, response)

    def _apply_strategy(
        self, strategy: TamperStrategy, rng: random.Random, path: str, response: ResponseData
    ) -> Optional[ResponseData]:
        """Produce the tampered response, or None when not applicable."""
        if strategy is TamperStrategy.BODY_MUTATION:
            return dc_replace(response, body=_mutate_body(rng, response.body))

        if strategy is TamperStrategy.ENVELOPE_STRIP:
            if not headers.has_envelope_headers(response.headers):
                return None
            return dc_replace(response, headers=headers.strip_envelope_headers(response.headers))

        if strategy is TamperStrategy.REPLAY_RECORDED:
            recorded = self.buffer.get(path)
            return recorded

        if strategy is TamperStrategy.VERSION_DOWNGRADE:
            recorded = self.buffer.get(path)
            if recorded is None:
                return None
            live_version = _static_version(response)
            old_version = _static_version(recorded)
            if live_version is None or old_version is None or old_version >= live_version:
                return None
            return recorded

        if strategy is TamperStrategy.WORKER_SWAP:
            if path != self.config.worker_path:
                return None
            injected = response.body + b"\n;self.__injected = true;"
            return dc_replace(response, body=injected)

        return None  # pragma: no cover - enum is closed


def _mutate_body(rng: random.Random, body: bytes) -> bytes:
    """XOR a short random range; injects bytes when the body is empty."""
    if not body:
        return bytes(rng.randrange(1, 256) for _ in range(8))
    start = rng.randrange(len(body))
    span = rng.randint(1, min(16, len(body) - start))
    mutated = bytearray(body)
    for offset in range(span):
        mutated[start + offset] ^= rng.randrange(1, 256)
    return bytes(mutated)


def _static_version(response: ResponseData) -> Optional[int]:
    value = response.header(headers.HEADER_VERSION)
    if value is None or not value.isdigit():
        return None
    return int(value)


class TamperingProxy:
    """HTTP proxy applying a TamperEngine to everything it forwards."""

    def __init__(
        self,
        config: AttackConfig,
        upstream_host: str,
        upstream_port: int,
        listen_host: str = "127.0.0.1",
        listen_port: int = 0,
    ) -> None:
        self._listen = (listen_host, listen_port)
        self._upstream = UpstreamClient(upstream_host, upstream_port)
        self.log = TamperLog()
        self.engine = TamperEngine(config)
        self._counter_lock = threading.Lock()
        self._counter = 0
        self._server: Optional[BackgroundServer] = None

    def reset(
        self,
        config: AttackConfig,
        *,
        clear_log: bool = True,
        clear_buffer: bool = True,
        strategy_pool: Sequence[TamperStrategy] = (),
    ) -> None:
        """Swap the attack parameters between experiment phases.

        The replay buffer can be carried over so recordings made in an
        earlier phase stay available to replay/downgrade strategies.
        """
        buffer = None if clear_buffer else self.engine.buffer
        self.engine = TamperEngine(config, buffer=buffer, strategy_pool=strategy_pool)
        if clear_log:
            self.log.clear()

    def _next_request_id(self) -> str:
        with self._counter_lock:
            self._counter += 1
            return f"anon-{self._counter}"

    def handle_request(
        self, method: str, path: str, request_headers: dict[str, str], body: bytes
    ) -> ResponseData:
        request_id = request_headers.get(REQUEST_ID_HEADER) or self._next_request_id()
        forward = filter_hop_headers(request_headers)
        forward.pop("Host", None)
        try:
            upstream = self._upstream.request(method, path, headers=forward, body=body)
        except ConnectionError:
            return ResponseData(status=502, headers={}, body=b"upstream unreachable")
        delivered, record = self.engine.apply(request_id, path, upstream)
        self.log.append(record)
        return delivered

    def _make_handler(self) -> type:
        proxy = self

        class ProxyHandler(Handler):
            def _serve(self) -> None:
                data = proxy.handle_request(
                    self.command, self.path, dict(self.headers.items()), self.read_body()
                )
                self.send_response_data(data)

            do_GET = do_HEAD = do_POST = do_PUT = do_DELETE = _serve

        return ProxyHandler

    def start(self) -> "TamperingProxy":
        if self._server is None:
            self._server = BackgroundServer(self._make_handler(), *self._listen)
            self._server.start()
        return self

    def stop(self) -> None:
        if self._server is not None:
            self._server.stop()
            self._server = None
        self._upstream.close()

    @property
    def port(self) -> int:
        assert self._server is not None, "proxy not started"
        return self._server.port

    @property
    def host(self) -> str:
        assert self._server is not None, "proxy not started"
        return self._server.host

    def __enter__(self) -> "TamperingProxy":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
