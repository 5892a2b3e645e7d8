"""End-to-end detection experiments over loopback HTTP.

One run wires origin -> gateway -> attack proxy -> verifying client on
loopback ports, drives a request grid across interception rates, and
scores every verdict against the proxy's ground-truth log by request id.
Scoring is a strict join: a missing or duplicate id is an error, not a
skipped row.

Timing scenarios:

    B   the verifier holds the genuine trusted keys before any load starts;
        the attacker tampers from the first request on.
    C   a clean warm-up half precedes enabling tampering mid-run.
    A   negative control: the attacker is in-path from the very first
        contact, so the client bootstraps trust through the attacker and
        verifies the attacker's own signatures.  Nothing is detected, by
        construction; results are reported honestly (all false negatives).

All components share a manual clock, so freshness windows are exercised
by advancing time explicitly rather than by sleeping.
"""

from __future__ import annotations

import hashlib
import logging
import statistics
import threading
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

from . import crypto
from .crypto import ContentClass, SignatureEnvelope, SigningKey, TrustedKeySet
from .gateway import GatewayConfig, SigningGateway
from .httpd import ResponseData, UpstreamClient
from .mitm import REQUEST_ID_HEADER, AttackConfig, TamperStrategy, TamperingProxy
from .origin import DemoOrigin
from .verifier import Verdict, VerificationPolicy, VersionLedger, validate

logger = logging.getLogger(__name__)

DEFAULT_PATHS: tuple[str, ...] = ("/index.html", "/style.css", "/logo.png", "/api/data")
DEFAULT_RULES: dict[str, ContentClass] = {
    ".html": ContentClass.STATIC,
    ".css": ContentClass.STATIC,
    ".png": ContentClass.STATIC,
    ".js": ContentClass.STATIC,
}


class ScoringError(RuntimeError):
    """Verdicts and the ground-truth log do not line up one-to-one."""


class ManualClock:
    """Shared test clock; advancing it is the only way time passes."""

    def __init__(self, start: int = 1_700_000_000) -> None:
        self._lock = threading.Lock()
        self._now = start

    def now(self) -> int:
        with self._lock:
            return self._now

    def advance(self, seconds: int) -> None:
        if seconds < 0:
            raise ValueError("clock only moves forward")
        with self._lock:
            self._now += seconds

    def __call__(self) -> int:
        return self.now()


def default_rate_grid() -> tuple[float, ...]:
    """Interception rates 1%..100% in steps of one percent."""
    return tuple(i / 100 for i in range(1, 101))


@dataclass(frozen=True)
class ScenarioSpec:
    """Parameters of one experiment run.

    Scenario "A" is allowed only as a negative control; it demonstrates
    that trust bootstrapped through an in-path attacker detects nothing.
    """

    scenario: str
    requests_per_rate: int = 1000
    rates: tuple[float, ...] = field(default_factory=default_rate_grid)
    strategies: tuple[TamperStrategy, ...] = (TamperStrategy.BODY_MUTATION,)
    seed: int = 0
    parallelism: int = 8
    paths: tuple[str, ...] = DEFAULT_PATHS

    def __post_init__(self) -> None:
        if self.scenario not in ("A", "B", "C"):
            raise ValueError("scenario must be one of A, B, C")
        if self.requests_per_rate < 1:
            raise ValueError("requests_per_rate must be positive")
        if not self.rates or any(not 0.0 <= r <= 1.0 for r in self.rates):
            raise ValueError("rates must be fractions within [0, 1]")
        if not self.strategies:
            raise ValueError("at least one tamper strategy is required")
        if self.parallelism < 1:
            raise ValueError("parallelism must be positive")
        if not self.paths:
            raise ValueError("at least one request path is required")

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "requests_per_rate": self.requests_per_rate,
            "rates": list(self.rates),
            "strategies": [s.value for s in self.strategies],
            "seed": self.seed,
            "parallelism": self.parallelism,
            "paths": list(self.paths),
        }


@dataclass(frozen=True)
class RateTally:
    """Detection counts for one interception rate."""

    rate: float
    requests: int
    tampered: int
    true_positives: int
    false_negatives: int
    false_positives: int
    true_negatives: int
    reject_reasons: dict[str, int]
    duration_seconds: float

    def __post_init__(self) -> None:
        if self.true_positives + self.false_negatives != self.tampered:
            raise ScoringError("TP + FN must equal the tampered count")
        total = (
            self.true_positives
            + self.false_negatives
            + self.false_positives
            + self.true_negatives
        )
        if total != self.requests:
            raise ScoringError("TP + FN + FP + TN must equal the request count")

    def to_dict(self) -> dict:
        return {
            "rate": self.rate,
            "requests": self.requests,
            "tampered": self.tampered,
            "true_positives": self.true_positives,
            "false_negatives": self.false_negatives,
            "false_positives": self.false_positives,
            "true_negatives": self.true_negatives,
            "reject_reasons": dict(sorted(self.reject_reasons.items())),
            "duration_seconds": self.duration_seconds,
        }


@dataclass(frozen=True)
class ScenarioResult:
    spec: ScenarioSpec
    tallies: tuple[RateTally, ...]
    wall_clock_seconds: float

    @property
    def total_false_negatives(self) -> int:
        return sum(t.false_negatives for t in self.tallies)

    @property
    def total_false_positives(self) -> int:
        return sum(t.false_positives for t in self.tallies)

    @property
    def total_requests(self) -> int:
        return sum(t.requests for t in self.tallies)

    def to_dict(self) -> dict:
        return {
            "spec": self.spec.to_dict(),
            "tallies": [t.to_dict() for t in self.tallies],
            "wall_clock_seconds": self.wall_clock_seconds,
            "total_requests": self.total_requests,
            "total_false_negatives": self.total_false_negatives,
            "total_false_positives": self.total_false_positives,
        }


class Testbed:
    """Loopback component stack shared by every scenario run.

    Scenario B/C topology:  client -> proxy -> gateway -> origin
    Scenario A topology:    client -> attacker gateway -> proxy -> origin
    (in A the attacker mutates plain origin traffic and then signs it with
    its own key, which is the key the client was tricked into trusting).
    """

    def __init__(
        self,
        *,
        scenario: str,
        attack: AttackConfig,
        clock: Optional[ManualClock] = None,
        build_version: int = 1,
        policy: Optional[VerificationPolicy] = None,
    ) -> None:
        self.scenario = scenario
        self.clock = clock if clock is not None else ManualClock()
        self.policy = policy if policy is not None else VerificationPolicy()
        self.origin = DemoOrigin()
        self._started = False

        signer = SigningKey.generate("attacker-k1" if scenario == "A" else "genuine-k1")
        self._signer = signer
        self.keys = TrustedKeySet.of(signer.public_entry())
        self.ledger = VersionLedger()

        # Components are constructed in start() because upstream ports are
        # only known once the previous hop is listening.
        self._attack = attack
        self._build_version = build_version
        self.gateway: Optional[SigningGateway] = None
        self.proxy: Optional[TamperingProxy] = None
        self.client: Optional[UpstreamClient] = None

    def start(self) -> "Testbed":
        if self._started:
            return self
        self.origin.start()
        if self.scenario == "A":
            self.proxy = TamperingProxy(self._attack, self.origin.host, self.origin.port)
            self.proxy.start()
            self.gateway = SigningGateway(
                GatewayConfig(
                    origin_host=self.proxy.host,
                    origin_port=self.proxy.port,
                    key=self._signer,
                    rules=dict(DEFAULT_RULES),
                    build_version=self._build_version,
                    clock=self.clock,
                )
            )
            self.gateway.start()
            front_host, front_port = self.gateway.host, self.gateway.port
        else:
            self.gateway = SigningGateway(
                GatewayConfig(
                    origin_host=self.origin.host,
                    origin_port=self.origin.port,
                    key=self._signer,
                    rules=dict(DEFAULT_RULES),
                    build_version=self._build_version,
                    clock=self.clock,
                )
            )
            self.gateway.start()
            self.proxy = TamperingProxy(self._attack, self.gateway.host, self.gateway.port)
            self.proxy.start()
            front_host, front_port = self.proxy.host, self.proxy.port
        self.client = UpstreamClient(front_host, front_port)
        self._started = True
        return self

    def stop(self) -> None:
        if self.client is not None:
            self.client.close()
        for component in (self.proxy, self.gateway, self.origin):
            if component is not None:
                component.stop()
        self._started = False

    def __enter__(self) -> "Testbed":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()

    def fetch(self, path: str, request_id: str) -> ResponseData:
        assert self.client is not None, "testbed not started"
        return self.client.request("GET", path, headers={REQUEST_ID_HEADER: request_id})

    def validate(self, path: str, response: ResponseData) -> Verdict:
        return validate(
            path,
            response.headers,
            response.body,
            policy=self.policy,
            keys=self.keys,
            ledger=self.ledger,
            now=self.clock.now(),
        )

    def reset_ledger(self) -> None:
        self.ledger = VersionLedger()


def _score(
    testbed: Testbed,
    verdicts: dict[str, Verdict],
    *,
    rate: float,
    duration: float,
) -> RateTally:
    assert testbed.proxy is not None
    records = testbed.proxy.log.records()
    if len(records) != len(verdicts):
        raise ScoringError(
            f"{len(records)} ground-truth records vs {len(verdicts)} verdicts"
        )
    tp = fn = fp = tn = tampered = 0
    reasons: Counter[str] = Counter()
    for record in records:
        verdict = verdicts.get(record.request_id)
        if verdict is None:
            raise ScoringError(f"no verdict for request {record.request_id!r}")
        if not verdict.accepted:
            assert verdict.reason is not None
            reasons[verdict.reason.value] += 1
        if record.tampered:
            tampered += 1
            if verdict.accepted:
                fn += 1
            else:
                tp += 1
        else:
            if verdict.accepted:
                tn += 1
            else:
                fp += 1
    return RateTally(
        rate=rate,
        requests=len(records),
        tampered=tampered,
        true_positives=tp,
        false_negatives=fn,
        false_positives=fp,
        true_negatives=tn,
        reject_reasons=dict(reasons),
        duration_seconds=duration,
    )


class _RequestDriver:
    """Issues a block of requests with bounded parallelism and collects verdicts."""

    def __init__(self, testbed: Testbed, spec: ScenarioSpec) -> None:
        self.testbed = testbed
        self.spec = spec
        self.executor = ThreadPoolExecutor(max_workers=spec.parallelism)
        self.verdicts: dict[str, Verdict] = {}
        self._lock = threading.Lock()
        self._sequence = 0

    def close(self) -> None:
        self.executor.shutdown(wait=True)

    def reset(self) -> None:
        with self._lock:
            self.verdicts.clear()

    def _one(self, request_id: str, path: str) -> None:
        response = self.testbed.fetch(path, request_id)
        verdict = self.testbed.validate(path, response)
        with self._lock:
            if request_id in self.verdicts:
                raise ScoringError(f"duplicate request id {request_id!r}")
            self.verdicts[request_id] = verdict

    def run_block(self, rate_index: int, count: int, paths: Optional[tuple[str, ...]] = None) -> None:
        """Send ``count`` requests cycling over the path mix; waits for all."""
        mix = paths if paths is not None else self.spec.paths
        futures = []
        for _ in range(count):
            with self._lock:
                self._sequence += 1
                seq = self._sequence
            request_id = f"r{rate_index:03d}-{seq:07d}"
            path = mix[seq % len(mix)]
            futures.append(self.executor.submit(self._one, request_id, path))
        for future in futures:
            future.result()


def _freshness_window(policy: VerificationPolicy) -> int:
    return policy.max_age_seconds + policy.clock_skew_seconds


def _run_one_rate(
    testbed: Testbed,
    driver: _RequestDriver,
    spec: ScenarioSpec,
    rate_index: int,
    rate: float,
) -> RateTally:
    """Orchestrate phases for a single interception rate and score it."""
    assert testbed.proxy is not None and testbed.gateway is not None
    proxy = testbed.proxy
    strategy = spec.strategies[0]
    pool = spec.strategies if len(spec.strategies) > 1 else ()
    in_play = set(spec.strategies)
    needs_recordings = bool(
        in_play & {TamperStrategy.REPLAY_RECORDED, TamperStrategy.VERSION_DOWNGRADE}
    )
    needs_version_bump = TamperStrategy.VERSION_DOWNGRADE in in_play

    testbed.reset_ledger()
    base_version = testbed.gateway.build_version
    driver.reset()
    started = time.monotonic()

    def attack_config(active_rate: float) -> AttackConfig:
        return AttackConfig(
            interception_rate=active_rate,
            strategy=strategy,
            seed=spec.seed,
            worker_path="/sw.js",
        )

    if spec.scenario in ("A", "B"):
        if needs_recordings:
            # Unscored capture pass so replay/downgrade material exists,
            # then make it stale (old timestamps / old build version).
            proxy.reset(attack_config(0.0))
            driver.run_block(rate_index, max(len(spec.paths), 8))
            if needs_version_bump:
                testbed.gateway.set_build_version(base_version + 1)
            testbed.clock.advance(_freshness_window(testbed.policy) + 1)
            # Re-warm so the verifier sees the new version / fresh clock
            # on genuine traffic before the attack begins.
            driver.run_block(rate_index, max(len(spec.paths), 8))
            driver.reset()
            proxy.reset(attack_config(rate), clear_buffer=False, strategy_pool=pool)
        else:
            proxy.reset(attack_config(rate), strategy_pool=pool)
        driver.run_block(rate_index, spec.requests_per_rate)
    else:  # Scenario C: clean first half, tampering enabled mid-run.
        half = spec.requests_per_rate // 2
        proxy.reset(attack_config(0.0))
        driver.run_block(rate_index, half)
        if needs_version_bump:
            testbed.gateway.set_build_version(base_version + 1)
        if needs_recordings:
            testbed.clock.advance(_freshness_window(testbed.policy) + 1)
            driver.run_block(rate_index, max(len(spec.paths), 8))
        proxy.reset(
            attack_config(rate), clear_log=False, clear_buffer=False, strategy_pool=pool
        )
        driver.run_block(rate_index, spec.requests_per_rate - half)

    duration = time.monotonic() - started
    tally = _score(testbed, driver.verdicts, rate=rate, duration=duration)
    if needs_version_bump:
        testbed.gateway.set_build_version(base_version)
    return tally


def run_scenario(
    spec: ScenarioSpec,
    *,
    policy: Optional[VerificationPolicy] = None,
    progress: Optional[Callable[[RateTally], None]] = None,
) -> ScenarioResult:
    """Run the full rate grid for one scenario and return scored tallies."""
    started = time.monotonic()
    attack = AttackConfig(
        interception_rate=0.0, strategy=spec.strategies[0], seed=spec.seed
    )
    tallies = []
    with Testbed(scenario=spec.scenario, attack=attack, policy=policy) as testbed:
        driver = _RequestDriver(testbed, spec)
        try:
            for rate_index, rate in enumerate(spec.rates):
                tally = _run_one_rate(testbed, driver, spec, rate_index, rate)
                tallies.append(tally)
                if progress is not None:
                    progress(tally)
        finally:
            driver.close()
    return ScenarioResult(
        spec=spec,
        tallies=tuple(tallies),
        wall_clock_seconds=time.monotonic() - started,
    )


@dataclass(frozen=True)
class BenchmarkResult:
    body_size: int
    iterations: int
    hash_mean_ns: float
    hash_p99_ns: float
    sign_mean_ns: float
    sign_p99_ns: float
    verify_mean_ns: float
    verify_p99_ns: float

    def to_dict(self) -> dict:
        return {
            "body_size": self.body_size,
            "iterations": self.iterations,
            "hash_mean_ns": self.hash_mean_ns,
            "hash_p99_ns": self.hash_p99_ns,
            "sign_mean_ns": self.sign_mean_ns,
            "sign_p99_ns": self.sign_p99_ns,
            "verify_mean_ns": self.verify_mean_ns,
            "verify_p99_ns": self.verify_p99_ns,
        }


def _p99(samples: list[int]) -> float:
    ordered = sorted(samples)
    return float(ordered[min(len(ordered) - 1, int(len(ordered) * 0.99))])


def run_benchmark(body_size: int, iterations: int) -> BenchmarkResult:
    """Time hash, sign, and verify over one body; means and p99 in ns."""
    if body_size < 0 or iterations < 1:
        raise ValueError("body_size must be >= 0 and iterations >= 1")
    body = bytes((i * 31) % 256 for i in range(body_size))
    key = SigningKey.generate("bench-k1")
    keys = TrustedKeySet.of(key.public_entry())
    envelope = SignatureEnvelope.for_dynamic(key.key_id, 1_700_000_000, bytes(8))
    signed = crypto.sign(key, envelope, body)

    hash_ns: list[int] = []
    sign_ns: list[int] = []
    verify_ns: list[int] = []
    for _ in range(iterations):
        t0 = time.perf_counter_ns()
        hashlib.sha256(body).digest()
        hash_ns.append(time.perf_counter_ns() - t0)

        t0 = time.perf_counter_ns()
        crypto.sign(key, envelope, body)
        sign_ns.append(time.perf_counter_ns() - t0)

        t0 = time.perf_counter_ns()
        crypto.verify(keys, signed, body)
        verify_ns.append(time.perf_counter_ns() - t0)

    return BenchmarkResult(
        body_size=body_size,
        iterations=iterations,
        hash_mean_ns=statistics.fmean(hash_ns),
        hash_p99_ns=_p99(hash_ns),
        sign_mean_ns=statistics.fmean(sign_ns),
        sign_p99_ns=_p99(sign_ns),
        verify_mean_ns=statistics.fmean(verify_ns),
        verify_p99_ns=_p99(verify_ns),
    )
