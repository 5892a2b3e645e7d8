"""Host-side reference implementation of the client validation logic.

This is the oracle a browser-side verifier is conformance-tested against: it
checks the signature envelope, enforces the freshness window for dynamic
content, enforces version monotonicity for static content, and classifies
every failure with a precise incident kind.  ``validate`` is fail-closed:
every response yields exactly one verdict and nothing is forwarded without
an accept.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Collection, Mapping, Optional

from . import crypto, headers
from .crypto import ContentClass, TrustedKeySet, VerifyOutcome
from .manifest import StaticManifest


class IncidentKind(str, Enum):
    MISSING_ENVELOPE = "missing_envelope"
    INVALID_SIGNATURE = "invalid_signature"
    UNKNOWN_KEY = "unknown_key"
    STALE_TIMESTAMP = "stale_timestamp"
    FUTURE_TIMESTAMP = "future_timestamp"
    VERSION_DOWNGRADE = "version_downgrade"
    WORKER_MISMATCH = "worker_mismatch"


@dataclass(frozen=True)
class VerificationPolicy:
    """Client-side acceptance policy.

    ``max_age_seconds`` bounds how old a dynamic response's signed timestamp
    may be; ``clock_skew_seconds`` is tolerated in both directions on top of
    it.  Timestamps further in the future than the skew are rejected
    outright, so a signer whose key leaks cannot pre-date long-lived
    replayable responses.
    """

    max_age_seconds: int = 30
    clock_skew_seconds: int = 5
    enforce_version_monotonicity: bool = True
    require_envelope: bool = True

    def __post_init__(self) -> None:
        if self.max_age_seconds < 1:
            raise ValueError("max_age_seconds must be at least 1")
        if self.clock_skew_seconds < 0 or self.clock_skew_seconds > self.max_age_seconds:
            raise ValueError("clock_skew_seconds must be in [0, max_age_seconds]")


class VersionLedger:
    """Highest accepted build version per static resource path.

    Updates keep the maximum (compare-and-store under a lock), so concurrent
    validations of the same path are safe and values never decrease.  The
    ledger persists as a single JSON file written atomically.
    """

    def __init__(self, versions: Optional[Mapping[str, int]] = None) -> None:
        self._lock = threading.Lock()
        self._versions: dict[str, int] = dict(versions or {})

    def get(self, path: str) -> Optional[int]:
        with self._lock:
            return self._versions.get(path)

    def observe(self, path: str, version: int) -> None:
        """Record an accepted version; keeps the maximum ever seen."""
        with self._lock:
            current = self._versions.get(path)
            if current is None or version > current:
                self._versions[path] = version

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self._versions)

    def save(self, path: str) -> None:
        data = json.dumps(self.snapshot(), indent=2, sort_keys=True)
        tmp = f"{path}.tmp.{os.getpid()}"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(data)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str) -> "VersionLedger":
        if not os.path.exists(path):
            return cls()
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls({str(k): int(v) for k, v in raw.items()})


@dataclass(frozen=True)
class Verdict:
    """Outcome of validating one response: accept, or reject with a kind."""

    accepted: bool
    reason: Optional[IncidentKind] = None

    def __post_init__(self) -> None:
        if self.accepted and self.reason is not None:
            raise ValueError("accepted verdicts carry no reject reason")
        if not self.accepted and self.reason is None:
            raise ValueError("rejected verdicts must carry a reject reason")

    @classmethod
    def accept(cls) -> "Verdict":
        return cls(accepted=True)

    @classmethod
    def reject(cls, reason: IncidentKind) -> "Verdict":
        return cls(accepted=False, reason=reason)


def validate(
    path: str,
    response_headers: Mapping[str, str],
    body: bytes,
    *,
    policy: VerificationPolicy,
    keys: TrustedKeySet,
    ledger: VersionLedger,
    now: int,
) -> Verdict:
    """Validate one response; hostile input never raises.

    Acceptance requires, in order: a complete well-formed envelope (absent
    or unparseable headers count as a missing envelope), a valid signature
    under one of the trusted keys, freshness for dynamic content
    (``now - timestamp <= max_age + skew`` looking back, ``timestamp - now
    <= skew`` looking forward), and for static content a version at least
    the highest this ledger has accepted for the path.  Only an accepted
    static response updates the ledger; rejects never mutate it.

    With ``require_envelope`` off, a response with no envelope headers at
    all passes through unchecked (migration mode); any envelope that is
    present is still fully validated.
    """
    if not headers.has_envelope_headers(response_headers):
        if policy.require_envelope:
            return Verdict.reject(IncidentKind.MISSING_ENVELOPE)
        return Verdict.accept()
    try:
        envelope = headers.envelope_from_headers(response_headers)
    except headers.HeaderError:
        return Verdict.reject(IncidentKind.MISSING_ENVELOPE)

    outcome = crypto.verify(keys, envelope, body)
    if outcome is VerifyOutcome.UNKNOWN_KEY:
        return Verdict.reject(IncidentKind.UNKNOWN_KEY)
    if outcome is VerifyOutcome.INVALID_SIGNATURE:
        return Verdict.reject(IncidentKind.INVALID_SIGNATURE)

    if envelope.content_class is ContentClass.DYNAMIC:
        assert envelope.timestamp is not None
        if envelope.timestamp - now > policy.clock_skew_seconds:
            return Verdict.reject(IncidentKind.FUTURE_TIMESTAMP)
        if now - envelope.timestamp > policy.max_age_seconds + policy.clock_skew_seconds:
            return Verdict.reject(IncidentKind.STALE_TIMESTAMP)
        return Verdict.accept()

    assert envelope.version is not None
    if policy.enforce_version_monotonicity:
        highest = ledger.get(path)
        if highest is not None and envelope.version < highest:
            return Verdict.reject(IncidentKind.VERSION_DOWNGRADE)
        ledger.observe(path, envelope.version)
    return Verdict.accept()


def validate_from_manifest(
    path: str,
    body: bytes,
    *,
    manifest: StaticManifest,
    keys: TrustedKeySet,
) -> Verdict:
    """Validate predeployed static content against a preloaded manifest.

    Used when the delivery path (a static-content CDN) cannot carry the
    envelope headers: the manifest supplies version, key id and signature
    per resource path instead.  Paths absent from the manifest count as
    missing an envelope.
    """
    entry = manifest.get(path)
    if entry is None:
        return Verdict.reject(IncidentKind.MISSING_ENVELOPE)
    envelope = crypto.SignatureEnvelope(
        key_id=entry.key_id,
        content_class=ContentClass.STATIC,
        signature=entry.signature,
        version=entry.version,
    )
    outcome = crypto.verify(keys, envelope, body)
    if outcome is VerifyOutcome.UNKNOWN_KEY:
        return Verdict.reject(IncidentKind.UNKNOWN_KEY)
    if outcome is VerifyOutcome.INVALID_SIGNATURE:
        return Verdict.reject(IncidentKind.INVALID_SIGNATURE)
    return Verdict.accept()


class WorkerUpdateOutcome(str, Enum):
    UNCHANGED = "unchanged"
    LEGITIMATE_UPDATE = "legitimate_update"
    WORKER_MISMATCH = "worker_mismatch"
    INCONCLUSIVE = "inconclusive"


def worker_digest(script: bytes) -> str:
    return hashlib.sha256(script).hexdigest()


def build_published_worker_list(scripts: Collection[bytes]) -> bytes:
    """Serialize the published-worker digest list.

    The document is served as ordinary signed static content, so its own
    integrity rides on the envelope like everything else.
    """
    return json.dumps({"digests": sorted(worker_digest(s) for s in scripts)}).encode()


def parse_published_worker_list(payload: bytes) -> frozenset[str]:
    data = json.loads(payload.decode("utf-8"))
    return frozenset(str(d) for d in data["digests"])


def check_worker_update(
    active_script: bytes,
    fetched_script: bytes,
    published_digests: Collection[str],
) -> WorkerUpdateOutcome:
    """Compare a freshly fetched worker script against the active one.

    Byte-equal scripts are unchanged; otherwise the fetched script must
    digest to one of the published worker versions to count as a
    legitimate update.  Anything else is a worker swap and should go
    through the incident pipeline before the browser adopts the update.
    """
    if fetched_script == active_script:
        return WorkerUpdateOutcome.UNCHANGED
    if worker_digest(fetched_script) in set(published_digests):
        return WorkerUpdateOutcome.LEGITIMATE_UPDATE
    return WorkerUpdateOutcome.WORKER_MISMATCH


def check_worker_update_via(
    active_script: bytes,
    fetch: Callable[[], bytes],
    published_digests: Collection[str],
    *,
    attempts: int = 3,
    retry_delay: float = 0.2,
) -> WorkerUpdateOutcome:
    """Fetch-and-compare with retries; fetch failure is never a silent accept."""
    for attempt in range(attempts):
        try:
            fetched = fetch()
        except Exception:
            if attempt + 1 < attempts:
                time.sleep(retry_delay)
            continue
        return check_worker_update(active_script, fetched, published_digests)
    return WorkerUpdateOutcome.INCONCLUSIVE
