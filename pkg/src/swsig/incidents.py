"""Incident pipeline: what happens after a response is rejected.

Three actions run for every incident, none of which may suppress the
others: the client session token is cleared (idempotent), a user-facing
warning payload is produced, and the report is POSTed to every configured
endpoint, each expected to live on an independent origin.  Deliveries that
fail are queued in a local outbox for idempotent retry; the report id is
client-generated so collectors can deduplicate.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import urllib.error
import urllib.request
import uuid
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Optional, Sequence

from .verifier import IncidentKind, Verdict

logger = logging.getLogger(__name__)

DEFAULT_SESSION_TOKEN = "session"
REPORT_TIMEOUT_SECONDS = 3.0


class IncidentAction(str, Enum):
    SESSION_TERMINATED = "session_terminated"
    USER_WARNED = "user_warned"
    REPORTED = "reported"


@dataclass
class DeliveryResult:
    endpoint: str
    delivered: bool
    error: Optional[str] = None


@dataclass
class IncidentReport:
    """Structured record of one detected manipulation."""

    kind: IncidentKind
    path: str
    envelope: dict[str, str]
    detected_at: int
    actions: set[IncidentAction] = field(default_factory=set)
    report_id: str = field(default_factory=lambda: uuid.uuid4().hex)
    warning: Optional[dict[str, str]] = None
    deliveries: list[DeliveryResult] = field(default_factory=list)

    def to_payload(self) -> dict:
        """Wire format POSTed to report endpoints."""
        return {
            "report_id": self.report_id,
            "kind": self.kind.value,
            "path": self.path,
            "envelope": self.envelope,
            "detected_at": self.detected_at,
            "actions": sorted(action.value for action in self.actions),
        }


class SessionStore:
    """Minimal session state; clearing an absent token is a no-op."""

    def __init__(self, tokens: Optional[Mapping[str, str]] = None) -> None:
        self._lock = threading.Lock()
        self._tokens: dict[str, str] = dict(tokens or {})

    def set(self, name: str, value: str) -> None:
        with self._lock:
            self._tokens[name] = value

    def get(self, name: str) -> Optional[str]:
        with self._lock:
            return self._tokens.get(name)

    def clear(self, name: str) -> bool:
        """Remove a token; returns whether it existed."""
        with self._lock:
            return self._tokens.pop(name, None) is not None


class Outbox:
    """JSON-lines queue of report deliveries that could not be made."""

    def __init__(self, path: str) -> None:
        self.path = path
        self._lock = threading.Lock()

    def add(self, endpoint: str, payload: dict) -> None:
        line = json.dumps({"endpoint": endpoint, "payload": payload})
        with self._lock:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    def pending(self) -> list[dict]:
        with self._lock:
            return self._read()

    def _read(self) -> list[dict]:
        if not os.path.exists(self.path):
            return []
        items = []
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    items.append(json.loads(line))
        return items

    def flush(self, timeout: float = REPORT_TIMEOUT_SECONDS) -> tuple[int, int]:
        """Retry every queued delivery; returns (delivered, still_pending)."""
        with self._lock:
            items = self._read()
            remaining = []
            delivered = 0
            for item in items:
                if post_report(item["endpoint"], item["payload"], timeout=timeout):
                    delivered += 1
                else:
                    remaining.append(item)
            tmp = f"{self.path}.tmp.{os.getpid()}"
            with open(tmp, "w", encoding="utf-8") as fh:
                for item in remaining:
                    fh.write(json.dumps(item) + "\n")
            os.replace(tmp, self.path)
        return delivered, len(remaining)


def post_report(endpoint: str, payload: dict, *, timeout: float = REPORT_TIMEOUT_SECONDS) -> bool:
    """POST one report as JSON; any transport or HTTP error is a failed delivery."""
    body = json.dumps(payload).encode("utf-8")
    request = urllib.request.Request(
        endpoint, data=body, headers={"Content-Type": "application/json"}, method="POST"
    )
    try:
        with urllib.request.urlopen(request, timeout=timeout) as response:
            return 200 <= response.status < 300
    except (urllib.error.URLError, OSError, ValueError) as exc:
        logger.debug("report delivery to %s failed: %s", endpoint, exc)
        return False


def build_warning(kind: IncidentKind, *, contact_email: str, contact_phone: str) -> dict[str, str]:
    """User-facing warning payload shown when a session is terminated."""
    return {
        "title": "Connection integrity check failed",
        "message": (
            "A response from this site failed its integrity check "
            f"({kind.value.replace('_', ' ')}). Your session was closed as a "
            "precaution. If this keeps happening, contact the service provider."
        ),
        "contact_email": contact_email,
        "contact_phone": contact_phone,
    }


def handle_incident(
    verdict: Verdict,
    *,
    path: str,
    observed_envelope: Mapping[str, str],
    detected_at: int,
    session: SessionStore,
    reporters: Sequence[str],
    outbox: Optional[Outbox] = None,
    session_token: str = DEFAULT_SESSION_TOKEN,
    contact_email: str = "security@example.invalid",
    contact_phone: str = "+00 000 000 00 00",
    timeout: float = REPORT_TIMEOUT_SECONDS,
) -> IncidentReport:
    """Run the full incident response for a rejected verdict.

    Raises ``ValueError`` if handed an accept verdict.  Session termination
    and the user warning always happen; the report is then dispatched to
    every endpoint independently.  Failed deliveries go to the outbox (when
    one is configured) and never block the other endpoints or actions.
    """
    if verdict.accepted:
        raise ValueError("handle_incident requires a reject verdict")
    assert verdict.reason is not None

    report = IncidentReport(
        kind=verdict.reason,
        path=path,
        envelope=dict(observed_envelope),
        detected_at=detected_at,
    )

    session.clear(session_token)
    report.actions.add(IncidentAction.SESSION_TERMINATED)

    report.warning = build_warning(
        verdict.reason, contact_email=contact_email, contact_phone=contact_phone
    )
    report.actions.add(IncidentAction.USER_WARNED)

    # The wire payload carries the actions known at dispatch time; whether
    # reporting itself succeeded is only visible on the returned report.
    payload = report.to_payload()
    for endpoint in reporters:
        ok = post_report(endpoint, payload, timeout=timeout)
        report.deliveries.append(
            DeliveryResult(endpoint=endpoint, delivered=ok, error=None if ok else "unreachable")
        )
        if not ok and outbox is not None:
            outbox.add(endpoint, payload)
    if any(result.delivered for result in report.deliveries):
        report.actions.add(IncidentAction.REPORTED)
    return report
