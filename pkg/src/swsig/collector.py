"""Incident collector: receives reports from clients and aggregates them.

Reports are deduplicated by the client-generated ``report_id`` so that a
client retrying a delivery (for example after flushing its outbox) never
inflates the counts.  Ingested reports are appended to a JSONL file when
a path is configured, one JSON object per line.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid
from dataclasses import dataclass
from typing import Optional

from .httpd import BackgroundServer, Handler, ResponseData

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ("report_id", "kind", "path", "detected_at")


class IngestError(ValueError):
    """Raised for reports missing required fields or malformed values."""


@dataclass(frozen=True)
class IngestResult:
    receipt_id: str
    duplicate: bool

    def to_dict(self) -> dict:
        return {"receipt_id": self.receipt_id, "duplicate": self.duplicate}


class IncidentStore:
    """Thread-safe deduplicating store with per-kind and per-path counters."""

    def __init__(self, journal_path: Optional[str] = None) -> None:
        self._lock = threading.Lock()
        self._journal_path = journal_path
        self._by_report_id: dict[str, dict] = {}
        self._receipts: dict[str, str] = {}
        self._kind_counts: dict[str, int] = {}
        self._path_counts: dict[str, int] = {}

    def ingest(self, report: dict) -> IngestResult:
        """Validate and store one report; replays return the original receipt."""
        if not isinstance(report, dict):
            raise IngestError("report must be a JSON object")
        for name in REQUIRED_FIELDS:
            if name not in report:
                raise IngestError(f"missing required field: {name}")
        report_id = report["report_id"]
        if not isinstance(report_id, str) or not report_id:
            raise IngestError("report_id must be a non-empty string")
        if not isinstance(report["kind"], str) or not report["kind"]:
            raise IngestError("kind must be a non-empty string")
        if not isinstance(report["path"], str):
            raise IngestError("path must be a string")
        if not isinstance(report["detected_at"], (int, float)):
            raise IngestError("detected_at must be a number")

        with self._lock:
            if report_id in self._receipts:
                return IngestResult(receipt_id=self._receipts[report_id], duplicate=True)
            receipt_id = uuid.uuid4().hex
            self._receipts[report_id] = receipt_id
            self._by_report_id[report_id] = dict(report)
            self._kind_counts[report["kind"]] = self._kind_counts.get(report["kind"], 0) + 1
            self._path_counts[report["path"]] = self._path_counts.get(report["path"], 0) + 1
            journal_path = self._journal_path
        if journal_path is not None:
            line = json.dumps({"receipt_id": receipt_id, "report": report})
            with self._lock:
                with open(journal_path, "a", encoding="utf-8") as fh:
                    fh.write(line + "\n")
        return IngestResult(receipt_id=receipt_id, duplicate=False)

    def summary(self) -> dict:
        """Point-in-time aggregate; safe to call while ingesting."""
        with self._lock:
            return {
                "total_reports": len(self._by_report_id),
                "by_kind": dict(sorted(self._kind_counts.items())),
                "by_path": dict(sorted(self._path_counts.items())),
            }

    def get(self, report_id: str) -> Optional[dict]:
        with self._lock:
            report = self._by_report_id.get(report_id)
            return dict(report) if report is not None else None

    def __len__(self) -> int:
        with self._lock:
            return len(self._by_report_id)


class CollectorServer:
    """HTTP front end: POST /report to ingest, GET /summary to aggregate."""

    def __init__(
        self,
        store: Optional[IncidentStore] = None,
        listen_host: str = "127.0.0.1",
        listen_port: int = 0,
    ) -> None:
        self.store = store if store is not None else IncidentStore()
        self._listen = (listen_host, listen_port)
        self._server: Optional[BackgroundServer] = None

    def handle_request(self, method: str, path: str, body: bytes) -> ResponseData:
        if method == "POST" and path == "/report":
            try:
                report = json.loads(body.decode("utf-8"))
                result = self.store.ingest(report)
            except (IngestError, ValueError, UnicodeDecodeError) as exc:
                payload = json.dumps({"error": str(exc)}).encode("utf-8")
                return ResponseData(
                    status=400, headers={"Content-Type": "application/json"}, body=payload
                )
            payload = json.dumps(result.to_dict()).encode("utf-8")
            return ResponseData(
                status=200, headers={"Content-Type": "application/json"}, body=payload
            )
        if method == "GET" and path == "/summary":
            payload = json.dumps(self.store.summary()).encode("utf-8")
            return ResponseData(
                status=200, headers={"Content-Type": "application/json"}, body=payload
            )
        return ResponseData(status=404, headers={"Content-Type": "text/plain"}, body=b"not found")

    def _make_handler(self) -> type:
        collector = self

        class CollectorHandler(Handler):
            def _serve(self) -> None:
                data = collector.handle_request(self.command, self.path, self.read_body())
                self.send_response_data(data)

            do_GET = do_POST = _serve

        return CollectorHandler

    def start(self) -> "CollectorServer":
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
        assert self._server is not None, "collector not started"
        return self._server.port

    @property
    def host(self) -> str:
        assert self._server is not None, "collector not started"
        return self._server.host

    def report_url(self) -> str:
        return f"http://{self.host}:{self.port}/report"

    def __enter__(self) -> "CollectorServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()
