"""Incident collector: ingest, dedupe, counters, journal, HTTP front end."""

from __future__ import annotations

import json
import threading
import urllib.request

import pytest

from swsig.collector import CollectorServer, IncidentStore, IngestError


def _report(i: int, kind: str = "invalid_signature", path: str = "/p") -> dict:
    return {
        "report_id": f"r{i:05d}",
        "kind": kind,
        "path": path,
        "detected_at": 1_700_000_000 + i,
        "envelope": {},
        "actions": ["session_terminated"],
    }


class TestIncidentStore:
    def test_counters_match_report_log(self, tmp_path):
        journal = tmp_path / "journal.jsonl"
        store = IncidentStore(journal_path=str(journal))
        kinds = ("invalid_signature", "stale_timestamp", "missing_envelope", "version_downgrade")
        paths = ("/a", "/b", "/c")
        for i in range(1000):
            store.ingest(_report(i, kind=kinds[i % 4], path=paths[i % 3]))

        summary = store.summary()
        assert summary["total_reports"] == 1000
        assert len(store) == 1000
        assert sum(summary["by_kind"].values()) == 1000
        assert sum(summary["by_path"].values()) == 1000
        assert summary["by_kind"] == {k: 250 for k in kinds}
        assert summary["by_path"] == {"/a": 334, "/b": 333, "/c": 333}

        lines = journal.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 1000
        assert {json.loads(line)["report"]["report_id"] for line in lines} == {
            f"r{i:05d}" for i in range(1000)
        }

    def test_duplicate_returns_original_receipt_and_stores_once(self):
        store = IncidentStore()
        first = store.ingest(_report(1))
        second = store.ingest(_report(1))
        assert second.duplicate is True
        assert first.duplicate is False
        assert second.receipt_id == first.receipt_id
        assert len(store) == 1
        assert store.summary()["total_reports"] == 1

    def test_duplicate_does_not_bump_counters(self):
        store = IncidentStore()
        store.ingest(_report(1, kind="stale_timestamp"))
        store.ingest(_report(1, kind="stale_timestamp"))
        assert store.summary()["by_kind"] == {"stale_timestamp": 1}

    @pytest.mark.parametrize("missing", ["report_id", "kind", "path", "detected_at"])
    def test_missing_required_field_rejected(self, missing):
        store = IncidentStore()
        bad = _report(1)
        del bad[missing]
        with pytest.raises(IngestError, match=missing):
            store.ingest(bad)
        assert len(store) == 0

    def test_non_dict_rejected(self):
        store = IncidentStore()
        with pytest.raises(IngestError):
            store.ingest(["not", "a", "report"])  # type: ignore[arg-type]

    def test_get_returns_stored_report(self):
        store = IncidentStore()
        store.ingest(_report(7, path="/logo.png"))
        assert store.get("r00007")["path"] == "/logo.png"
        assert store.get("nope") is None

    def test_concurrent_ingest_is_consistent(self):
        store = IncidentStore()

        def worker(base: int) -> None:
            for i in range(100):
                store.ingest(_report(base * 100 + i))

        threads = [threading.Thread(target=worker, args=(t,)) for t in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        summary = store.summary()
        assert summary["total_reports"] == 800
        assert sum(summary["by_kind"].values()) == 800


class TestCollectorServer:
    @pytest.fixture
    def collector(self):
        with CollectorServer() as server:
            yield server

    def _post(self, collector, payload: bytes):
        request = urllib.request.Request(
            collector.report_url(),
            data=payload,
            headers={"Content-Type": "application/json"},
            method="POST",
        )
        try:
            with urllib.request.urlopen(request, timeout=3.0) as response:
                return response.status, json.loads(response.read())
        except urllib.error.HTTPError as error:
            return error.code, json.loads(error.read())

    def test_post_report_roundtrip(self, collector):
        status, body = self._post(collector, json.dumps(_report(1)).encode())
        assert status == 200
        assert body["duplicate"] is False
        assert body["receipt_id"]
        assert collector.store.get("r00001") is not None

    def test_post_duplicate_flagged_over_http(self, collector):
        payload = json.dumps(_report(2)).encode()
        self._post(collector, payload)
        status, body = self._post(collector, payload)
        assert status == 200
        assert body["duplicate"] is True

    def test_malformed_json_is_400_and_not_persisted(self, collector):
        status, body = self._post(collector, b"{not json")
        assert status == 400
        assert "error" in body
        assert len(collector.store) == 0

    def test_missing_field_is_400(self, collector):
        bad = _report(3)
        del bad["kind"]
        status, body = self._post(collector, json.dumps(bad).encode())
        assert status == 400
        assert "kind" in body["error"]
        assert len(collector.store) == 0

    def test_summary_endpoint(self, collector):
        self._post(collector, json.dumps(_report(1, kind="replayed_response")).encode())
        self._post(collector, json.dumps(_report(2, kind="replayed_response")).encode())
        url = f"http://{collector.host}:{collector.port}/summary"
        with urllib.request.urlopen(url, timeout=3.0) as response:
            summary = json.loads(response.read())
        assert summary["total_reports"] == 2
        assert summary["by_kind"] == {"replayed_response": 2}

    def test_unknown_route_is_404(self, collector):
        url = f"http://{collector.host}:{collector.port}/nope"
        with pytest.raises(urllib.error.HTTPError) as excinfo:
            urllib.request.urlopen(url, timeout=3.0)
        assert excinfo.value.code == 404
