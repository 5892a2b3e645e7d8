"""Response validation: decision order, freshness window, version ledger,
and worker-update checks."""

from __future__ import annotations

import base64
import dataclasses

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swsig.crypto import SIGNATURE_SIZE, SigningKey, TrustedKeySet
from swsig.headers import (
    HEADER_SIGNATURE,
    HEADER_TIMESTAMP,
    envelope_to_headers,
)
from swsig.manifest import emit_manifest
from swsig.verifier import (
    IncidentKind,
    Verdict,
    VerificationPolicy,
    VersionLedger,
    WorkerUpdateOutcome,
    build_published_worker_list,
    check_worker_update,
    check_worker_update_via,
    parse_published_worker_list,
    validate,
    validate_from_manifest,
    worker_digest,
)
from tests.conftest import make_dynamic, make_static

T0 = 1_700_000_000
POLICY = VerificationPolicy(max_age_seconds=30, clock_skew_seconds=5)
WINDOW = POLICY.max_age_seconds + POLICY.clock_skew_seconds


def _check(headers_map, body, keyset, *, now, ledger=None, policy=POLICY, path="/p"):
    return validate(
        path,
        headers_map,
        body,
        policy=policy,
        keys=keyset,
        ledger=ledger if ledger is not None else VersionLedger(),
        now=now,
    )


def _dyn_headers(key, body, ts):
    return envelope_to_headers(make_dynamic(key, body, ts, b"\x0a" * 8))


def _sta_headers(key, body, version):
    return envelope_to_headers(make_static(key, body, version))


class TestVerdict:
    def test_accept_carries_no_reason(self):
        assert Verdict.accept().reason is None

    def test_reject_requires_reason(self):
        with pytest.raises(ValueError):
            Verdict(accepted=False)

    def test_accept_with_reason_is_invalid(self):
        with pytest.raises(ValueError):
            Verdict(accepted=True, reason=IncidentKind.STALE_TIMESTAMP)


class TestPolicy:
    def test_defaults_are_valid(self):
        policy = VerificationPolicy()
        assert policy.max_age_seconds == 30
        assert policy.clock_skew_seconds == 5

    def test_zero_max_age_rejected(self):
        with pytest.raises(ValueError):
            VerificationPolicy(max_age_seconds=0)

    def test_skew_beyond_max_age_rejected(self):
        with pytest.raises(ValueError):
            VerificationPolicy(max_age_seconds=10, clock_skew_seconds=11)


class TestDecisionOrder:
    def test_clean_dynamic_accepted(self, signing_key, keyset):
        verdict = _check(_dyn_headers(signing_key, b"ok", T0), b"ok", keyset, now=T0)
        assert verdict.accepted

    def test_no_headers_is_missing_envelope(self, keyset):
        verdict = _check({"Content-Type": "text/html"}, b"x", keyset, now=T0)
        assert verdict.reason is IncidentKind.MISSING_ENVELOPE

    def test_unparseable_envelope_is_missing_envelope(self, signing_key, keyset):
        headers_map = _dyn_headers(signing_key, b"x", T0)
        headers_map[HEADER_TIMESTAMP] = "not-a-number"
        verdict = _check(headers_map, b"x", keyset, now=T0)
        assert verdict.reason is IncidentKind.MISSING_ENVELOPE

    def test_partial_envelope_is_missing_envelope(self, signing_key, keyset):
        headers_map = _dyn_headers(signing_key, b"x", T0)
        del headers_map[HEADER_SIGNATURE]
        verdict = _check(headers_map, b"x", keyset, now=T0)
        assert verdict.reason is IncidentKind.MISSING_ENVELOPE

    def test_wellformed_bad_signature_is_invalid_signature(self, signing_key, keyset):
        headers_map = _dyn_headers(signing_key, b"x", T0)
        headers_map[HEADER_SIGNATURE] = base64.b64encode(b"\x01" * SIGNATURE_SIZE).decode()
        verdict = _check(headers_map, b"x", keyset, now=T0)
        assert verdict.reason is IncidentKind.INVALID_SIGNATURE

    def test_tampered_body_is_invalid_signature(self, signing_key, keyset):
        verdict = _check(_dyn_headers(signing_key, b"x", T0), b"y", keyset, now=T0)
        assert verdict.reason is IncidentKind.INVALID_SIGNATURE

    def test_unknown_signer_reported(self, keyset):
        stranger = SigningKey.generate("stranger")
        verdict = _check(_dyn_headers(stranger, b"x", T0), b"x", keyset, now=T0)
        assert verdict.reason is IncidentKind.UNKNOWN_KEY

    def test_optional_envelope_mode_passes_unsigned(self, keyset):
        relaxed = VerificationPolicy(require_envelope=False)
        verdict = _check({"Content-Type": "text/css"}, b"x", keyset, now=T0, policy=relaxed)
        assert verdict.accepted

    def test_optional_envelope_mode_still_checks_present_envelopes(self, signing_key, keyset):
        relaxed = VerificationPolicy(require_envelope=False)
        verdict = _check(
            _dyn_headers(signing_key, b"x", T0), b"tampered", keyset, now=T0, policy=relaxed
        )
        assert verdict.reason is IncidentKind.INVALID_SIGNATURE


class TestFreshness:
    def test_boundary_three_points(self, signing_key, keyset):
        headers_map = _dyn_headers(signing_key, b"x", T0)
        at_window = _check(headers_map, b"x", keyset, now=T0 + WINDOW)
        past_window = _check(headers_map, b"x", keyset, now=T0 + WINDOW + 1)
        before_window = _check(headers_map, b"x", keyset, now=T0 + WINDOW - 1)
        assert before_window.accepted
        assert at_window.accepted
        assert past_window.reason is IncidentKind.STALE_TIMESTAMP

    def test_future_boundary(self, signing_key, keyset):
        headers_map = _dyn_headers(signing_key, b"x", T0)
        at_skew = _check(headers_map, b"x", keyset, now=T0 - POLICY.clock_skew_seconds)
        past_skew = _check(headers_map, b"x", keyset, now=T0 - POLICY.clock_skew_seconds - 1)
        assert at_skew.accepted
        assert past_skew.reason is IncidentKind.FUTURE_TIMESTAMP

    def test_replay_within_window_accepted_residual_risk(self, signing_key, keyset):
        # A recorded response replayed inside the freshness window still
        # validates; the window bounds the exposure, it does not remove it.
        headers_map = _dyn_headers(signing_key, b"x", T0)
        assert _check(headers_map, b"x", keyset, now=T0 + 3).accepted
        assert _check(headers_map, b"x", keyset, now=T0 + 3).accepted

    def test_static_content_is_not_freshness_checked(self, signing_key, keyset):
        headers_map = _sta_headers(signing_key, b"asset", 1)
        verdict = _check(headers_map, b"asset", keyset, now=T0 + 10_000_000)
        assert verdict.accepted

    @given(age=st.integers(min_value=0, max_value=200))
    @settings(max_examples=60)
    def test_freshness_predicate_matches_window_arithmetic(self, signing_key, keyset, age):
        headers_map = _dyn_headers(signing_key, b"x", T0)
        verdict = _check(headers_map, b"x", keyset, now=T0 + age)
        assert verdict.accepted == (age <= WINDOW)


class TestVersionMonotonicity:
    def test_downgrade_rejected_after_higher_version_seen(self, signing_key, keyset):
        ledger = VersionLedger()
        ok = _check(_sta_headers(signing_key, b"a", 5), b"a", keyset, now=T0, ledger=ledger)
        assert ok.accepted
        verdict = _check(_sta_headers(signing_key, b"a", 4), b"a", keyset, now=T0, ledger=ledger)
        assert verdict.reason is IncidentKind.VERSION_DOWNGRADE

    def test_equal_version_accepted(self, signing_key, keyset):
        ledger = VersionLedger()
        _check(_sta_headers(signing_key, b"a", 5), b"a", keyset, now=T0, ledger=ledger)
        verdict = _check(_sta_headers(signing_key, b"a", 5), b"a", keyset, now=T0, ledger=ledger)
        assert verdict.accepted

    def test_upgrade_accepted_and_recorded(self, signing_key, keyset):
        ledger = VersionLedger()
        _check(_sta_headers(signing_key, b"a", 5), b"a", keyset, now=T0, ledger=ledger)
        verdict = _check(_sta_headers(signing_key, b"a", 6), b"a", keyset, now=T0, ledger=ledger)
        assert verdict.accepted
        assert ledger.get("/p") == 6

    def test_rejects_do_not_move_the_ledger(self, signing_key, keyset):
        ledger = VersionLedger()
        _check(_sta_headers(signing_key, b"a", 5), b"a", keyset, now=T0, ledger=ledger)
        # Tampered body at a higher version: rejected, so 9 must not stick.
        _check(_sta_headers(signing_key, b"a", 9), b"tampered", keyset, now=T0, ledger=ledger)
        assert ledger.get("/p") == 5
        # Downgrade reject must not touch it either.
        _check(_sta_headers(signing_key, b"a", 1), b"a", keyset, now=T0, ledger=ledger)
        assert ledger.get("/p") == 5

    def test_ledger_is_per_path(self, signing_key, keyset):
        ledger = VersionLedger()
        _check(_sta_headers(signing_key, b"a", 5), b"a", keyset, now=T0, ledger=ledger, path="/one")
        verdict = _check(
            _sta_headers(signing_key, b"a", 1), b"a", keyset, now=T0, ledger=ledger, path="/two"
        )
        assert verdict.accepted

    def test_monotonicity_can_be_disabled(self, signing_key, keyset):
        relaxed = VerificationPolicy(enforce_version_monotonicity=False)
        ledger = VersionLedger({"/p": 10})
        verdict = _check(
            _sta_headers(signing_key, b"a", 1), b"a", keyset, now=T0, ledger=ledger, policy=relaxed
        )
        assert verdict.accepted

    @given(versions=st.lists(st.integers(min_value=0, max_value=1000), min_size=1, max_size=40))
    def test_ledger_tracks_running_maximum(self, versions):
        ledger = VersionLedger()
        best = None
        for version in versions:
            ledger.observe("/p", version)
            best = version if best is None else max(best, version)
            assert ledger.get("/p") == best

    def test_ledger_save_load_roundtrip(self, tmp_path):
        ledger = VersionLedger({"/a": 3, "/b": 7})
        target = tmp_path / "ledger.json"
        ledger.save(str(target))
        assert VersionLedger.load(str(target)).snapshot() == {"/a": 3, "/b": 7}
        leftovers = [p for p in tmp_path.iterdir() if p.name != "ledger.json"]
        assert leftovers == []

    def test_ledger_load_missing_file_is_empty(self, tmp_path):
        assert VersionLedger.load(str(tmp_path / "absent.json")).snapshot() == {}


class TestManifestValidation:
    def test_manifest_roundtrip_accepts(self, signing_key, keyset):
        bodies = {"/app.css": b"body{}", "/app.js": b"1;"}
        built = emit_manifest(list(bodies), bodies.__getitem__, key=signing_key, version=2)
        for path, body in bodies.items():
            verdict = validate_from_manifest(path, body, manifest=built, keys=keyset)
            assert verdict.accepted

    def test_absent_path_is_missing_envelope(self, signing_key, keyset):
        built = emit_manifest(["/a"], lambda _: b"x", key=signing_key, version=1)
        verdict = validate_from_manifest("/other", b"x", manifest=built, keys=keyset)
        assert verdict.reason is IncidentKind.MISSING_ENVELOPE

    def test_tampered_asset_rejected(self, signing_key, keyset):
        built = emit_manifest(["/a"], lambda _: b"x", key=signing_key, version=1)
        verdict = validate_from_manifest("/a", b"y", manifest=built, keys=keyset)
        assert verdict.reason is IncidentKind.INVALID_SIGNATURE

    def test_untrusted_manifest_signer_rejected(self, signing_key):
        built = emit_manifest(["/a"], lambda _: b"x", key=signing_key, version=1)
        other_keys = TrustedKeySet.of(SigningKey.generate("other").public_entry())
        verdict = validate_from_manifest("/a", b"x", manifest=built, keys=other_keys)
        assert verdict.reason is IncidentKind.UNKNOWN_KEY


class TestWorkerUpdate:
    ACTIVE = b"// worker v1\n"
    NEXT = b"// worker v2\n"
    EVIL = b"// worker v1\n;steal();"

    def test_unchanged(self):
        outcome = check_worker_update(self.ACTIVE, self.ACTIVE, [])
        assert outcome is WorkerUpdateOutcome.UNCHANGED

    def test_legitimate_update(self):
        published = parse_published_worker_list(
            build_published_worker_list([self.ACTIVE, self.NEXT])
        )
        outcome = check_worker_update(self.ACTIVE, self.NEXT, published)
        assert outcome is WorkerUpdateOutcome.LEGITIMATE_UPDATE

    def test_swap_detected(self):
        published = parse_published_worker_list(
            build_published_worker_list([self.ACTIVE, self.NEXT])
        )
        outcome = check_worker_update(self.ACTIVE, self.EVIL, published)
        assert outcome is WorkerUpdateOutcome.WORKER_MISMATCH

    def test_published_list_is_order_independent(self):
        a = build_published_worker_list([self.ACTIVE, self.NEXT])
        b = build_published_worker_list([self.NEXT, self.ACTIVE])
        assert a == b

    def test_digest_is_sha256_hex(self):
        import hashlib

        assert worker_digest(b"abc") == hashlib.sha256(b"abc").hexdigest()

    def test_fetch_failure_is_inconclusive_after_retries(self):
        calls = []

        def failing_fetch() -> bytes:
            calls.append(1)
            raise OSError("down")

        outcome = check_worker_update_via(
            self.ACTIVE, failing_fetch, [], attempts=3, retry_delay=0.0
        )
        assert outcome is WorkerUpdateOutcome.INCONCLUSIVE
        assert len(calls) == 3

    def test_fetch_recovers_on_retry(self):
        attempts = iter([OSError("down"), self.ACTIVE])

        def flaky_fetch() -> bytes:
            item = next(attempts)
            if isinstance(item, Exception):
                raise item
            return item

        outcome = check_worker_update_via(
            self.ACTIVE, flaky_fetch, [], attempts=3, retry_delay=0.0
        )
        assert outcome is WorkerUpdateOutcome.UNCHANGED
