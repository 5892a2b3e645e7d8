"""Signed manifest for predeployed static assets."""

from __future__ import annotations

import pytest

from swsig.crypto import TrustedKeySet, VerifyOutcome
from swsig.manifest import ManifestError, StaticManifest, emit_manifest, verify_manifest


@pytest.fixture
def assets():
    return {"/index.html": b"<html></html>", "/app.css": b"body{}", "/logo.png": b"\x89PNG"}


def test_emit_covers_every_path(signing_key, assets):
    built = emit_manifest(list(assets), assets.__getitem__, key=signing_key, version=3)
    assert sorted(built.paths()) == sorted(assets)
    for path in assets:
        entry = built.get(path)
        assert entry is not None
        assert entry.version == 3
        assert entry.key_id == signing_key.key_id
        assert len(entry.signature) == 64


def test_verify_manifest_all_valid(signing_key, keyset, assets):
    built = emit_manifest(list(assets), assets.__getitem__, key=signing_key, version=3)
    outcomes = verify_manifest(built, assets.__getitem__, keys=keyset)
    assert set(outcomes) == set(assets)
    assert all(v is VerifyOutcome.VALID for v in outcomes.values())


def test_verify_manifest_flags_tampered_asset(signing_key, keyset, assets):
    built = emit_manifest(list(assets), assets.__getitem__, key=signing_key, version=3)
    mutated = dict(assets)
    mutated["/app.css"] = b"body{color:red}"
    outcomes = verify_manifest(built, mutated.__getitem__, keys=keyset)
    assert outcomes["/app.css"] is VerifyOutcome.INVALID_SIGNATURE
    assert outcomes["/index.html"] is VerifyOutcome.VALID


def test_unreadable_asset_error_names_the_path(signing_key):
    def reader(path: str) -> bytes:
        raise FileNotFoundError(path)

    with pytest.raises(ManifestError) as exc_info:
        emit_manifest(["/gone.css"], reader, key=signing_key, version=1)
    assert "/gone.css" in str(exc_info.value)


def test_json_roundtrip(signing_key, assets):
    built = emit_manifest(list(assets), assets.__getitem__, key=signing_key, version=5)
    restored = StaticManifest.from_json(built.to_json())
    assert restored == built


def test_untrusted_signer_everywhere(signing_key, assets):
    from swsig.crypto import SigningKey

    built = emit_manifest(list(assets), assets.__getitem__, key=signing_key, version=1)
    other = TrustedKeySet.of(SigningKey.generate("someone-else").public_entry())
    outcomes = verify_manifest(built, assets.__getitem__, keys=other)
    assert all(v is VerifyOutcome.UNKNOWN_KEY for v in outcomes.values())
