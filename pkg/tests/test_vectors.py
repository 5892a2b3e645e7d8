"""Conformance vector corpus, checked against an independent crypto tool.

The oracle half of this file deliberately avoids the package's own crypto
code: message bytes are rebuilt by hand from the raw vector fields, the
signature is DER-encoded by a local helper, the public key PEM is
assembled from fixed SPKI prefix bytes, and the actual verification is
done by the openssl command-line binary.
"""

from __future__ import annotations

import base64
import json
import shutil
import subprocess

import pytest

from swsig.vectors import (
    VectorError,
    VectorRecord,
    build_standard_corpus,
    evaluate,
    load_keyset,
    mismatches,
    read_vectors,
    save_keyset,
    standard_keys,
    standard_keyset,
    write_standard_files,
    write_vectors,
)

OPENSSL = shutil.which("openssl")

# ASN.1 SubjectPublicKeyInfo prefix for an uncompressed P-256 point:
# SEQUENCE { SEQUENCE { OID id-ecPublicKey, OID prime256v1 },
# BIT STRING (520 bits, no unused) } with the 65 point bytes appended.
_SPKI_PREFIX = bytes.fromhex(
    "3059301306072a8648ce3d020106082a8648ce3d030107034200"
)


def _der_integer(value: int) -> bytes:
    encoded = value.to_bytes((value.bit_length() + 7) // 8 or 1, "big")
    if encoded[0] & 0x80:
        encoded = b"\x00" + encoded
    return b"\x02" + bytes([len(encoded)]) + encoded


def _der_signature(raw: bytes) -> bytes:
    r = int.from_bytes(raw[:32], "big")
    s = int.from_bytes(raw[32:], "big")
    body = _der_integer(r) + _der_integer(s)
    return b"\x30" + bytes([len(body)]) + body


def _spki_pem(point: bytes) -> bytes:
    der = _SPKI_PREFIX + point
    b64 = base64.b64encode(der).decode("ascii")
    lines = "\n".join(b64[i : i + 64] for i in range(0, len(b64), 64))
    return f"-----BEGIN PUBLIC KEY-----\n{lines}\n-----END PUBLIC KEY-----\n".encode()


def _rebuild_message(record: VectorRecord) -> bytes:
    # Reassembled from raw fields, not via the package's encoder.
    if record.content_class == "dyn":
        prefix = f"SWSIGv1|dyn|{record.timestamp}|{record.nonce_hex}|"
    else:
        prefix = f"SWSIGv1|sta|{record.version}|"
    return prefix.encode("ascii") + record.body


def _openssl_verifies(point: bytes, record: VectorRecord, tmp_path) -> bool:
    pub = tmp_path / "pub.pem"
    sig = tmp_path / "sig.der"
    msg = tmp_path / "msg.bin"
    pub.write_bytes(_spki_pem(point))
    sig.write_bytes(_der_signature(record.signature))
    msg.write_bytes(_rebuild_message(record))
    proc = subprocess.run(
        [OPENSSL, "dgst", "-sha256", "-verify", str(pub), "-signature", str(sig), str(msg)],
        capture_output=True,
    )
    return proc.returncode == 0


@pytest.mark.skipif(OPENSSL is None, reason="openssl binary not available")
class TestOpenSSLOracle:
    def test_every_vector_agrees_with_openssl(self, tmp_path):
        keyset = standard_keyset()
        points = {entry.key_id: entry.point for entry in keyset.entries}
        checked_valid = checked_invalid = 0
        for record in build_standard_corpus():
            point = points.get(record.key_id)
            if record.expected_outcome == "unknown_key":
                assert point is None, "unknown-key vectors must name an untrusted key"
                continue
            assert point is not None
            verified = _openssl_verifies(point, record, tmp_path)
            if record.expected_outcome == "valid":
                assert verified, f"openssl rejected a valid vector: {record.comment}"
                checked_valid += 1
            else:
                assert not verified, f"openssl accepted a bad vector: {record.comment}"
                checked_invalid += 1
        assert checked_valid >= 10
        assert checked_invalid >= 5

    def test_rogue_signature_is_cryptographically_sound(self, tmp_path):
        # The unknown-key vector fails only because of trust, not math:
        # under the rogue key's own point, openssl accepts it.
        _, rogue = standard_keys()
        rogue_point = rogue.public_entry().point
        unknown = [
            record
            for record in build_standard_corpus()
            if record.expected_outcome == "unknown_key"
        ]
        assert unknown
        for record in unknown:
            assert _openssl_verifies(rogue_point, record, tmp_path)


class TestCorpus:
    def test_deterministic_regeneration(self):
        first = [record.to_dict() for record in build_standard_corpus()]
        second = [record.to_dict() for record in build_standard_corpus()]
        assert first == second

    def test_every_outcome_covered(self):
        outcomes = {record.expected_outcome for record in build_standard_corpus()}
        assert outcomes == {"valid", "invalid_signature", "unknown_key"}

    def test_local_verifier_matches_every_expected_outcome(self):
        corpus = build_standard_corpus()
        keys = standard_keyset()
        assert mismatches(keys, corpus) == []
        actual = [outcome.value for outcome in evaluate(keys, corpus)]
        assert actual == [record.expected_outcome for record in corpus]

    def test_file_roundtrip(self, tmp_path):
        path = tmp_path / "vectors.jsonl"
        corpus = build_standard_corpus()
        write_vectors(str(path), corpus)
        assert read_vectors(str(path)) == corpus

    def test_write_standard_files(self, tmp_path):
        vec = tmp_path / "vectors.jsonl"
        keys = tmp_path / "keys.json"
        count = write_standard_files(str(vec), str(keys))
        assert count == len(read_vectors(str(vec)))
        loaded = load_keyset(str(keys))
        assert mismatches(loaded, read_vectors(str(vec))) == []

    def test_keyset_roundtrip(self, tmp_path):
        path = tmp_path / "keys.json"
        save_keyset(str(path), standard_keyset())
        assert load_keyset(str(path)) == standard_keyset()

    def test_standard_keys_are_stable_across_calls(self):
        a_trusted, a_rogue = standard_keys()
        b_trusted, b_rogue = standard_keys()
        assert a_trusted.public_entry() == b_trusted.public_entry()
        assert a_rogue.public_entry() == b_rogue.public_entry()
        assert a_trusted.public_entry().point != a_rogue.public_entry().point

    def test_not_json_raises(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text("this is not json\n", encoding="utf-8")
        with pytest.raises(VectorError):
            read_vectors(str(path))

    def test_missing_field_raises(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text(json.dumps({"class": "dyn"}) + "\n", encoding="utf-8")
        with pytest.raises(VectorError):
            read_vectors(str(path))

    def test_blank_lines_tolerated(self, tmp_path):
        path = tmp_path / "vectors.jsonl"
        corpus = build_standard_corpus()[:2]
        lines = [json.dumps(record.to_dict()) for record in corpus]
        path.write_text("\n" + lines[0] + "\n\n" + lines[1] + "\n\n", encoding="utf-8")
        assert read_vectors(str(path)) == corpus
