"""Conformance vectors shared across independent verifier implementations.

A vector file is JSONL: one record per line carrying the wire fields of a
signed response (class, timestamp/nonce or version, body, key id,
signature) plus the outcome a correct verifier must produce.  Any
implementation — this package, a browser client, or a command-line tool —
can consume the same file and must agree on every line.

The standard corpus is built from keys derived from fixed private scalars
and RFC 6979 deterministic signing, so regenerating the file yields
byte-identical vectors.
"""

from __future__ import annotations

import base64
import hashlib
import json
import logging
from dataclasses import dataclass
from typing import Optional

from .crypto import (
    ContentClass,
    SignatureEnvelope,
    SigningKey,
    TrustedKeySet,
    VerifyOutcome,
    _CURVE_ORDER,
    sign,
    verify,
)

logger = logging.getLogger(__name__)


class VectorError(ValueError):
    """Raised for files that do not parse as vector records."""


@dataclass(frozen=True)
class VectorRecord:
    """One signed response plus the verdict a verifier must reach."""

    content_class: str
    body: bytes
    key_id: str
    signature: bytes
    expected_outcome: str
    timestamp: Optional[int] = None
    nonce_hex: Optional[str] = None
    version: Optional[int] = None
    comment: str = ""

    def to_dict(self) -> dict:
        data: dict = {
            "class": self.content_class,
            "body_b64": base64.b64encode(self.body).decode("ascii"),
            "key_id": self.key_id,
            "signature_b64": base64.b64encode(self.signature).decode("ascii"),
            "expected_outcome": self.expected_outcome,
        }
        if self.timestamp is not None:
            data["timestamp"] = self.timestamp
        if self.nonce_hex is not None:
            data["nonce_hex"] = self.nonce_hex
        if self.version is not None:
            data["version"] = self.version
        if self.comment:
            data["comment"] = self.comment
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "VectorRecord":
        try:
            return cls(
                content_class=str(data["class"]),
                body=base64.b64decode(data["body_b64"], validate=True),
                key_id=str(data["key_id"]),
                signature=base64.b64decode(data["signature_b64"], validate=True),
                expected_outcome=str(data["expected_outcome"]),
                timestamp=int(data["timestamp"]) if "timestamp" in data else None,
                nonce_hex=str(data["nonce_hex"]) if "nonce_hex" in data else None,
                version=int(data["version"]) if "version" in data else None,
                comment=str(data.get("comment", "")),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise VectorError(f"malformed vector record: {exc}") from exc

    def to_envelope(self) -> SignatureEnvelope:
        return SignatureEnvelope(
            key_id=self.key_id,
            content_class=ContentClass(self.content_class),
            signature=self.signature,
            timestamp=self.timestamp,
            nonce=bytes.fromhex(self.nonce_hex) if self.nonce_hex is not None else None,
            version=self.version,
        )


def write_vectors(path: str, records: list[VectorRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


def read_vectors(path: str) -> list[VectorRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                data = json.loads(line)
            except ValueError as exc:
                raise VectorError(f"line {line_no}: not JSON: {exc}") from exc
            records.append(VectorRecord.from_dict(data))
    return records


def save_keyset(path: str, keys: TrustedKeySet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(keys.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_keyset(path: str) -> TrustedKeySet:
    with open(path, "r", encoding="utf-8") as fh:
        return TrustedKeySet.from_dict(json.load(fh))


def conformance_signing_key(label: str, key_id: str) -> SigningKey:
    """Key derived from a fixed label; same label, same key, every run."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    scalar = int.from_bytes(digest, "big") % (_CURVE_ORDER - 1) + 1
    return SigningKey.from_scalar(key_id, scalar)


# Fixed inputs of the standard corpus.  Changing any of these changes the
# published vector file, so treat them as frozen.
_CORPUS_TIMESTAMP = 1700000000
_CORPUS_NONCE_HEX = "00112233445566aa"
_CORPUS_BODIES: tuple[tuple[str, bytes], ...] = (
    ("empty body", b""),
    ("short text", b"hello, world"),
    ("json payload", b'{"sequence": 7, "status": "ok"}'),
    ("all byte values", bytes(range(256))),
    ("pipe and prefix lookalike", b"SWSIGv1|dyn|1|00|trap"),
)


def standard_keys() -> tuple[SigningKey, SigningKey]:
    """The in-set signing key and the deliberately untrusted one."""
    trusted = conformance_signing_key("conformance-vectors/trusted", "vector-key-1")
    rogue = conformance_signing_key("conformance-vectors/rogue", "rogue-key-1")
    return trusted, rogue


def standard_keyset() -> TrustedKeySet:
    trusted, _ = standard_keys()
    return TrustedKeySet.of(trusted.public_entry())


def build_standard_corpus() -> list[VectorRecord]:
    """Deterministic corpus covering both classes and every verify outcome."""
    trusted, rogue = standard_keys()
    records: list[VectorRecord] = []

    def add(envelope: SignatureEnvelope, body: bytes, outcome: VerifyOutcome, comment: str) -> None:
        records.append(
            VectorRecord(
                content_class=envelope.content_class.value,
                body=body,
                key_id=envelope.key_id,
                signature=envelope.signature,
                expected_outcome=outcome.value,
                timestamp=envelope.timestamp,
                nonce_hex=envelope.nonce.hex() if envelope.nonce is not None else None,
                version=envelope.version,
                comment=comment,
            )
        )

    nonce = bytes.fromhex(_CORPUS_NONCE_HEX)
    for label, body in _CORPUS_BODIES:
        dyn = sign(
            trusted,
            SignatureEnvelope.for_dynamic(trusted.key_id, _CORPUS_TIMESTAMP, nonce),
            body,
            deterministic=True,
        )
        add(dyn, body, VerifyOutcome.VALID, f"dynamic, {label}")

        sta = sign(trusted, SignatureEnvelope.for_static(trusted.key_id, 3), body, deterministic=True)
        add(sta, body, VerifyOutcome.VALID, f"static, {label}")

    # Tampered body: signature made for different bytes.
    body = b"original payload"
    dyn = sign(
        trusted,
        SignatureEnvelope.for_dynamic(trusted.key_id, _CORPUS_TIMESTAMP, nonce),
        body,
        deterministic=True,
    )
    add(dyn, b"original payloaD", VerifyOutcome.INVALID_SIGNATURE, "dynamic, body altered after signing")

    sta = sign(trusted, SignatureEnvelope.for_static(trusted.key_id, 3), body, deterministic=True)
    add(sta, body + b"!", VerifyOutcome.INVALID_SIGNATURE, "static, body extended after signing")

    # Flipped signature bit.
    flipped = bytearray(dyn.signature)
    flipped[0] ^= 0x01
    broken = SignatureEnvelope(
        key_id=dyn.key_id,
        content_class=dyn.content_class,
        signature=bytes(flipped),
        timestamp=dyn.timestamp,
        nonce=dyn.nonce,
    )
    add(broken, body, VerifyOutcome.INVALID_SIGNATURE, "dynamic, one signature bit flipped")

    # Field swapped after signing: same body, different timestamp.
    shifted = SignatureEnvelope(
        key_id=dyn.key_id,
        content_class=dyn.content_class,
        signature=dyn.signature,
        timestamp=_CORPUS_TIMESTAMP + 1,
        nonce=dyn.nonce,
    )
    add(shifted, body, VerifyOutcome.INVALID_SIGNATURE, "dynamic, timestamp altered after signing")

    # Class confusion: a static signature presented as covering a dynamic
    # envelope with the version squeezed into the timestamp field.
    confused = SignatureEnvelope(
        key_id=sta.key_id,
        content_class=ContentClass.DYNAMIC,
        signature=sta.signature,
        timestamp=3,
        nonce=nonce,
    )
    add(confused, body, VerifyOutcome.INVALID_SIGNATURE, "static signature replayed as dynamic")

    # Signed by a key the verifier does not trust.
    foreign = sign(
        rogue,
        SignatureEnvelope.for_dynamic(rogue.key_id, _CORPUS_TIMESTAMP, nonce),
        body,
        deterministic=True,
    )
    add(foreign, body, VerifyOutcome.UNKNOWN_KEY, "dynamic, signer not in trusted set")

    # All-zero signature (r = s = 0 is outside the valid range).
    zeroed = SignatureEnvelope(
        key_id=trusted.key_id,
        content_class=ContentClass.STATIC,
        signature=bytes(64),
        version=3,
    )
    add(zeroed, body, VerifyOutcome.INVALID_SIGNATURE, "static, all-zero signature")

    return records


def evaluate(keys: TrustedKeySet, records: list[VectorRecord]) -> list[VerifyOutcome]:
    """Run the local verifier over every record, in order."""
    return [verify(keys, record.to_envelope(), record.body) for record in records]


def mismatches(
    keys: TrustedKeySet, records: list[VectorRecord]
) -> list[tuple[int, VectorRecord, VerifyOutcome]]:
    """Records where the local verifier disagrees with ``expected_outcome``."""
    out = []
    for index, (record, actual) in enumerate(zip(records, evaluate(keys, records))):
        if actual.value != record.expected_outcome:
            out.append((index, record, actual))
    return out


def write_standard_files(vectors_path: str, keyset_path: str) -> int:
    """Emit the standard corpus and its key set; returns the record count."""
    records = build_standard_corpus()
    write_vectors(vectors_path, records)
    save_keyset(keyset_path, standard_keyset())
    return len(records)
