"""Signing and verification primitives shared by the gateway and all verifiers.

Every component that signs or checks a response body must agree on the exact
bytes that go under the signature.  That contract is pinned here:

    dynamic content:  b"SWSIGv1|dyn|" + decimal timestamp + b"|"
                      + 16-char hex nonce + b"|" + body
    static content:   b"SWSIGv1|sta|" + decimal build version + b"|" + body

Signatures are ECDSA P-256 over SHA-256 of that message.  They travel as raw
64-byte ``r || s`` (base64 once placed in a header).  The pipe-delimited
prefix with decimal fields keeps the encoding injective: the timestamp and
version fields cannot contain a pipe, and the nonce is always exactly 16 hex
characters, so no two distinct (class, timestamp/version, nonce, body)
tuples produce the same message bytes.

All operations here are pure given their inputs and safe to call from any
number of threads; key material is immutable after construction.
"""

from __future__ import annotations

import base64
import secrets
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec
from cryptography.hazmat.primitives.asymmetric.utils import (
    decode_dss_signature,
    encode_dss_signature,
)

MESSAGE_PREFIX = b"SWSIGv1"
SIGNATURE_SIZE = 64
NONCE_SIZE = 8
MAX_KEY_ID_LENGTH = 32
MAX_TRUSTED_KEYS = 8

_CURVE = ec.SECP256R1()
# Group order of P-256; signature components must lie in [1, order).
_CURVE_ORDER = 0xFFFFFFFF00000000FFFFFFFFFFFFFFFFBCE6FAADA7179E84F3B9CAC2FC632551


class CryptoError(Exception):
    """Base error for key handling and envelope construction."""


class EnvelopeError(CryptoError):
    """Envelope is missing or carries fields inconsistent with its class."""


class KeySetError(CryptoError):
    """Trusted key set violates its invariants."""


class Algorithm(str, Enum):
    """Signature algorithms; a single supported value in v1."""

    ECDSA_P256_SHA256 = "ecdsa-p256-sha256"


class ContentClass(str, Enum):
    """Wire value of the content class carried next to the signature."""

    DYNAMIC = "dyn"
    STATIC = "sta"


class KeyStatus(str, Enum):
    ACTIVE = "active"
    DEPRECATED = "deprecated"


class VerifyOutcome(str, Enum):
    VALID = "valid"
    INVALID_SIGNATURE = "invalid_signature"
    UNKNOWN_KEY = "unknown_key"


def _check_key_id(key_id: str) -> None:
    if not key_id or len(key_id) > MAX_KEY_ID_LENGTH:
        raise CryptoError(f"key id must be 1..{MAX_KEY_ID_LENGTH} characters")
    if not key_id.isascii() or not key_id.isprintable():
        raise CryptoError("key id must be printable ASCII")


@dataclass(frozen=True)
class SigningKey:
    """Private signing key plus the identifier verifiers will see."""

    key_id: str
    private_key: ec.EllipticCurvePrivateKey = field(repr=False)
    algorithm: Algorithm = Algorithm.ECDSA_P256_SHA256

    def __post_init__(self) -> None:
        _check_key_id(self.key_id)
        if not isinstance(self.private_key.curve, ec.SECP256R1):
            raise CryptoError("signing key must be on curve P-256")

    @classmethod
    def generate(cls, key_id: str) -> "SigningKey":
        return cls(key_id=key_id, private_key=ec.generate_private_key(_CURVE))

    @classmethod
    def from_scalar(cls, key_id: str, scalar: int) -> "SigningKey":
        """Derive a key from a fixed private scalar (reproducible test keys)."""
        if not 1 <= scalar < _CURVE_ORDER:
            raise CryptoError("private scalar out of range for P-256")
        return cls(key_id=key_id, private_key=ec.derive_private_key(scalar, _CURVE))

    @classmethod
    def from_pem(cls, key_id: str, pem: bytes) -> "SigningKey":
        try:
            loaded = serialization.load_pem_private_key(pem, password=None)
        except Exception as exc:
            raise CryptoError(f"cannot load private key PEM: {exc}") from exc
        if not isinstance(loaded, ec.EllipticCurvePrivateKey):
            raise CryptoError("key PEM does not contain an EC private key")
        return cls(key_id=key_id, private_key=loaded)

    def to_pem(self) -> bytes:
        return self.private_key.private_bytes(
            encoding=serialization.Encoding.PEM,
            format=serialization.PrivateFormat.PKCS8,
            encryption_algorithm=serialization.NoEncryption(),
        )

    def public_entry(self, status: KeyStatus = KeyStatus.ACTIVE) -> "PublicKeyEntry":
        point = self.private_key.public_key().public_bytes(
            encoding=serialization.Encoding.X962,
            format=serialization.PublicFormat.UncompressedPoint,
        )
        return PublicKeyEntry(key_id=self.key_id, point=point, status=status)


@dataclass(frozen=True)
class PublicKeyEntry:
    """Verification-side view of one signing key.

    The public key is carried as the 65-byte SEC1 uncompressed point, which
    round-trips losslessly and imports directly as a "raw" EC key in browser
    crypto APIs.
    """

    key_id: str
    point: bytes
    algorithm: Algorithm = Algorithm.ECDSA_P256_SHA256
    status: KeyStatus = KeyStatus.ACTIVE

    def __post_init__(self) -> None:
        _check_key_id(self.key_id)
        try:
            ec.EllipticCurvePublicKey.from_encoded_point(_CURVE, self.point)
        except Exception as exc:
            raise CryptoError(f"invalid P-256 public point: {exc}") from exc
        if len(self.point) != 65 or self.point[0] != 0x04:
            raise CryptoError("public point must be SEC1 uncompressed (65 bytes)")

    def public_key(self) -> ec.EllipticCurvePublicKey:
        return ec.EllipticCurvePublicKey.from_encoded_point(_CURVE, self.point)

    def to_dict(self) -> dict:
        return {
            "key_id": self.key_id,
            "algorithm": self.algorithm.value,
            "public_point_b64": base64.b64encode(self.point).decode("ascii"),
            "status": self.status.value,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PublicKeyEntry":
        return cls(
            key_id=str(data["key_id"]),
            point=base64.b64decode(data["public_point_b64"]),
            algorithm=Algorithm(data.get("algorithm", Algorithm.ECDSA_P256_SHA256.value)),
            status=KeyStatus(data.get("status", KeyStatus.ACTIVE.value)),
        )


@dataclass(frozen=True)
class TrustedKeySet:
    """Ordered set of public keys a verifier accepts.

    Deprecated entries still verify; the status only records which keys are
    due for removal on the next verifier update, so that responses signed
    before a rotation keep validating while both keys are deployed.
    """

    entries: tuple[PublicKeyEntry, ...]

    def __post_init__(self) -> None:
        if not self.entries:
            raise KeySetError("trusted key set must not be empty")
        if len(self.entries) > MAX_TRUSTED_KEYS:
            raise KeySetError(f"trusted key set holds at most {MAX_TRUSTED_KEYS} keys")
        ids = [entry.key_id for entry in self.entries]
        if len(set(ids)) != len(ids):
            raise KeySetError("trusted key ids must be pairwise distinct")

    @classmethod
    def of(cls, *entries: PublicKeyEntry) -> "TrustedKeySet":
        return cls(entries=tuple(entries))

    def get(self, key_id: str) -> Optional[PublicKeyEntry]:
        for entry in self.entries:
            if entry.key_id == key_id:
                return entry
        return None

    def key_ids(self) -> tuple[str, ...]:
        return tuple(entry.key_id for entry in self.entries)

    def with_entry(self, entry: PublicKeyEntry) -> "TrustedKeySet":
        return TrustedKeySet(entries=self.entries + (entry,))

    def to_dict(self) -> dict:
        return {"entries": [entry.to_dict() for entry in self.entries]}

    @classmethod
    def from_dict(cls, data: dict) -> "TrustedKeySet":
        return cls(entries=tuple(PublicKeyEntry.from_dict(e) for e in data["entries"]))


@dataclass(frozen=True)
class SignatureEnvelope:
    """Header-borne signature record attached to one response.

    Dynamic envelopes carry a timestamp and nonce and no version; static
    envelopes carry a version and neither timestamp nor nonce.  The
    signature is empty until :func:`sign` fills it in.
    """

    key_id: str
    content_class: ContentClass
    signature: bytes = b""
    timestamp: Optional[int] = None
    nonce: Optional[bytes] = None
    version: Optional[int] = None

    @classmethod
    def for_dynamic(cls, key_id: str, timestamp: int, nonce: bytes) -> "SignatureEnvelope":
        return cls(
            key_id=key_id,
            content_class=ContentClass.DYNAMIC,
            timestamp=timestamp,
            nonce=nonce,
        )

    @classmethod
    def for_static(cls, key_id: str, version: int) -> "SignatureEnvelope":
        return cls(key_id=key_id, content_class=ContentClass.STATIC, version=version)

    def require_class_fields(self) -> None:
        """Raise :class:`EnvelopeError` unless the class-specific fields hold."""
        if self.content_class is ContentClass.DYNAMIC:
            if self.timestamp is None or self.timestamp < 0:
                raise EnvelopeError("dynamic envelope needs a non-negative timestamp")
            if self.nonce is None or len(self.nonce) != NONCE_SIZE:
                raise EnvelopeError(f"dynamic envelope needs a {NONCE_SIZE}-byte nonce")
            if self.version is not None:
                raise EnvelopeError("dynamic envelope must not carry a version")
        elif self.content_class is ContentClass.STATIC:
            if self.version is None or self.version < 0:
                raise EnvelopeError("static envelope needs a non-negative version")
            if self.timestamp is not None or self.nonce is not None:
                raise EnvelopeError("static envelope must not carry timestamp or nonce")
        else:  # pragma: no cover - enum is closed
            raise EnvelopeError(f"unknown content class {self.content_class!r}")


def fresh_nonce() -> bytes:
    return secrets.token_bytes(NONCE_SIZE)


def canonical_message(envelope: SignatureEnvelope, body: bytes) -> bytes:
    """Build the exact byte sequence that gets hashed and signed."""
    envelope.require_class_fields()
    if envelope.content_class is ContentClass.DYNAMIC:
        assert envelope.timestamp is not None and envelope.nonce is not None
        prefix = f"SWSIGv1|dyn|{envelope.timestamp}|{envelope.nonce.hex()}|"
    else:
        prefix = f"SWSIGv1|sta|{envelope.version}|"
    return prefix.encode("ascii") + body


def sign(
    key: SigningKey,
    envelope: SignatureEnvelope,
    body: bytes,
    *,
    deterministic: bool = False,
) -> SignatureEnvelope:
    """Sign ``body`` under ``envelope`` and return the completed envelope.

    The returned envelope carries the signing key's id and a raw 64-byte
    signature.  ``deterministic`` selects RFC 6979 nonce generation, used
    when emitting reproducible conformance vectors.
    """
    stamped = replace(envelope, key_id=key.key_id)
    message = canonical_message(stamped, body)
    der = key.private_key.sign(
        message, ec.ECDSA(hashes.SHA256(), deterministic_signing=deterministic)
    )
    r, s = decode_dss_signature(der)
    raw = r.to_bytes(32, "big") + s.to_bytes(32, "big")
    return replace(stamped, signature=raw)


def verify(keys: TrustedKeySet, envelope: SignatureEnvelope, body: bytes) -> VerifyOutcome:
    """Check an envelope against a trusted key set.

    Hostile input is expected: malformed envelopes and garbage signatures
    come back as :data:`VerifyOutcome.INVALID_SIGNATURE`, never as an
    exception.  An unknown key id is reported separately so callers can
    distinguish a stale trust anchor from actual tampering.
    """
    entry = keys.get(envelope.key_id)
    if entry is None:
        return VerifyOutcome.UNKNOWN_KEY
    if len(envelope.signature) != SIGNATURE_SIZE:
        return VerifyOutcome.INVALID_SIGNATURE
    try:
        message = canonical_message(envelope, body)
    except EnvelopeError:
        return VerifyOutcome.INVALID_SIGNATURE
    r = int.from_bytes(envelope.signature[:32], "big")
    s = int.from_bytes(envelope.signature[32:], "big")
    if not (1 <= r < _CURVE_ORDER and 1 <= s < _CURVE_ORDER):
        return VerifyOutcome.INVALID_SIGNATURE
    try:
        entry.public_key().verify(
            encode_dss_signature(r, s), message, ec.ECDSA(hashes.SHA256())
        )
    except InvalidSignature:
        return VerifyOutcome.INVALID_SIGNATURE
    return VerifyOutcome.VALID
