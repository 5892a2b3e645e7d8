"""Mapping between signature envelopes and the ``X-SW-*`` response headers.

Wire format, exactly:

    X-SW-Signature   base64 of the raw 64-byte signature
    X-SW-Key-Id      key identifier (printable ASCII, at most 32 chars)
    X-SW-Class       "dyn" or "sta"
    X-SW-Timestamp   decimal Unix seconds      (dynamic only)
    X-SW-Nonce       16 lowercase hex chars    (dynamic only)
    X-SW-Version     decimal build number      (static only)

Parsing is strict: a response must carry the complete header set for its
class and nothing from the other class, otherwise it does not count as
carrying a valid envelope at all.
"""

from __future__ import annotations

import base64
import re
from typing import Mapping

from .crypto import (
    NONCE_SIZE,
    SIGNATURE_SIZE,
    ContentClass,
    SignatureEnvelope,
)

HEADER_SIGNATURE = "X-SW-Signature"
HEADER_KEY_ID = "X-SW-Key-Id"
HEADER_CLASS = "X-SW-Class"
HEADER_TIMESTAMP = "X-SW-Timestamp"
HEADER_NONCE = "X-SW-Nonce"
HEADER_VERSION = "X-SW-Version"

ENVELOPE_HEADERS = (
    HEADER_SIGNATURE,
    HEADER_KEY_ID,
    HEADER_CLASS,
    HEADER_TIMESTAMP,
    HEADER_NONCE,
    HEADER_VERSION,
)

HEADER_GATEWAY_ERROR = "X-SW-Gateway-Error"

_DECIMAL = re.compile(r"^[0-9]+$")
_NONCE_HEX = re.compile(r"^[0-9a-fA-F]{%d}$" % (NONCE_SIZE * 2))


class HeaderError(ValueError):
    """Envelope headers are absent, incomplete, or malformed."""


def _lowered(headers: Mapping[str, str]) -> dict[str, str]:
    return {name.lower(): value for name, value in headers.items()}


def has_envelope_headers(headers: Mapping[str, str]) -> bool:
    """True if any envelope header is present (case-insensitive)."""
    low = _lowered(headers)
    return any(name.lower() in low for name in ENVELOPE_HEADERS)


def envelope_to_headers(envelope: SignatureEnvelope) -> dict[str, str]:
    envelope.require_class_fields()
    out = {
        HEADER_SIGNATURE: base64.b64encode(envelope.signature).decode("ascii"),
        HEADER_KEY_ID: envelope.key_id,
        HEADER_CLASS: envelope.content_class.value,
    }
    if envelope.content_class is ContentClass.DYNAMIC:
        assert envelope.timestamp is not None and envelope.nonce is not None
        out[HEADER_TIMESTAMP] = str(envelope.timestamp)
        out[HEADER_NONCE] = envelope.nonce.hex()
    else:
        out[HEADER_VERSION] = str(envelope.version)
    return out


def envelope_from_headers(headers: Mapping[str, str]) -> SignatureEnvelope:
    """Parse the envelope out of a header map, raising :class:`HeaderError`.

    Callers that must not raise on hostile input should gate on
    :func:`has_envelope_headers` and treat a parse failure as "no valid
    envelope present".
    """
    low = _lowered(headers)

    def take(name: str) -> str | None:
        return low.get(name.lower())

    class_value = take(HEADER_CLASS)
    if class_value is None:
        raise HeaderError(f"missing {HEADER_CLASS}")
    try:
        content_class = ContentClass(class_value)
    except ValueError:
        raise HeaderError(f"unknown {HEADER_CLASS} value {class_value!r}") from None

    key_id = take(HEADER_KEY_ID)
    if key_id is None or not key_id or len(key_id) > 32 or not key_id.isascii():
        raise HeaderError(f"missing or malformed {HEADER_KEY_ID}")

    signature_b64 = take(HEADER_SIGNATURE)
    if signature_b64 is None:
        raise HeaderError(f"missing {HEADER_SIGNATURE}")
    try:
        signature = base64.b64decode(signature_b64, validate=True)
    except Exception:
        raise HeaderError(f"{HEADER_SIGNATURE} is not valid base64") from None
    if len(signature) != SIGNATURE_SIZE:
        raise HeaderError(f"{HEADER_SIGNATURE} must decode to {SIGNATURE_SIZE} bytes")

    timestamp_value = take(HEADER_TIMESTAMP)
    nonce_value = take(HEADER_NONCE)
    version_value = take(HEADER_VERSION)

    if content_class is ContentClass.DYNAMIC:
        if version_value is not None:
            raise HeaderError(f"dynamic response must not carry {HEADER_VERSION}")
        if timestamp_value is None or not _DECIMAL.match(timestamp_value):
            raise HeaderError(f"missing or malformed {HEADER_TIMESTAMP}")
        if nonce_value is None or not _NONCE_HEX.match(nonce_value):
            raise HeaderError(f"missing or malformed {HEADER_NONCE}")
        return SignatureEnvelope(
            key_id=key_id,
            content_class=content_class,
            signature=signature,
            timestamp=int(timestamp_value),
            nonce=bytes.fromhex(nonce_value),
        )

    if timestamp_value is not None or nonce_value is not None:
        raise HeaderError("static response must not carry timestamp or nonce headers")
    if version_value is None or not _DECIMAL.match(version_value):
        raise HeaderError(f"missing or malformed {HEADER_VERSION}")
    return SignatureEnvelope(
        key_id=key_id,
        content_class=content_class,
        signature=signature,
        version=int(version_value),
    )


def strip_envelope_headers(headers: Mapping[str, str]) -> dict[str, str]:
    """Return a copy of ``headers`` with every envelope header removed."""
    doomed = {name.lower() for name in ENVELOPE_HEADERS}
    return {name: value for name, value in headers.items() if name.lower() not in doomed}
