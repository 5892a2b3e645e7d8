"""Shared fixtures and hypothesis settings for the suite."""

from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from swsig.crypto import SignatureEnvelope, SigningKey, TrustedKeySet, sign

# Loopback servers and ECDSA make per-example timing noisy; judge examples
# on behavior, not wall clock.
settings.register_profile(
    "suite",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def signing_key() -> SigningKey:
    return SigningKey.generate("test-k1")


@pytest.fixture(scope="session")
def keyset(signing_key: SigningKey) -> TrustedKeySet:
    return TrustedKeySet.of(signing_key.public_entry())


def make_dynamic(key: SigningKey, body: bytes, timestamp: int, nonce: bytes) -> SignatureEnvelope:
    return sign(key, SignatureEnvelope.for_dynamic(key.key_id, timestamp, nonce), body)


def make_static(key: SigningKey, body: bytes, version: int) -> SignatureEnvelope:
    return sign(key, SignatureEnvelope.for_static(key.key_id, version), body)
