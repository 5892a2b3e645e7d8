"""Signed HTTP responses: gateway-side signing, client-side validation,
and an attack harness that measures detection.

Layering, lowest first: ``crypto`` (canonical message, sign/verify),
``headers`` (wire encoding), ``manifest`` (predeployed static content),
``verifier`` (freshness, version monotonicity, worker update checks),
``incidents`` (response actions and reporting), ``gateway`` / ``origin``
/ ``collector`` (loopback services), ``mitm`` (attack proxy), ``vectors``
(cross-implementation conformance), ``harness`` + ``report`` + ``cli``
(experiments and artifacts).
"""

from .crypto import (
    Algorithm,
    ContentClass,
    CryptoError,
    EnvelopeError,
    KeySetError,
    KeyStatus,
    PublicKeyEntry,
    SignatureEnvelope,
    SigningKey,
    TrustedKeySet,
    VerifyOutcome,
    canonical_message,
    fresh_nonce,
    sign,
    verify,
)
from .verifier import (
    IncidentKind,
    Verdict,
    VerificationPolicy,
    VersionLedger,
    WorkerUpdateOutcome,
    check_worker_update,
    validate,
    validate_from_manifest,
)
from .manifest import ManifestEntry, ManifestError, StaticManifest, emit_manifest, verify_manifest
from .incidents import (
    IncidentAction,
    IncidentReport,
    Outbox,
    SessionStore,
    build_warning,
    handle_incident,
)
from .gateway import GatewayConfig, SigningGateway
from .mitm import AttackConfig, TamperLog, TamperStrategy, TamperingProxy
from .harness import (
    ManualClock,
    ScenarioResult,
    ScenarioSpec,
    run_benchmark,
    run_scenario,
)

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "AttackConfig",
    "ContentClass",
    "CryptoError",
    "EnvelopeError",
    "GatewayConfig",
    "IncidentAction",
    "IncidentKind",
    "IncidentReport",
    "KeySetError",
    "KeyStatus",
    "ManifestEntry",
    "ManifestError",
    "ManualClock",
    "Outbox",
    "PublicKeyEntry",
    "ScenarioResult",
    "ScenarioSpec",
    "SessionStore",
    "SignatureEnvelope",
    "SigningGateway",
    "SigningKey",
    "StaticManifest",
    "TamperLog",
    "TamperStrategy",
    "TamperingProxy",
    "TrustedKeySet",
    "Verdict",
    "VerificationPolicy",
    "VerifyOutcome",
    "VersionLedger",
    "WorkerUpdateOutcome",
    "build_warning",
    "canonical_message",
    "check_worker_update",
    "emit_manifest",
    "fresh_nonce",
    "handle_incident",
    "run_benchmark",
    "run_scenario",
    "sign",
    "validate",
    "validate_from_manifest",
    "verify",
    "verify_manifest",
]
