"""Static-content manifest: path -> (version, signature, key id).

Covers the CDN case where predeployed static files cannot carry response
headers.  Each entry holds a detached static-class signature over the
resource's current bytes, so a client preloaded with the manifest can check
integrity without any envelope on the wire.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Optional

from . import crypto
from .crypto import SigningKey, TrustedKeySet, VerifyOutcome


class ManifestError(Exception):
    """A manifest entry could not be produced or parsed."""


@dataclass(frozen=True)
class ManifestEntry:
    version: int
    signature: bytes
    key_id: str

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "signature_b64": base64.b64encode(self.signature).decode("ascii"),
            "key_id": self.key_id,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ManifestEntry":
        return cls(
            version=int(data["version"]),
            signature=base64.b64decode(data["signature_b64"]),
            key_id=str(data["key_id"]),
        )


@dataclass(frozen=True)
class StaticManifest:
    entries: Mapping[str, ManifestEntry]

    def get(self, path: str) -> Optional[ManifestEntry]:
        return self.entries.get(path)

    def paths(self) -> tuple[str, ...]:
        return tuple(self.entries)

    def to_json(self) -> str:
        return json.dumps(
            {path: entry.to_dict() for path, entry in sorted(self.entries.items())},
            indent=2,
        )

    @classmethod
    def from_json(cls, payload: str) -> "StaticManifest":
        raw = json.loads(payload)
        return cls(entries={str(p): ManifestEntry.from_dict(e) for p, e in raw.items()})


def emit_manifest(
    paths: Iterable[str],
    asset_bytes: Callable[[str], bytes],
    *,
    key: SigningKey,
    version: int,
) -> StaticManifest:
    """Sign every listed resource at the given build version.

    ``asset_bytes`` resolves a path to the resource's current bytes; an
    unreadable path aborts with the offending path named.
    """
    entries: dict[str, ManifestEntry] = {}
    for path in paths:
        try:
            body = asset_bytes(path)
        except Exception as exc:
            raise ManifestError(f"cannot read asset {path!r}: {exc}") from exc
        envelope = crypto.sign(key, crypto.SignatureEnvelope.for_static(key.key_id, version), body)
        entries[path] = ManifestEntry(
            version=version, signature=envelope.signature, key_id=key.key_id
        )
    return StaticManifest(entries=entries)


def verify_manifest(
    manifest: StaticManifest,
    asset_bytes: Callable[[str], bytes],
    *,
    keys: TrustedKeySet,
) -> dict[str, VerifyOutcome]:
    """Re-check every manifest entry against the assets' current bytes."""
    results: dict[str, VerifyOutcome] = {}
    for path, entry in manifest.entries.items():
        envelope = crypto.SignatureEnvelope(
            key_id=entry.key_id,
            content_class=crypto.ContentClass.STATIC,
            signature=entry.signature,
            version=entry.version,
        )
        results[path] = crypto.verify(keys, envelope, asset_bytes(path))
    return results
