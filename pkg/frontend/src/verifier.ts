// Client-side decision procedure: given one response's headers and body,
// accept it or name the reason it must be rejected. Mirrors the gateway
// operator's reference verifier bit for bit; the shared vector file in
// fixtures/ is the contract between the two.

import { TrustedKeySet, verifyEnvelope } from "./crypto";
import { HeaderError, envelopeFromHeaders, hasEnvelopeHeaders } from "./protocol";

export type IncidentKind =
  | "missing_envelope"
  | "invalid_signature"
  | "unknown_key"
  | "stale_timestamp"
  | "future_timestamp"
  | "version_downgrade"
  | "worker_mismatch";

export interface VerificationPolicy {
  maxAgeSeconds: number;
  clockSkewSeconds: number;
  enforceVersionMonotonicity: boolean;
  requireEnvelope: boolean;
}

export const DEFAULT_POLICY: VerificationPolicy = {
  maxAgeSeconds: 30,
  clockSkewSeconds: 5,
  enforceVersionMonotonicity: true,
  requireEnvelope: true,
};

export type Verdict = { accepted: true } | { accepted: false; reason: IncidentKind };

// Minimal async string store so the ledger can ride on whatever the
// platform offers (Cache API, IndexedDB, a Map in tests).
export interface KeyValueStore {
  get(key: string): Promise<string | undefined>;
  set(key: string, value: string): Promise<void>;
}

export class MemoryStore implements KeyValueStore {
  private readonly map = new Map<string, string>();

  async get(key: string): Promise<string | undefined> {
    return this.map.get(key);
  }

  async set(key: string, value: string): Promise<void> {
    this.map.set(key, value);
  }
}

// Highest accepted static version per path; only ever moves up, and only
// on accepted responses - a rejected downgrade must not poison it.
export class VersionLedger {
  constructor(private readonly store: KeyValueStore = new MemoryStore()) {}

  async get(path: string): Promise<number | undefined> {
    const raw = await this.store.get(`version:${path}`);
    return raw === undefined ? undefined : Number(raw);
  }

  async observe(path: string, version: number): Promise<void> {
    if (!Number.isInteger(version) || version < 0) {
      throw new Error("version must be a non-negative integer");
    }
    const current = await this.get(path);
    if (current === undefined || version > current) {
      await this.store.set(`version:${path}`, String(version));
    }
  }
}

export interface ValidateContext {
  policy: VerificationPolicy;
  keys: TrustedKeySet;
  ledger: VersionLedger;
  now: number;
}

export async function validate(
  path: string,
  responseHeaders: Record<string, string>,
  body: Uint8Array,
  context: ValidateContext,
): Promise<Verdict> {
  const { policy, keys, ledger, now } = context;

  if (!hasEnvelopeHeaders(responseHeaders)) {
    if (policy.requireEnvelope) return { accepted: false, reason: "missing_envelope" };
    return { accepted: true };
  }

  let envelope;
  try {
    envelope = envelopeFromHeaders(responseHeaders);
  } catch (error) {
    if (error instanceof HeaderError) {
      return { accepted: false, reason: "missing_envelope" };
    }
    throw error;
  }

  const outcome = await verifyEnvelope(keys, envelope, body);
  if (outcome === "unknown_key") return { accepted: false, reason: "unknown_key" };
  if (outcome === "invalid_signature") return { accepted: false, reason: "invalid_signature" };

  if (envelope.contentClass === "dyn") {
    const timestamp = envelope.timestamp!;
    if (timestamp - now > policy.clockSkewSeconds) {
      return { accepted: false, reason: "future_timestamp" };
    }
    if (now - timestamp > policy.maxAgeSeconds + policy.clockSkewSeconds) {
      return { accepted: false, reason: "stale_timestamp" };
    }
    return { accepted: true };
  }

  const version = envelope.version!;
  if (policy.enforceVersionMonotonicity) {
    const highest = await ledger.get(path);
    if (highest !== undefined && version < highest) {
      return { accepted: false, reason: "version_downgrade" };
    }
    await ledger.observe(path, version);
  }
  return { accepted: true };
}
