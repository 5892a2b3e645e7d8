// Conformance vector file: JSONL records of signed responses plus the
// verdict any compliant verifier must reach. The file itself is produced
// by the reference implementation; this side only consumes it.

import { TrustedKeySet, VerifyOutcome, verifyEnvelope } from "./crypto";
import { Envelope, decodeBase64, hexToBytes } from "./protocol";

export interface VectorRecord {
  contentClass: "dyn" | "sta";
  body: Uint8Array;
  keyId: string;
  signature: Uint8Array;
  expectedOutcome: VerifyOutcome;
  timestamp?: number;
  nonceHex?: string;
  version?: number;
  comment: string;
}

interface RawRecord {
  class: "dyn" | "sta";
  body_b64: string;
  key_id: string;
  signature_b64: string;
  expected_outcome: VerifyOutcome;
  timestamp?: number;
  nonce_hex?: string;
  version?: number;
  comment?: string;
}

export function parseVectorFile(payload: string): VectorRecord[] {
  const records: VectorRecord[] = [];
  for (const line of payload.split("\n")) {
    if (line.trim() === "") continue;
    const raw = JSON.parse(line) as RawRecord;
    records.push({
      contentClass: raw.class,
      body: decodeBase64(raw.body_b64),
      keyId: raw.key_id,
      signature: decodeBase64(raw.signature_b64),
      expectedOutcome: raw.expected_outcome,
      timestamp: raw.timestamp,
      nonceHex: raw.nonce_hex,
      version: raw.version,
      comment: raw.comment ?? "",
    });
  }
  return records;
}

export function vectorEnvelope(record: VectorRecord): Envelope {
  return {
    keyId: record.keyId,
    contentClass: record.contentClass,
    signature: record.signature,
    timestamp: record.timestamp,
    nonce: record.nonceHex === undefined ? undefined : hexToBytes(record.nonceHex),
    version: record.version,
  };
}

export async function evaluateVector(
  keys: TrustedKeySet,
  record: VectorRecord,
): Promise<VerifyOutcome> {
  return verifyEnvelope(keys, vectorEnvelope(record), record.body);
}
