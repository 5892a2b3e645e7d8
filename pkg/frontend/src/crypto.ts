// ECDSA P-256 / SHA-256 verification over the canonical signed message,
// using the platform's WebCrypto. Signatures are raw 64-byte r||s, which
// is WebCrypto's native ECDSA format, so no re-encoding is needed.

import { Envelope, NONCE_SIZE, SIGNATURE_SIZE, bytesToHex, decodeBase64 } from "./protocol";

export type VerifyOutcome = "valid" | "invalid_signature" | "unknown_key";

export interface TrustedKey {
  keyId: string;
  point: Uint8Array; // 65-byte uncompressed SEC1 point
  cryptoKey: CryptoKey;
}

export interface TrustedKeySet {
  entries: TrustedKey[];
}

// Order of the P-256 group; r and s must lie in [1, n).
const CURVE_ORDER = BigInt(
  "0xffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551",
);

export async function importTrustedKey(keyId: string, point: Uint8Array): Promise<TrustedKey> {
  if (point.length !== 65 || point[0] !== 0x04) {
    throw new Error("public key must be a 65-byte uncompressed P-256 point");
  }
  const cryptoKey = await crypto.subtle.importKey(
    "raw",
    point as Uint8Array<ArrayBuffer>,
    { name: "ECDSA", namedCurve: "P-256" },
    false,
    ["verify"],
  );
  return { keyId, point, cryptoKey };
}

interface KeySetFile {
  entries: { key_id: string; public_point_b64: string }[];
}

export async function keySetFromJson(payload: string): Promise<TrustedKeySet> {
  const data = JSON.parse(payload) as KeySetFile;
  const entries = await Promise.all(
    data.entries.map((e) => importTrustedKey(e.key_id, decodeBase64(e.public_point_b64))),
  );
  return { entries };
}

export function getKey(keys: TrustedKeySet, keyId: string): TrustedKey | undefined {
  return keys.entries.find((entry) => entry.keyId === keyId);
}

function bytesToBigInt(bytes: Uint8Array): bigint {
  let value = 0n;
  for (const b of bytes) value = (value << 8n) | BigInt(b);
  return value;
}

export function canonicalMessage(envelope: Envelope, body: Uint8Array): Uint8Array {
  let prefix: string;
  if (envelope.contentClass === "dyn") {
    if (
      envelope.timestamp === undefined ||
      envelope.timestamp < 0 ||
      envelope.nonce === undefined ||
      envelope.nonce.length !== NONCE_SIZE ||
      envelope.version !== undefined
    ) {
      throw new Error("malformed dynamic envelope");
    }
    prefix = `SWSIGv1|dyn|${envelope.timestamp}|${bytesToHex(envelope.nonce)}|`;
  } else {
    if (
      envelope.version === undefined ||
      envelope.version < 0 ||
      envelope.timestamp !== undefined ||
      envelope.nonce !== undefined
    ) {
      throw new Error("malformed static envelope");
    }
    prefix = `SWSIGv1|sta|${envelope.version}|`;
  }
  const head = new TextEncoder().encode(prefix);
  const message = new Uint8Array(head.length + body.length);
  message.set(head);
  message.set(body, head.length);
  return message;
}

export async function verifyEnvelope(
  keys: TrustedKeySet,
  envelope: Envelope,
  body: Uint8Array,
): Promise<VerifyOutcome> {
  const entry = getKey(keys, envelope.keyId);
  if (entry === undefined) return "unknown_key";
  if (envelope.signature.length !== SIGNATURE_SIZE) return "invalid_signature";

  let message: Uint8Array;
  try {
    message = canonicalMessage(envelope, body);
  } catch {
    return "invalid_signature";
  }

  const r = bytesToBigInt(envelope.signature.slice(0, 32));
  const s = bytesToBigInt(envelope.signature.slice(32));
  if (r < 1n || r >= CURVE_ORDER || s < 1n || s >= CURVE_ORDER) {
    return "invalid_signature";
  }

  const ok = await crypto.subtle.verify(
    { name: "ECDSA", hash: "SHA-256" },
    entry.cryptoKey,
    envelope.signature as Uint8Array<ArrayBuffer>,
    message as Uint8Array<ArrayBuffer>,
  );
  return ok ? "valid" : "invalid_signature";
}

export async function sha256Hex(data: Uint8Array): Promise<string> {
  const digest = await crypto.subtle.digest("SHA-256", data as Uint8Array<ArrayBuffer>);
  return bytesToHex(new Uint8Array(digest));
}
