// Wire protocol shared with the signing gateway: header names, the
// signature envelope, and strict parsing. Anything that does not parse
// cleanly counts as "no envelope" so a stripped and a mangled response
// land in the same bucket.

export const HEADER_SIGNATURE = "X-SW-Signature";
export const HEADER_KEY_ID = "X-SW-Key-Id";
export const HEADER_CLASS = "X-SW-Class";
export const HEADER_TIMESTAMP = "X-SW-Timestamp";
export const HEADER_NONCE = "X-SW-Nonce";
export const HEADER_VERSION = "X-SW-Version";

export const ENVELOPE_HEADERS = [
  HEADER_SIGNATURE,
  HEADER_KEY_ID,
  HEADER_CLASS,
  HEADER_TIMESTAMP,
  HEADER_NONCE,
  HEADER_VERSION,
] as const;

export const SIGNATURE_SIZE = 64;
export const NONCE_SIZE = 8;
export const MAX_KEY_ID_LENGTH = 32;

export type ContentClass = "dyn" | "sta";

export interface Envelope {
  keyId: string;
  contentClass: ContentClass;
  signature: Uint8Array;
  timestamp?: number;
  nonce?: Uint8Array;
  version?: number;
}

export class HeaderError extends Error {}

const DECIMAL = /^[0-9]+$/;
const NONCE_HEX = /^[0-9a-fA-F]{16}$/;
const BASE64 = /^[A-Za-z0-9+/]*={0,2}$/;

export function decodeBase64(text: string): Uint8Array {
  if (!BASE64.test(text) || text.length % 4 !== 0) {
    throw new HeaderError("invalid base64");
  }
  const raw = atob(text);
  return Uint8Array.from(raw, (c) => c.charCodeAt(0));
}

export function encodeBase64(bytes: Uint8Array): string {
  let raw = "";
  for (const b of bytes) raw += String.fromCharCode(b);
  return btoa(raw);
}

export function hexToBytes(hex: string): Uint8Array {
  const out = new Uint8Array(hex.length / 2);
  for (let i = 0; i < out.length; i++) {
    out[i] = parseInt(hex.slice(i * 2, i * 2 + 2), 16);
  }
  return out;
}

export function bytesToHex(bytes: Uint8Array): string {
  return [...bytes].map((b) => b.toString(16).padStart(2, "0")).join("");
}

function lowered(headers: Record<string, string>): Map<string, string> {
  const map = new Map<string, string>();
  for (const [name, value] of Object.entries(headers)) {
    map.set(name.toLowerCase(), value);
  }
  return map;
}

export function hasEnvelopeHeaders(headers: Record<string, string>): boolean {
  const low = lowered(headers);
  return ENVELOPE_HEADERS.some((name) => low.has(name.toLowerCase()));
}

// eslint-disable-next-line complexity -- the decision table is the point
export function envelopeFromHeaders(headers: Record<string, string>): Envelope {
  const low = lowered(headers);
  const take = (name: string) => low.get(name.toLowerCase());

  const classValue = take(HEADER_CLASS);
  if (classValue !== "dyn" && classValue !== "sta") {
    throw new HeaderError(`missing or unknown ${HEADER_CLASS}`);
  }

  const keyId = take(HEADER_KEY_ID);
  if (
    keyId === undefined ||
    keyId.length === 0 ||
    keyId.length > MAX_KEY_ID_LENGTH ||
    // eslint-disable-next-line no-control-regex
    !/^[\x00-\x7f]*$/.test(keyId)
  ) {
    throw new HeaderError(`missing or malformed ${HEADER_KEY_ID}`);
  }

  const signatureB64 = take(HEADER_SIGNATURE);
  if (signatureB64 === undefined) {
    throw new HeaderError(`missing ${HEADER_SIGNATURE}`);
  }
  const signature = decodeBase64(signatureB64);
  if (signature.length !== SIGNATURE_SIZE) {
    throw new HeaderError(`${HEADER_SIGNATURE} must decode to ${SIGNATURE_SIZE} bytes`);
  }

  const timestampValue = take(HEADER_TIMESTAMP);
  const nonceValue = take(HEADER_NONCE);
  const versionValue = take(HEADER_VERSION);

  if (classValue === "dyn") {
    if (versionValue !== undefined) {
      throw new HeaderError(`dynamic response must not carry ${HEADER_VERSION}`);
    }
    if (timestampValue === undefined || !DECIMAL.test(timestampValue)) {
      throw new HeaderError(`missing or malformed ${HEADER_TIMESTAMP}`);
    }
    if (nonceValue === undefined || !NONCE_HEX.test(nonceValue)) {
      throw new HeaderError(`missing or malformed ${HEADER_NONCE}`);
    }
    return {
      keyId,
      contentClass: "dyn",
      signature,
      timestamp: Number(timestampValue),
      nonce: hexToBytes(nonceValue),
    };
  }

  if (timestampValue !== undefined || nonceValue !== undefined) {
    throw new HeaderError("static response must not carry timestamp or nonce headers");
  }
  if (versionValue === undefined || !DECIMAL.test(versionValue)) {
    throw new HeaderError(`missing or malformed ${HEADER_VERSION}`);
  }
  return { keyId, contentClass: "sta", signature, version: Number(versionValue) };
}
