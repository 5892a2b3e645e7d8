// Self-validation of worker updates: before the browser adopts a new
// worker script, fetch a copy through the still-active worker and compare
// it against the published digest list. A script that is neither the
// active one nor a published release is a swap and must raise an incident
// before installation, not after.

import { sha256Hex } from "./crypto";

export type WorkerUpdateOutcome =
  | "unchanged"
  | "legitimate_update"
  | "worker_mismatch"
  | "inconclusive";

export async function workerDigest(script: Uint8Array): Promise<string> {
  return sha256Hex(script);
}

export function parsePublishedWorkerList(payload: Uint8Array): Set<string> {
  const data = JSON.parse(new TextDecoder().decode(payload)) as { digests: string[] };
  return new Set(data.digests.map(String));
}

function sameBytes(a: Uint8Array, b: Uint8Array): boolean {
  if (a.length !== b.length) return false;
  for (let i = 0; i < a.length; i++) {
    if (a[i] !== b[i]) return false;
  }
  return true;
}

export async function checkWorkerUpdate(
  activeScript: Uint8Array,
  fetchedScript: Uint8Array,
  publishedDigests: ReadonlySet<string>,
): Promise<WorkerUpdateOutcome> {
  if (sameBytes(fetchedScript, activeScript)) return "unchanged";
  const digest = await workerDigest(fetchedScript);
  return publishedDigests.has(digest) ? "legitimate_update" : "worker_mismatch";
}

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

// Fetch failure must never silently pass: after the retries are spent the
// answer is "inconclusive", which callers treat as "do not adopt yet".
export async function checkWorkerUpdateVia(
  activeScript: Uint8Array,
  fetchScript: () => Promise<Uint8Array>,
  publishedDigests: ReadonlySet<string>,
  attempts = 3,
  retryDelayMs = 200,
): Promise<WorkerUpdateOutcome> {
  for (let attempt = 0; attempt < attempts; attempt++) {
    let fetched: Uint8Array;
    try {
      fetched = await fetchScript();
    } catch {
      if (attempt + 1 < attempts) await sleep(retryDelayMs * (attempt + 1));
      continue;
    }
    return checkWorkerUpdate(activeScript, fetched, publishedDigests);
  }
  return "inconclusive";
}
