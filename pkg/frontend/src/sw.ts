/// <reference lib="webworker" />
// Service-worker entry: registers the interception core against the real
// fetch event stream. Keys, policy, and the published worker digest list
// are embedded at build time so they are covered by this script's own
// digest; swapping any of them changes the digest and trips the update
// check.

import { keySetFromJson } from "./crypto";
import { MemoryCookies } from "./incidents";
import { InterceptedResponse, WorkerContext, interceptFetch } from "./worker-core";
import { checkWorkerUpdateVia, parsePublishedWorkerList } from "./update";
import { DEFAULT_POLICY, KeyValueStore, VersionLedger } from "./verifier";

declare const self: ServiceWorkerGlobalScope;

// Rewritten by the deployment build; the shape matches fixtures/keys.json.
const EMBEDDED_KEYS_JSON = '{"entries": []}';
const EMBEDDED_REPORTERS: string[] = ["/report"];
const EMBEDDED_CONTACTS = { email: "security@example.net", phone: "+1-555-0100" };
const PUBLISHED_WORKERS_PATH = "/published-workers.json";
const LEDGER_CACHE = "swsig-ledger-v1";

// Version ledger persisted in the Cache API so it survives worker
// restarts; one synthetic request per path key.
class CacheStore implements KeyValueStore {
  async get(key: string): Promise<string | undefined> {
    const cache = await caches.open(LEDGER_CACHE);
    const hit = await cache.match(new Request(`/__ledger/${encodeURIComponent(key)}`));
    return hit === undefined ? undefined : hit.text();
  }

  async set(key: string, value: string): Promise<void> {
    const cache = await caches.open(LEDGER_CACHE);
    await cache.put(new Request(`/__ledger/${encodeURIComponent(key)}`), new Response(value));
  }
}

const contextPromise: Promise<WorkerContext> = (async () => ({
  keys: await keySetFromJson(EMBEDDED_KEYS_JSON),
  policy: DEFAULT_POLICY,
  ledger: new VersionLedger(new CacheStore()),
  clock: () => Math.floor(Date.now() / 1000),
  cookies: new MemoryCookies(),
  reporters: EMBEDDED_REPORTERS,
  outbox: [],
  contacts: EMBEDDED_CONTACTS,
}))();

function headerRecord(headers: Headers): Record<string, string> {
  const record: Record<string, string> = {};
  headers.forEach((value, name) => {
    record[name] = value;
  });
  return record;
}

async function handle(event: FetchEvent): Promise<Response> {
  const context = await contextPromise;
  const url = new URL(event.request.url);

  const fetchUpstream = async (): Promise<InterceptedResponse> => {
    const response = await fetch(event.request);
    const body = new Uint8Array(await response.arrayBuffer());
    return { status: response.status, headers: headerRecord(response.headers), body };
  };

  const result = await interceptFetch(url.pathname, fetchUpstream, context);
  return new Response(result.response.body as BodyInit, {
    status: result.response.status,
    headers: result.response.headers,
  });
}

self.addEventListener("install", () => {
  self.skipWaiting();
});

self.addEventListener("activate", (event) => {
  event.waitUntil(self.clients.claim());
});

self.addEventListener("fetch", (event) => {
  event.respondWith(handle(event));
});

// Triggered by the page before it lets the browser adopt a waiting
// worker; a mismatch goes through the incident pipeline first.
self.addEventListener("message", (event) => {
  if ((event.data as { type?: string })?.type !== "self-validate-update") return;
  event.waitUntil(
    (async () => {
      const scriptUrl = self.location.href;
      const activeScript = new Uint8Array(await (await fetch(scriptUrl)).arrayBuffer());
      const published = parsePublishedWorkerList(
        new Uint8Array(await (await fetch(PUBLISHED_WORKERS_PATH)).arrayBuffer()),
      );
      const fetchScript = async () =>
        new Uint8Array(await (await fetch(scriptUrl, { cache: "no-store" })).arrayBuffer());
      const outcome = await checkWorkerUpdateVia(activeScript, fetchScript, published);
      event.source?.postMessage({ type: "self-validate-result", outcome });
    })(),
  );
});
