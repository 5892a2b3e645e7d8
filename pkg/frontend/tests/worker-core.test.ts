// Fetch interception over recorded gateway traffic: verified bodies pass
// through untouched, everything else becomes a warning page plus the
// three incident actions.

import { readFileSync } from "node:fs";
import { fileURLToPath } from "node:url";

import { beforeAll, describe, expect, it } from "vitest";

import { TrustedKeySet, keySetFromJson } from "../src/crypto";
import { MemoryCookies, OutboxItem, PostFn } from "../src/incidents";
import { decodeBase64 } from "../src/protocol";
import { DEFAULT_POLICY, VersionLedger } from "../src/verifier";
import {
  InterceptedResponse,
  VERDICT_HEADER,
  WorkerContext,
  interceptFetch,
} from "../src/worker-core";

interface RecordedEntry {
  name: string;
  path: string;
  status: number;
  headers: Record<string, string>;
  body_b64: string;
}

const fixture = (name: string) =>
  readFileSync(fileURLToPath(new URL(`../fixtures/${name}`, import.meta.url)), "utf-8");

let keys: TrustedKeySet;
let entries: Map<string, RecordedEntry>;
let clock: number;

beforeAll(async () => {
  keys = await keySetFromJson(fixture("keys.json"));
  const data = JSON.parse(fixture("responses.json")) as { clock: number; entries: RecordedEntry[] };
  clock = data.clock;
  entries = new Map(data.entries.map((e) => [e.name, e]));
});

function makeContext(post: PostFn): {
  context: WorkerContext;
  cookies: MemoryCookies;
  outbox: OutboxItem[];
} {
  const cookies = new MemoryCookies();
  cookies.set("session", "token-1");
  const outbox: OutboxItem[] = [];
  const context: WorkerContext = {
    keys,
    policy: DEFAULT_POLICY,
    ledger: new VersionLedger(),
    clock: () => clock,
    cookies,
    reporters: ["http://collector.test/report"],
    outbox,
    contacts: { email: "security@example.net", phone: "+1-555-0100" },
    post,
  };
  return { context, cookies, outbox };
}

function upstreamOf(name: string): { path: string; fetcher: () => Promise<InterceptedResponse> } {
  const entry = entries.get(name);
  if (!entry) throw new Error(`no recorded entry ${name}`);
  const response: InterceptedResponse = {
    status: entry.status,
    headers: { ...entry.headers },
    body: decodeBase64(entry.body_b64),
  };
  return { path: entry.path, fetcher: async () => response };
}

describe("accepted responses", () => {
  it("forwards the signed body byte for byte", async () => {
    const posts: string[] = [];
    const { context, cookies } = makeContext(async (url) => (posts.push(url), true));
    const { path, fetcher } = upstreamOf("clean /index.html");
    const upstream = await fetcher();

    const result = await interceptFetch(path, fetcher, context);
    expect(result.verdict.accepted).toBe(true);
    expect(result.response).toBe(upstream); // same object, no copy, no edits
    expect(result.report).toBeUndefined();
    expect(posts).toEqual([]);
    expect(cookies.get("session")).toBe("token-1");
  });
});

describe("rejected responses", () => {
  it("replaces a mutated body with a warning page and fires all actions", async () => {
    const posted: string[] = [];
    const { context, cookies, outbox } = makeContext(async (_url, body) => {
      posted.push(body);
      return true;
    });
    const { path, fetcher } = upstreamOf("body_mutation /index.html");

    const result = await interceptFetch(path, fetcher, context);
    expect(result.verdict).toEqual({ accepted: false, reason: "invalid_signature" });
    expect(result.response.status).toBe(403);
    expect(result.response.headers[VERDICT_HEADER]).toBe("invalid_signature");
    const html = new TextDecoder().decode(result.response.body);
    expect(html).toContain("integrity check failed");
    expect(html).toContain("invalid signature");
    expect(html).toContain("security@example.net");

    expect(cookies.get("session")).toBeUndefined();
    expect(result.report).toBeDefined();
    expect([...result.report!.actions].sort()).toEqual([
      "reported",
      "session_terminated",
      "user_warned",
    ]);
    expect(outbox).toEqual([]);

    const payload = JSON.parse(posted[0]!) as Record<string, unknown>;
    expect(payload.kind).toBe("invalid_signature");
    expect(payload.path).toBe(path);
    expect(payload.detected_at).toBe(clock);
    expect(payload.envelope).toHaveProperty("X-SW-Signature");
  });

  it("treats a stripped envelope as missing and still tears the session down", async () => {
    const { context, cookies } = makeContext(async () => true);
    const { path, fetcher } = upstreamOf("envelope_strip /api/data");

    const result = await interceptFetch(path, fetcher, context);
    expect(result.verdict).toEqual({ accepted: false, reason: "missing_envelope" });
    expect(cookies.get("session")).toBeUndefined();
    expect(result.report!.envelope).toEqual({}); // nothing left to quote
  });

  it("queues the report when the collector is unreachable", async () => {
    const { context, outbox } = makeContext(async () => false);
    const { path, fetcher } = upstreamOf("body_mutation /api/data");

    const result = await interceptFetch(path, fetcher, context);
    expect(result.report!.actions.has("reported")).toBe(false);
    expect(outbox).toHaveLength(1);
    expect(outbox[0]!.endpoint).toBe("http://collector.test/report");
  });

  it("never forwards an unverified body", async () => {
    const { context } = makeContext(async () => true);
    const { path, fetcher } = upstreamOf("worker_swap /sw.js");
    const upstream = await fetcher();

    const result = await interceptFetch(path, fetcher, context);
    expect(result.verdict.accepted).toBe(false);
    expect(result.response.body).not.toEqual(upstream.body);
    expect(new TextDecoder().decode(result.response.body)).not.toContain("__injected");
  });
});

describe("network failure", () => {
  it("propagates instead of masquerading as a verdict", async () => {
    const { context } = makeContext(async () => true);
    const down = async (): Promise<InterceptedResponse> => {
      throw new Error("connection refused");
    };
    await expect(interceptFetch("/api/data", down, context)).rejects.toThrow(
      "connection refused",
    );
  });
});
