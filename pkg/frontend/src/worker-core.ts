// Fetch interception core, free of service-worker globals so the same
// logic runs under tests and inside the worker entry. Fail closed: a body
// is either verified or it never reaches the page.

import {
  HandleIncidentOptions,
  IncidentReport,
  OutboxItem,
  PostFn,
  SessionCookies,
  WarningContacts,
  handleIncident,
  warningPageHtml,
} from "./incidents";
import { TrustedKeySet } from "./crypto";
import { ValidateContext, Verdict, VerificationPolicy, VersionLedger, validate } from "./verifier";

export const VERDICT_HEADER = "X-SW-Verdict";

export interface InterceptedResponse {
  status: number;
  headers: Record<string, string>;
  body: Uint8Array;
}

export interface WorkerContext {
  keys: TrustedKeySet;
  policy: VerificationPolicy;
  ledger: VersionLedger;
  clock: () => number;
  cookies: SessionCookies;
  reporters: string[];
  outbox: OutboxItem[];
  contacts: WarningContacts;
  post?: PostFn;
}

export interface InterceptResult {
  response: InterceptedResponse;
  verdict: Verdict;
  report?: IncidentReport;
}

function envelopeView(headers: Record<string, string>): Record<string, string> {
  const view: Record<string, string> = {};
  for (const [name, value] of Object.entries(headers)) {
    if (name.toLowerCase().startsWith("x-sw-")) view[name] = value;
  }
  return view;
}

export async function interceptFetch(
  path: string,
  fetchUpstream: () => Promise<InterceptedResponse>,
  context: WorkerContext,
): Promise<InterceptResult> {
  // A network failure propagates to the caller untouched: "the origin is
  // down" must stay distinguishable from "the response was forged".
  const upstream = await fetchUpstream();

  const validateContext: ValidateContext = {
    policy: context.policy,
    keys: context.keys,
    ledger: context.ledger,
    now: context.clock(),
  };
  const verdict = await validate(path, upstream.headers, upstream.body, validateContext);
  if (verdict.accepted) {
    return { response: upstream, verdict };
  }

  const options: HandleIncidentOptions = {
    kind: verdict.reason,
    path,
    envelope: envelopeView(upstream.headers),
    detectedAt: context.clock(),
    cookies: context.cookies,
    reporters: context.reporters,
    outbox: context.outbox,
    post: context.post,
  };
  const report = await handleIncident(options);

  const html = warningPageHtml(verdict.reason, context.contacts);
  const response: InterceptedResponse = {
    status: 403,
    headers: {
      "Content-Type": "text/html; charset=utf-8",
      "Cache-Control": "no-store",
      [VERDICT_HEADER]: verdict.reason,
    },
    body: new TextEncoder().encode(html),
  };
  return { response, verdict, report };
}
