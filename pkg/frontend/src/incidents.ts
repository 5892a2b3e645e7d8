// Incident response, in the order that limits damage: kill the session,
// warn the user, then report. The report format matches the collector's
// POST /report interface; delivery failures are queued for idempotent
// retry (the collector dedupes on report_id).

import { IncidentKind } from "./verifier";

export type IncidentAction = "session_terminated" | "user_warned" | "reported";

export const DEFAULT_SESSION_COOKIE = "session";

export interface IncidentReport {
  reportId: string;
  kind: IncidentKind;
  path: string;
  envelope: Record<string, string>;
  detectedAt: number;
  actions: Set<IncidentAction>;
}

export function toPayload(report: IncidentReport): Record<string, unknown> {
  return {
    report_id: report.reportId,
    kind: report.kind,
    path: report.path,
    envelope: report.envelope,
    detected_at: report.detectedAt,
    actions: [...report.actions].sort(),
  };
}

// Cookie access differs wildly between contexts (Cookie Store API in the
// worker, document.cookie via a claimed page); the pipeline only needs
// "make the named cookie gone".
export interface SessionCookies {
  clear(name: string): Promise<boolean>;
}

export class MemoryCookies implements SessionCookies {
  constructor(private readonly jar = new Map<string, string>()) {}

  set(name: string, value: string): void {
    this.jar.set(name, value);
  }

  get(name: string): string | undefined {
    return this.jar.get(name);
  }

  async clear(name: string): Promise<boolean> {
    return this.jar.delete(name);
  }
}

export interface WarningContacts {
  email: string;
  phone: string;
}

export function warningPageHtml(kind: IncidentKind, contacts: WarningContacts): string {
  const reason = kind.replace(/_/g, " ");
  return [
    "<!doctype html>",
    "<html><head><meta charset=\"utf-8\"><title>Connection integrity check failed</title></head>",
    "<body>",
    "<h1>Connection integrity check failed</h1>",
    `<p>A response from this site failed its integrity check (${reason}). `,
    "Your session was closed as a precaution.</p>",
    `<p>If this keeps happening, contact the service provider at `,
    `<a href="mailto:${contacts.email}">${contacts.email}</a> or ${contacts.phone}.</p>`,
    "</body></html>",
  ].join("\n");
}

export type PostFn = (url: string, body: string) => Promise<boolean>;

export const postJson: PostFn = async (url, body) => {
  try {
    const response = await fetch(url, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body,
    });
    return response.ok;
  } catch {
    return false;
  }
};

export interface OutboxItem {
  endpoint: string;
  payload: Record<string, unknown>;
}

export interface HandleIncidentOptions {
  kind: IncidentKind;
  path: string;
  envelope: Record<string, string>;
  detectedAt: number;
  cookies: SessionCookies;
  reporters: string[];
  outbox: OutboxItem[];
  sessionCookie?: string;
  post?: PostFn;
}

export async function handleIncident(options: HandleIncidentOptions): Promise<IncidentReport> {
  const {
    kind,
    path,
    envelope,
    detectedAt,
    cookies,
    reporters,
    outbox,
    sessionCookie = DEFAULT_SESSION_COOKIE,
    post = postJson,
  } = options;

  const report: IncidentReport = {
    reportId: crypto.randomUUID().replace(/-/g, ""),
    kind,
    path,
    envelope,
    detectedAt,
    actions: new Set(),
  };

  await cookies.clear(sessionCookie);
  report.actions.add("session_terminated");
  report.actions.add("user_warned");

  // The wire payload carries the actions taken before dispatch; whether
  // the report itself got through is the collector's knowledge, not the
  // payload's.
  const payload = toPayload(report);
  const body = JSON.stringify(payload);
  let delivered = false;
  for (const endpoint of reporters) {
    if (await post(endpoint, body)) {
      delivered = true;
    } else {
      outbox.push({ endpoint, payload });
    }
  }
  if (delivered) report.actions.add("reported");
  return report;
}

export async function flushOutbox(
  outbox: OutboxItem[],
  post: PostFn = postJson,
): Promise<{ delivered: number; remaining: number }> {
  const undeliverable: OutboxItem[] = [];
  let delivered = 0;
  for (const item of outbox.splice(0)) {
    if (await post(item.endpoint, JSON.stringify(item.payload))) {
      delivered += 1;
    } else {
      undeliverable.push(item);
    }
  }
  outbox.push(...undeliverable);
  return { delivered, remaining: outbox.length };
}
