/** HTTP client for the audit service.
 *
 * All mutations on one audit are serialized through a per-audit promise
 * chain so the UI never races itself, and batch pushes carry a client
 * generated idempotency key so a retried click replays instead of
 * duplicating.
 */

import type {
  AnswerDoc,
  AuditSnapshot,
  BindingDoc,
  CatalogDoc,
  CoverageDoc,
  ErrorEnvelope,
  IngestReceipt,
  QueryDoc,
  QueryResponse,
  Recommendation,
  ReportDoc,
  Scalar,
} from "./types.js";

export interface HttpRequest {
  method: string;
  url: string;
  headers: Record<string, string>;
  body?: unknown;
}

export interface HttpResponse {
  status: number;
  body: unknown;
}

export type HttpFn = (req: HttpRequest) => Promise<HttpResponse>;

export class ApiError extends Error {
  readonly code: string;
  readonly status: number;
  readonly detail: Record<string, unknown>;

  constructor(code: string, message: string, status: number, detail: Record<string, unknown>) {
    super(message);
    this.name = "ApiError";
    this.code = code;
    this.status = status;
    this.detail = detail;
  }
}

/** Transport failure (server unreachable, malformed response). */
export class TransportError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "TransportError";
  }
}

function parseError(status: number, body: unknown): ApiError {
  const envelope = body as Partial<ErrorEnvelope> | null;
  if (envelope && typeof envelope === "object" && envelope.error && envelope.error.code) {
    const { code, message, ...rest } = envelope.error;
    return new ApiError(String(code), String(message ?? code), status, rest);
  }
  return new ApiError("http_error", `request failed with status ${status}`, status, {});
}

let keyCounter = 0;

/** Fresh idempotency key; one per user intent, reused across retries. */
export function makeIdempotencyKey(): string {
  const g = globalThis as { crypto?: { randomUUID?: () => string } };
  if (g.crypto && typeof g.crypto.randomUUID === "function") {
    return `ui-${g.crypto.randomUUID()}`;
  }
  keyCounter += 1;
  return `ui-${Date.now().toString(16)}-${keyCounter}`;
}

/** Adapter from the fetch API to HttpFn, for browser use. */
export function fetchHttp(fetchImpl: typeof fetch): HttpFn {
  return async (req) => {
    let response: Response;
    try {
      response = await fetchImpl(req.url, {
        method: req.method,
        headers: { "content-type": "application/json", ...req.headers },
        body: req.body === undefined ? undefined : JSON.stringify(req.body),
      });
    } catch (exc) {
      throw new TransportError(`cannot reach server: ${String(exc)}`);
    }
    const text = await response.text();
    let body: unknown = null;
    if (text) {
      try {
        body = JSON.parse(text);
      } catch {
        throw new TransportError(`server returned a non-JSON body (status ${response.status})`);
      }
    }
    return { status: response.status, body };
  };
}

export class ApiClient {
  private readonly chains = new Map<string, Promise<unknown>>();

  constructor(
    readonly baseUrl: string,
    readonly token: string,
    private readonly http: HttpFn,
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    headers: Record<string, string> = {},
  ): Promise<T> {
    const withAuth = this.token ? { authorization: `Bearer ${this.token}`, ...headers } : headers;
    const response = await this.http({
      method,
      url: this.baseUrl.replace(/\/$/, "") + path,
      headers: withAuth,
      body,
    });
    if (response.status >= 400) {
      throw parseError(response.status, response.body);
    }
    return response.body as T;
  }

  /** Serialize a mutation behind any in-flight mutation on the same audit. */
  private mutate<T>(auditId: string, run: () => Promise<T>): Promise<T> {
    const tail = (this.chains.get(auditId) ?? Promise.resolve()).then(run, run);
    this.chains.set(
      auditId,
      tail.then(
        () => undefined,
        () => undefined,
      ),
    );
    return tail;
  }

  healthz(): Promise<{ status: string; version: string; audits: number }> {
    return this.request("GET", "/api/v1/healthz");
  }

  getCatalog(): Promise<CatalogDoc> {
    return this.request("GET", "/api/v1/catalog");
  }

  listAudits(): Promise<{ audits: { audit_id: string; state: string; goal: string }[] }> {
    return this.request("GET", "/api/v1/audits");
  }

  createAudit(system: unknown, goal: string, auditId?: string): Promise<AuditSnapshot> {
    const body: Record<string, unknown> = { system, goal };
    if (auditId) body.audit_id = auditId;
    return this.request<{ audit: AuditSnapshot }>("POST", "/api/v1/audits", body).then(
      (r) => r.audit,
    );
  }

  getAudit(auditId: string): Promise<AuditSnapshot> {
    return this.request<{ audit: AuditSnapshot }>(
      "GET",
      `/api/v1/audits/${encodeURIComponent(auditId)}`,
    ).then((r) => r.audit);
  }

  getRecommendations(auditId: string): Promise<Recommendation[]> {
    return this.request<{ recommendations: Recommendation[] }>(
      "GET",
      `/api/v1/audits/${encodeURIComponent(auditId)}/recommendations`,
    ).then((r) => r.recommendations);
  }

  submitSelection(auditId: string, questionIds: string[]): Promise<AuditSnapshot> {
    return this.mutate(auditId, () =>
      this.request<{ audit: AuditSnapshot }>(
        "POST",
        `/api/v1/audits/${encodeURIComponent(auditId)}/selection`,
        { question_ids: questionIds },
      ).then((r) => r.audit),
    );
  }

  registerBinding(auditId: string, binding: BindingDoc): Promise<AuditSnapshot> {
    return this.mutate(auditId, () =>
      this.request<{ audit: AuditSnapshot }>(
        "POST",
        `/api/v1/audits/${encodeURIComponent(auditId)}/bindings`,
        binding,
      ).then((r) => r.audit),
    );
  }

  getCoverage(auditId: string): Promise<CoverageDoc> {
    return this.request<{ coverage: CoverageDoc }>(
      "GET",
      `/api/v1/audits/${encodeURIComponent(auditId)}/coverage`,
    ).then((r) => r.coverage);
  }

  changeState(auditId: string, target: string, override = false): Promise<AuditSnapshot> {
    const body: Record<string, unknown> = { target };
    if (override) body.override = true;
    return this.mutate(auditId, () =>
      this.request<{ audit: AuditSnapshot }>(
        "POST",
        `/api/v1/audits/${encodeURIComponent(auditId)}/state`,
        body,
      ).then((r) => r.audit),
    );
  }

  ingestBatch(
    auditId: string,
    payload: Record<string, unknown>,
    idempotencyKey: string,
  ): Promise<IngestReceipt> {
    return this.mutate(auditId, () =>
      this.request<{ receipt: IngestReceipt }>(
        "POST",
        `/api/v1/audits/${encodeURIComponent(auditId)}/artefacts:batch`,
        payload,
        { "idempotency-key": idempotencyKey },
      ).then((r) => r.receipt),
    );
  }

  runQuery(auditId: string, query: QueryDoc, asOf?: number): Promise<QueryResponse> {
    const body: Record<string, unknown> = { query };
    if (asOf !== undefined) body.as_of = asOf;
    return this.request("POST", `/api/v1/audits/${encodeURIComponent(auditId)}/queries`, body);
  }

  answerQuestion(
    auditId: string,
    questionId: string,
    params: Record<string, Scalar>,
    asOf?: number,
  ): Promise<AnswerDoc> {
    const body: Record<string, unknown> = { question_id: questionId, params };
    if (asOf !== undefined) body.as_of = asOf;
    return this.request<{ answer: AnswerDoc }>(
      "POST",
      `/api/v1/audits/${encodeURIComponent(auditId)}/answers`,
      body,
    ).then((r) => r.answer);
  }

  generateReport(
    auditId: string,
    params: Record<string, Record<string, Scalar>>,
    asOf?: number,
  ): Promise<ReportDoc> {
    const body: Record<string, unknown> = { params };
    if (asOf !== undefined) body.as_of = asOf;
    return this.mutate(auditId, () =>
      this.request<{ report: ReportDoc }>(
        "POST",
        `/api/v1/audits/${encodeURIComponent(auditId)}/report`,
        body,
      ).then((r) => r.report),
    );
  }
}
