// Typed client for the annotation service HTTP API. This is the only way
// the UI talks to the backend; nothing here computes statistics or touches
// other services.

export type Label = "story" | "event";

/** Wire shape of one labeled span, as POSTed and as stored. */
export interface WireSpan {
  label: Label;
  start: number;
  end: number;
}

/** Document payload from /api/tasks/next and /api/docs/{id}. */
export interface DocPayload {
  id: string;
  community: string;
  category: string;
  kind: string;
  text: string;
  summary?: string;
  created_at?: number;
  /** [start, end) char offsets of each token in `text`. */
  tokens: [number, number][];
  /** [start, end) char offsets of each sentence in `text`. */
  sentences: [number, number][];
  /** Latest accepted revision per annotator (0 = nothing stored yet). */
  revisions: Record<string, number>;
}

export interface TaskPayload {
  doc: DocPayload | null;
  remaining: number;
  completed: number;
}

export interface SubmitRequest {
  doc_id: string;
  annotator: string;
  revision: number;
  spans: WireSpan[];
  story_present?: boolean;
}

export interface SubmitResponse {
  doc_id: string;
  annotator: string;
  accepted_revision: number;
  story_present: boolean;
  spans: WireSpan[];
}

export interface AgreementPayload {
  label: Label;
  unit: "document" | "token";
  kappa: number;
  observed_agreement: number;
  expected_agreement: number;
  n_docs: number;
}

export interface ExportDocument {
  id: string;
  community: string;
  category: string;
  kind: string;
  text: string;
  summary?: string;
}

export interface ExportAnnotation {
  doc_id: string;
  annotator: string;
  label: Label;
  start: number;
  end: number;
}

export interface ExportCompletion {
  doc_id: string;
  annotator: string;
  role: "annotator" | "adjudicator";
}

export interface ExportPayload {
  documents: ExportDocument[];
  annotations: ExportAnnotation[];
  completions: ExportCompletion[];
}

/**
 * Error raised for any non-2xx response. `code` carries the service's
 * machine-readable error code ("stale_revision", "invalid_span", ...);
 * network-level failures use code "network".
 */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
    this.code = code;
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  let res: Response;
  try {
    res = await fetch(path, init);
  } catch (e) {
    throw new ApiError(0, "network", `service unreachable: ${String(e)}`);
  }
  let body: unknown = null;
  try {
    body = await res.json();
  } catch {
    // fall through; error paths below cope with a missing body
  }
  if (!res.ok) {
    const err = (body ?? {}) as { code?: string; message?: string; detail?: unknown };
    throw new ApiError(
      res.status,
      err.code ?? "http_error",
      err.message ?? `request failed with status ${res.status}`,
    );
  }
  return body as T;
}

export function fetchNextTask(annotator: string): Promise<TaskPayload> {
  return request<TaskPayload>(
    `/api/tasks/next?annotator=${encodeURIComponent(annotator)}`,
  );
}

export function fetchDoc(docId: string): Promise<DocPayload> {
  return request<DocPayload>(`/api/docs/${encodeURIComponent(docId)}`);
}

export function submitAnnotation(req: SubmitRequest): Promise<SubmitResponse> {
  return request<SubmitResponse>("/api/annotations", {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(req),
  });
}

export function fetchAgreement(
  label: Label,
  unit: "document" | "token",
): Promise<AgreementPayload> {
  return request<AgreementPayload>(
    `/api/agreement?label=${encodeURIComponent(label)}&unit=${encodeURIComponent(unit)}`,
  );
}

export function fetchExport(): Promise<ExportPayload> {
  return request<ExportPayload>("/api/export");
}
