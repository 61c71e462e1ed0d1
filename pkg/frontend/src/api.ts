// Typed client for the review API. Every request carries the bearer token;
// non-2xx responses raise ApiError with the server's detail string so views
// can render conflicts (double vote, blocked export) as non-fatal notices.

import type {
  Annotation,
  AnnotationMode,
  CandidateStatus,
  CandidateView,
  Decision,
  DocumentRecord,
  DocumentSummary,
  JobStatus,
  ProjectSummary,
} from "./types.js";

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`API error ${status}: ${detail}`);
    this.status = status;
    this.detail = detail;
  }
}

async function fail(resp: Response): Promise<never> {
  let detail = resp.statusText;
  try {
    const body = await resp.json();
    if (body && typeof body.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly token: string,
  ) {}

  private headers(json = false): Record<string, string> {
    const h: Record<string, string> = { Authorization: `Bearer ${this.token}` };
    if (json) h["Content-Type"] = "application/json";
    return h;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, { headers: this.headers() });
    if (!resp.ok) await fail(resp);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, body: unknown): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: this.headers(true),
      body: JSON.stringify(body),
    });
    if (!resp.ok) await fail(resp);
    return (await resp.json()) as T;
  }

  listProjects(): Promise<{ projects: string[] }> {
    return this.getJson("/projects");
  }

  getProject(projectId: string): Promise<ProjectSummary> {
    return this.getJson(`/projects/${encodeURIComponent(projectId)}`);
  }

  listDocuments(projectId: string): Promise<{ documents: DocumentSummary[] }> {
    return this.getJson(`/projects/${encodeURIComponent(projectId)}/documents`);
  }

  getDocument(projectId: string, docId: string): Promise<DocumentRecord> {
    return this.getJson(
      `/projects/${encodeURIComponent(projectId)}/documents/${encodeURIComponent(docId)}`,
    );
  }

  getCandidates(
    projectId: string,
    opts: { status?: CandidateStatus; annotator?: string } = {},
  ): Promise<{ candidates: CandidateView[] }> {
    const params = new URLSearchParams();
    if (opts.status) params.set("status", opts.status);
    if (opts.annotator) params.set("annotator", opts.annotator);
    const query = params.toString();
    return this.getJson(
      `/projects/${encodeURIComponent(projectId)}/candidates${query ? `?${query}` : ""}`,
    );
  }

  castVote(candidateId: string, annotatorId: string, decision: Decision): Promise<CandidateView> {
    return this.postJson(`/candidates/${encodeURIComponent(candidateId)}/votes`, {
      annotator_id: annotatorId,
      decision,
    });
  }

  getAnnotations(
    projectId: string,
    mode: AnnotationMode,
  ): Promise<{ mode: string; annotations: Annotation[] }> {
    return this.getJson(`/projects/${encodeURIComponent(projectId)}/annotations?mode=${mode}`);
  }

  startRun(projectId: string): Promise<{ job_id: string; status: string }> {
    return this.postJson(`/projects/${encodeURIComponent(projectId)}/run`, {});
  }

  getJob(projectId: string, jobId: string): Promise<JobStatus> {
    return this.getJson(
      `/projects/${encodeURIComponent(projectId)}/jobs/${encodeURIComponent(jobId)}`,
    );
  }

  /** Raw export bytes, returned exactly as the server sent them. */
  async exportBytes(
    projectId: string,
    kind: "dataset" | "finetune",
  ): Promise<Uint8Array<ArrayBuffer>> {
    const resp = await fetch(
      `${this.baseUrl}/projects/${encodeURIComponent(projectId)}/export/${kind}`,
      { headers: this.headers() },
    );
    if (!resp.ok) await fail(resp);
    return new Uint8Array(await resp.arrayBuffer());
  }
}
