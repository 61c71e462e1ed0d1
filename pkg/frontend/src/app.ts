// Single-page wiring: session setup, candidate queue with confirm/reject,
// reviewed list, highlighted document view, and export downloads. All state
// comes from the API; votes are optimistic only until the server's response
// replaces the local view.

import { ApiClient, ApiError } from "./api.js";
import { downloadExport, saveAs, BlockedExportError } from "./exports.js";
import { candidateQueue, queueCounts, reconcileVote, reviewedList } from "./queue.js";
import { renderCandidateCard, renderDocumentView, renderNotice } from "./render.js";
import type { AnnotationMode, CandidateView } from "./types.js";

interface Session {
  baseUrl: string;
  token: string;
  annotator: string;
  projectId: string;
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function loadSession(): Session | null {
  const raw = localStorage.getItem("esgmap-session");
  return raw ? (JSON.parse(raw) as Session) : null;
}

function storeSession(session: Session): void {
  localStorage.setItem("esgmap-session", JSON.stringify(session));
}

class ReviewApp {
  private api: ApiClient;
  private candidates: CandidateView[] = [];

  constructor(private session: Session) {
    this.api = new ApiClient(session.baseUrl, session.token);
  }

  async refresh(): Promise<void> {
    const { candidates } = await this.api.getCandidates(this.session.projectId, {
      annotator: this.session.annotator,
    });
    this.candidates = candidates;
    this.renderQueue();
    this.renderReviewed();
    this.renderCounts();
  }

  private renderCounts(): void {
    const counts = queueCounts(this.candidates);
    el("counts").textContent =
      `${counts.toReview} to review · ${counts.accepted} accepted · ` +
      `${counts.rejected} rejected`;
  }

  private renderQueue(): void {
    const host = el("queue");
    host.textContent = "";
    const queue = candidateQueue(this.candidates);
    if (queue.length === 0) {
      const empty = document.createElement("p");
      empty.className = "empty-state";
      empty.textContent = "Nothing left to review.";
      host.appendChild(empty);
      return;
    }
    for (const view of queue) {
      const slot = document.createElement("div");
      host.appendChild(slot);
      renderCandidateCard(slot, view, (decision) => this.vote(view, decision));
    }
  }

  private renderReviewed(): void {
    const host = el("reviewed");
    host.textContent = "";
    for (const view of reviewedList(this.candidates)) {
      const slot = document.createElement("div");
      host.appendChild(slot);
      renderCandidateCard(slot, view);
    }
  }

  private async vote(view: CandidateView, decision: "confirm" | "reject"): Promise<void> {
    try {
      const serverView = await this.api.castVote(
        view.candidate_id,
        this.session.annotator,
        decision,
      );
      this.candidates = reconcileVote(this.candidates, serverView);
    } catch (err) {
      if (err instanceof ApiError && (err.status === 409 || err.status === 404)) {
        renderNotice(el("notices"), err.detail, "warn");
        await this.refresh();
        return;
      }
      throw err;
    }
    this.renderQueue();
    this.renderReviewed();
    this.renderCounts();
  }

  async showDocument(docId: string, mode: AnnotationMode): Promise<void> {
    const [doc, anns] = await Promise.all([
      this.api.getDocument(this.session.projectId, docId),
      this.api.getAnnotations(this.session.projectId, mode).catch((err) => {
        if (err instanceof ApiError && err.status === 422) {
          renderNotice(el("notices"), err.detail, "warn");
          return { mode, annotations: [] };
        }
        throw err;
      }),
    ]);
    renderDocumentView(
      el("document"),
      doc.text,
      anns.annotations.filter((a) => a.doc_id === docId),
      { onCandidateClick: (cid) => this.focusCandidate(cid) },
    );
  }

  private focusCandidate(candidateId: string): void {
    const card = document.querySelector(`[data-candidate-id="${candidateId}"]`);
    card?.scrollIntoView({ behavior: "smooth", block: "center" });
  }

  async populateDocumentPicker(): Promise<void> {
    const { documents } = await this.api.listDocuments(this.session.projectId);
    const picker = el<HTMLSelectElement>("doc-picker");
    picker.textContent = "";
    for (const d of documents) {
      const option = document.createElement("option");
      option.value = d.doc_id;
      option.textContent = `${d.title || d.doc_id} (${d.characters} chars)`;
      picker.appendChild(option);
    }
  }

  async export(kind: "dataset" | "finetune"): Promise<void> {
    try {
      saveAs(await downloadExport(this.api, this.session.projectId, kind));
    } catch (err) {
      if (err instanceof BlockedExportError) {
        renderNotice(el("notices"), `Export blocked: ${err.detail}`, "warn");
        return;
      }
      throw err;
    }
  }
}

export function boot(): void {
  const form = el<HTMLFormElement>("session-form");
  const existing = loadSession();
  if (existing) {
    (form.elements.namedItem("baseUrl") as HTMLInputElement).value = existing.baseUrl;
    (form.elements.namedItem("token") as HTMLInputElement).value = existing.token;
    (form.elements.namedItem("annotator") as HTMLInputElement).value = existing.annotator;
    (form.elements.namedItem("projectId") as HTMLInputElement).value = existing.projectId;
  }
  form.addEventListener("submit", async (event) => {
    event.preventDefault();
    const data = new FormData(form);
    const session: Session = {
      baseUrl: String(data.get("baseUrl") || "").replace(/\/$/, ""),
      token: String(data.get("token") || ""),
      annotator: String(data.get("annotator") || ""),
      projectId: String(data.get("projectId") || ""),
    };
    storeSession(session);
    const app = new ReviewApp(session);
    try {
      await app.refresh();
      await app.populateDocumentPicker();
    } catch (err) {
      renderNotice(el("notices"), err instanceof Error ? err.message : String(err), "warn");
      return;
    }
    el("workspace").hidden = false;

    el("refresh").onclick = () => void app.refresh();
    el<HTMLSelectElement>("doc-picker").onchange = () => void showDoc();
    el("show-doc").onclick = () => void showDoc();
    el("export-dataset").onclick = () => void app.export("dataset");
    el("export-finetune").onclick = () => void app.export("finetune");

    async function showDoc(): Promise<void> {
      const docId = el<HTMLSelectElement>("doc-picker").value;
      const mode = el<HTMLSelectElement>("mode-picker").value as AnnotationMode;
      if (docId) await app.showDocument(docId, mode);
    }
  });
}

if (typeof document !== "undefined" && document.getElementById("session-form")) {
  boot();
}
