// DOM rendering. The document view turns segmentation output into text nodes
// and <mark> elements, so the concatenated DOM text equals the document text
// and every mark sits at exactly its standoff offsets. Candidate cards never
// invent hidden fields: blind-mode responses simply lack them.

import { activityColors, segmentDocument } from "./highlight.js";
import type { Annotation, CandidateView } from "./types.js";

export interface DocumentViewHandlers {
  onCandidateClick?: (candidateId: string) => void;
}

export function renderDocumentView(
  container: HTMLElement,
  text: string,
  annotations: Annotation[],
  handlers: DocumentViewHandlers = {},
): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  const { segments, invalid } = segmentDocument(text, annotations);
  const colors = activityColors(annotations);

  if (invalid.length > 0) {
    const badge = doc.createElement("div");
    badge.className = "error-badge";
    badge.textContent =
      `${invalid.length} annotation(s) outside the document were not drawn: ` +
      invalid.map((a) => a.candidate_id).join(", ");
    container.appendChild(badge);
  }

  const pre = doc.createElement("pre");
  pre.className = "doc-text";
  for (const seg of segments) {
    if (seg.annotations.length === 0) {
      pre.appendChild(doc.createTextNode(seg.text));
      continue;
    }
    const mark = doc.createElement("mark");
    mark.textContent = seg.text;
    const ids = seg.annotations.map((a) => a.activity_id);
    mark.dataset.activityIds = ids.join(",");
    mark.dataset.candidateIds = seg.annotations.map((a) => a.candidate_id).join(",");
    mark.dataset.charStart = String(seg.start);
    mark.dataset.charEnd = String(seg.end);
    if (seg.annotations.length > 1) {
      // Stacked indicator: striped background, one band per activity.
      mark.classList.add("stacked");
      const bands = ids.map((id, i) => {
        const color = colors.get(id) ?? "#eeeeee";
        const from = Math.round((i / ids.length) * 100);
        const to = Math.round(((i + 1) / ids.length) * 100);
        return `${color} ${from}%, ${color} ${to}%`;
      });
      mark.style.background = `linear-gradient(180deg, ${bands.join(", ")})`;
    } else {
      mark.style.background = colors.get(ids[0]) ?? "#eeeeee";
    }
    mark.title = ids.join(" + ");
    if (handlers.onCandidateClick) {
      mark.addEventListener("click", () => {
        handlers.onCandidateClick!(seg.annotations[0].candidate_id);
      });
    }
    pre.appendChild(mark);
  }
  container.appendChild(pre);
}

/** Character offsets of every <mark> in a rendered document view, measured
 * by walking the DOM text. Used by tests to prove highlight fidelity. */
export function measureMarkOffsets(
  container: HTMLElement,
): { start: number; end: number; activityIds: string[] }[] {
  const pre = container.querySelector("pre.doc-text");
  if (!pre) return [];
  const out: { start: number; end: number; activityIds: string[] }[] = [];
  let offset = 0;
  pre.childNodes.forEach((node) => {
    const len = (node.textContent ?? "").length;
    if (node.nodeType === 1 && (node as Element).tagName === "MARK") {
      const mark = node as HTMLElement;
      out.push({
        start: offset,
        end: offset + len,
        activityIds: (mark.dataset.activityIds ?? "").split(",").filter(Boolean),
      });
    }
    offset += len;
  });
  return out;
}

export function renderCandidateCard(
  container: HTMLElement,
  view: CandidateView,
  onVote?: (decision: "confirm" | "reject") => void,
): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  const card = doc.createElement("article");
  card.className = `candidate-card status-${view.status}`;
  card.dataset.candidateId = view.candidate_id;

  const header = doc.createElement("header");
  const title = doc.createElement("strong");
  title.textContent = `${view.activity_id} — ${view.activity_title}`;
  const status = doc.createElement("span");
  status.className = "status-badge";
  status.textContent = view.status; // always the API's status, never computed here
  header.append(title, status);
  card.appendChild(header);

  const activity = doc.createElement("p");
  activity.className = "activity-text";
  activity.textContent = view.activity_text;
  card.appendChild(activity);

  const excerpt = doc.createElement("blockquote");
  excerpt.className = "excerpt";
  const before = doc.createElement("span");
  before.className = "context";
  before.textContent = view.context_before;
  const chunk = doc.createElement("mark");
  chunk.textContent = view.chunk_text;
  const after = doc.createElement("span");
  after.className = "context";
  after.textContent = view.context_after;
  excerpt.append(before, chunk, after);
  card.appendChild(excerpt);

  // Revealed fields only: absent keys mean the server is blinding them.
  if (view.retrieval_score !== undefined) {
    const score = doc.createElement("p");
    score.className = "retrieval-score";
    score.textContent = `retrieval score ${view.retrieval_score.toFixed(4)}`;
    card.appendChild(score);
  }
  if (view.model_verdict !== undefined && view.model_verdict !== null) {
    const verdict = doc.createElement("p");
    verdict.className = "model-verdict";
    verdict.textContent = `model verdict: ${view.model_verdict.label}`;
    card.appendChild(verdict);
  }
  if (view.votes !== undefined) {
    const votes = doc.createElement("ul");
    votes.className = "votes";
    for (const v of view.votes) {
      const li = doc.createElement("li");
      li.textContent = `${v.annotator_id}: ${v.decision}`;
      votes.appendChild(li);
    }
    card.appendChild(votes);
  }

  if (view.my_vote) {
    const mine = doc.createElement("p");
    mine.className = "my-vote";
    mine.textContent = `you voted: ${view.my_vote.decision}`;
    card.appendChild(mine);
  } else if (view.status === "pending" && onVote) {
    const controls = doc.createElement("div");
    controls.className = "vote-controls";
    for (const decision of ["confirm", "reject"] as const) {
      const button = doc.createElement("button");
      button.textContent = decision;
      button.dataset.decision = decision;
      button.addEventListener("click", () => onVote(decision));
      controls.appendChild(button);
    }
    card.appendChild(controls);
  }

  container.appendChild(card);
}

export function renderNotice(container: HTMLElement, message: string, kind = "info"): void {
  const doc = container.ownerDocument;
  const notice = doc.createElement("div");
  notice.className = `notice notice-${kind}`;
  notice.textContent = message;
  container.appendChild(notice);
  // Non-fatal: notices expire rather than blocking the workflow.
  setTimeout(() => notice.remove(), 6000);
}
