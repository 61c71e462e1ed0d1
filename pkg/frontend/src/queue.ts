// Queue view-model. The UI never tallies: the status shown is always the
// API's status, and a cast vote is reconciled against the server's response
// rather than recomputed locally.

import type { CandidateView } from "./types.js";

function byDocumentOrder(a: CandidateView, b: CandidateView): number {
  if (a.doc_id !== b.doc_id) return a.doc_id < b.doc_id ? -1 : 1;
  if (a.char_start !== b.char_start) return a.char_start - b.char_start;
  if (a.char_end !== b.char_end) return a.char_end - b.char_end;
  return a.activity_id < b.activity_id ? -1 : a.activity_id > b.activity_id ? 1 : 0;
}

/** Pending candidates this annotator still has to judge, in document order. */
export function candidateQueue(candidates: CandidateView[]): CandidateView[] {
  return candidates
    .filter((c) => c.status === "pending" && c.my_vote === null)
    .sort(byDocumentOrder);
}

/** Everything already handled: my pending votes first, then finalized items. */
export function reviewedList(candidates: CandidateView[]): CandidateView[] {
  return candidates
    .filter((c) => c.status !== "pending" || c.my_vote !== null)
    .sort(byDocumentOrder);
}

/**
 * Replace the stored view of one candidate with the server's post-vote
 * response. Returns a new array; the voted item leaves the pending queue
 * because its my_vote (or status) changed.
 */
export function reconcileVote(
  candidates: CandidateView[],
  serverView: CandidateView,
): CandidateView[] {
  let found = false;
  const next = candidates.map((c) => {
    if (c.candidate_id === serverView.candidate_id) {
      found = true;
      return serverView;
    }
    return c;
  });
  if (!found) next.push(serverView);
  return next;
}

export interface QueueCounts {
  toReview: number;
  reviewed: number;
  accepted: number;
  rejected: number;
}

export function queueCounts(candidates: CandidateView[]): QueueCounts {
  return {
    toReview: candidateQueue(candidates).length,
    reviewed: reviewedList(candidates).length,
    accepted: candidates.filter((c) => c.status === "accepted").length,
    rejected: candidates.filter((c) => c.status === "rejected").length,
  };
}
