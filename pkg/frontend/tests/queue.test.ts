import { describe, expect, it } from "vitest";

import { candidateQueue, queueCounts, reconcileVote, reviewedList } from "../src/queue.js";
import type { CandidateView } from "../src/types.js";

let n = 0;

function view(overrides: Partial<CandidateView> = {}): CandidateView {
  n += 1;
  return {
    candidate_id: `cand-${n}`,
    project_id: "p1",
    doc_id: "doc-a",
    doc_title: "",
    activity_id: "T01",
    activity_title: "",
    activity_text: "",
    char_start: n * 10,
    char_end: n * 10 + 5,
    chunk_text: "",
    context_before: "",
    context_after: "",
    status: "pending",
    my_vote: null,
    ...overrides,
  };
}

describe("candidateQueue", () => {
  it("keeps only pending candidates I have not voted on", () => {
    const mine = view({ my_vote: { decision: "confirm", timestamp: "t" } });
    const finalized = view({ status: "accepted" });
    const open = view();
    const queue = candidateQueue([mine, finalized, open]);
    expect(queue.map((c) => c.candidate_id)).toEqual([open.candidate_id]);
  });

  it("orders by document then character offset", () => {
    const late = view({ doc_id: "doc-b", char_start: 5, char_end: 9 });
    const early = view({ doc_id: "doc-a", char_start: 50, char_end: 60 });
    const earliest = view({ doc_id: "doc-a", char_start: 3, char_end: 9 });
    const queue = candidateQueue([late, early, earliest]);
    expect(queue.map((c) => c.candidate_id)).toEqual([
      earliest.candidate_id,
      early.candidate_id,
      late.candidate_id,
    ]);
  });

  it("ten pending minus three voted leaves a queue of seven", () => {
    const views = Array.from({ length: 10 }, () => view());
    for (const v of views.slice(0, 3)) {
      v.my_vote = { decision: "reject", timestamp: "t" };
    }
    expect(candidateQueue(views)).toHaveLength(7);
  });

  it("empty project yields an empty queue", () => {
    expect(candidateQueue([])).toEqual([]);
    expect(queueCounts([])).toEqual({ toReview: 0, reviewed: 0, accepted: 0, rejected: 0 });
  });
});

describe("reviewedList", () => {
  it("collects voted and finalized items", () => {
    const mine = view({ my_vote: { decision: "confirm", timestamp: "t" } });
    const finalized = view({ status: "rejected" });
    const open = view();
    const reviewed = reviewedList([mine, finalized, open]);
    expect(reviewed.map((c) => c.candidate_id).sort()).toEqual(
      [mine.candidate_id, finalized.candidate_id].sort(),
    );
  });
});

describe("reconcileVote", () => {
  it("vote cast: item leaves the queue without a reload", () => {
    const a = view();
    const b = view();
    const serverView: CandidateView = {
      ...a,
      my_vote: { decision: "confirm", timestamp: "t1" },
    };
    const next = reconcileVote([a, b], serverView);
    expect(candidateQueue(next).map((c) => c.candidate_id)).toEqual([b.candidate_id]);
    expect(reviewedList(next).map((c) => c.candidate_id)).toEqual([a.candidate_id]);
  });

  it("tally badge updates when the server reports finalization", () => {
    const a = view();
    const serverView: CandidateView = {
      ...a,
      status: "accepted",
      my_vote: { decision: "confirm", timestamp: "t1" },
      votes: [
        { annotator_id: "me", decision: "confirm", timestamp: "t1" },
        { annotator_id: "other", decision: "confirm", timestamp: "t0" },
      ],
    };
    const next = reconcileVote([a], serverView);
    expect(next[0].status).toBe("accepted");
    expect(queueCounts(next).accepted).toBe(1);
  });

  it("keeps untouched items identical", () => {
    const a = view();
    const b = view();
    const next = reconcileVote([a, b], { ...a, my_vote: { decision: "reject", timestamp: "t" } });
    expect(next[1]).toBe(b);
  });
});
