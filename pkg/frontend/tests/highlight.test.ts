import { describe, expect, it } from "vitest";

import { activityColors, segmentDocument } from "../src/highlight.js";
import type { Annotation } from "../src/types.js";

function ann(start: number, end: number, activity = "T01", candidate = "cand-1"): Annotation {
  return {
    doc_id: "doc-a",
    char_start: start,
    char_end: end,
    activity_id: activity,
    retrieval_score: 0.5,
    label: 1,
    candidate_id: candidate,
  };
}

const TEXT = "The fleet operates with zero direct emissions on all interurban lines.";

describe("segmentDocument", () => {
  it("splits text at exact span boundaries", () => {
    const { segments, invalid } = segmentDocument(TEXT, [ann(4, 9)]);
    expect(invalid).toEqual([]);
    expect(segments.map((s) => [s.start, s.end])).toEqual([
      [0, 4],
      [4, 9],
      [9, TEXT.length],
    ]);
    expect(segments[1].text).toBe("fleet");
    expect(segments[1].annotations).toHaveLength(1);
    expect(segments[0].annotations).toHaveLength(0);
  });

  it("concatenation of segments reconstructs the document", () => {
    const { segments } = segmentDocument(TEXT, [ann(4, 9), ann(24, 45, "T03", "cand-2")]);
    expect(segments.map((s) => s.text).join("")).toBe(TEXT);
  });

  it("identical spans from two activities stack on one segment", () => {
    const { segments } = segmentDocument(TEXT, [
      ann(24, 45, "T03", "cand-2"),
      ann(24, 45, "T01", "cand-1"),
    ]);
    const marked = segments.filter((s) => s.annotations.length > 0);
    expect(marked).toHaveLength(1);
    expect(marked[0].start).toBe(24);
    expect(marked[0].end).toBe(45);
    // Sorted by activity id regardless of input order.
    expect(marked[0].annotations.map((a) => a.activity_id)).toEqual(["T01", "T03"]);
  });

  it("partially overlapping spans split into exclusive and shared segments", () => {
    const { segments } = segmentDocument(TEXT, [ann(0, 20, "T01"), ann(10, 30, "T02", "cand-2")]);
    const shape = segments.map((s) => [s.start, s.end, s.annotations.map((a) => a.activity_id)]);
    expect(shape).toEqual([
      [0, 10, ["T01"]],
      [10, 20, ["T01", "T02"]],
      [20, 30, ["T02"]],
      [30, TEXT.length, []],
    ]);
  });

  it("rejects spans outside the document but keeps rendering", () => {
    const bad = ann(60, 500, "T05", "cand-bad");
    const { segments, invalid } = segmentDocument(TEXT, [ann(4, 9), bad]);
    expect(invalid).toEqual([bad]);
    expect(segments.map((s) => s.text).join("")).toBe(TEXT);
  });

  it("zero annotations yields one plain segment", () => {
    const { segments } = segmentDocument(TEXT, []);
    expect(segments).toHaveLength(1);
    expect(segments[0].annotations).toEqual([]);
    expect(segments[0].text).toBe(TEXT);
  });
});

describe("activityColors", () => {
  it("assigns deterministic colors by sorted activity id", () => {
    const a = activityColors([ann(0, 5, "T09"), ann(0, 5, "T01")]);
    const b = activityColors([ann(0, 5, "T01"), ann(0, 5, "T09")]);
    expect(a).toEqual(b);
    expect(a.get("T01")).not.toBe(a.get("T09"));
  });
});
