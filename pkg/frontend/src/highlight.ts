// Span segmentation for the document view.
//
// Standoff annotations arrive as character offsets into the document text.
// The text is cut at every span boundary so each segment is either plain or
// covered by one or more annotations; overlapping spans therefore stack
// naturally instead of producing nested or broken markup. Offsets are never
// adjusted: what the pipeline emitted is exactly what gets highlighted.

import type { Annotation } from "./types.js";

export interface Segment {
  start: number;
  end: number;
  text: string;
  /** Annotations covering this segment, sorted by activity_id. */
  annotations: Annotation[];
}

export interface SegmentationResult {
  segments: Segment[];
  /** Annotations whose span falls outside the document; reported, not drawn. */
  invalid: Annotation[];
}

export function segmentDocument(text: string, annotations: Annotation[]): SegmentationResult {
  const valid: Annotation[] = [];
  const invalid: Annotation[] = [];
  for (const ann of annotations) {
    const ok =
      Number.isInteger(ann.char_start) &&
      Number.isInteger(ann.char_end) &&
      ann.char_start >= 0 &&
      ann.char_start < ann.char_end &&
      ann.char_end <= text.length;
    (ok ? valid : invalid).push(ann);
  }

  const cuts = new Set<number>([0, text.length]);
  for (const ann of valid) {
    cuts.add(ann.char_start);
    cuts.add(ann.char_end);
  }
  const bounds = [...cuts].sort((a, b) => a - b);

  const segments: Segment[] = [];
  for (let i = 0; i + 1 < bounds.length; i++) {
    const start = bounds[i];
    const end = bounds[i + 1];
    const covering = valid
      .filter((a) => a.char_start <= start && end <= a.char_end)
      .sort((a, b) => (a.activity_id < b.activity_id ? -1 : a.activity_id > b.activity_id ? 1 : 0));
    segments.push({ start, end, text: text.slice(start, end), annotations: covering });
  }
  if (text.length === 0) {
    segments.push({ start: 0, end: 0, text: "", annotations: [] });
  }
  return { segments, invalid };
}

// Deterministic activity color assignment: activities are sorted so every
// session shows the same palette regardless of annotation order.
const PALETTE = [
  "#ffd54f", "#80cbc4", "#ef9a9a", "#90caf9", "#ce93d8",
  "#a5d6a7", "#ffab91", "#b0bec5", "#fff176", "#81d4fa",
  "#bcaaa4", "#e6ee9c",
];

export function activityColors(annotations: Annotation[]): Map<string, string> {
  const ids = [...new Set(annotations.map((a) => a.activity_id))].sort();
  const colors = new Map<string, string>();
  ids.forEach((id, i) => colors.set(id, PALETTE[i % PALETTE.length]));
  return colors;
}
