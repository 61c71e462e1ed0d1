// Payload shapes of the review API. Fields marked optional are absent in
// blind mode until a candidate finalizes (the server decides; the UI never
// reconstructs hidden information).

export type CandidateStatus = "pending" | "accepted" | "rejected";
export type Decision = "confirm" | "reject";
export type AnnotationMode = "model" | "adjudicated";

export interface MyVote {
  decision: Decision;
  timestamp: string;
}

export interface VoteView {
  annotator_id: string;
  decision: Decision;
  timestamp: string;
}

export interface ModelVerdict {
  label: 0 | 1;
  probability: number | null;
  raw_output: string;
  template_id: string;
}

export interface CandidateView {
  candidate_id: string;
  project_id: string;
  doc_id: string;
  doc_title: string;
  activity_id: string;
  activity_title: string;
  activity_text: string;
  char_start: number;
  char_end: number;
  chunk_text: string;
  context_before: string;
  context_after: string;
  status: CandidateStatus;
  my_vote: MyVote | null;
  // Revealed only when blind mode is off or the candidate is finalized.
  retrieval_score?: number;
  model_verdict?: ModelVerdict | null;
  votes?: VoteView[];
}

export interface Annotation {
  doc_id: string;
  char_start: number;
  char_end: number;
  activity_id: string;
  retrieval_score: number;
  label: number;
  candidate_id: string;
}

export interface DocumentRecord {
  doc_id: string;
  company: string;
  title: string;
  text: string;
  page_offsets: [number, number][];
}

export interface DocumentSummary {
  doc_id: string;
  company: string;
  title: string;
  characters: number;
  pages: number;
}

export interface ProjectSummary {
  project_id: string;
  nace_codes: string[];
  activities: number;
  documents: number;
  candidates: Record<CandidateStatus, number>;
  votes: number;
  config: Record<string, unknown>;
  run_errors: [string, string][];
}

export interface JobStatus {
  job_id: string;
  status: "queued" | "running" | "done" | "failed";
  detail: string;
  candidates: number | null;
}
