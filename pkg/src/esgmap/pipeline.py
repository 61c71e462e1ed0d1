"""End-to-end orchestration: NACE-filtered activities -> chunking -> vector
retrieval -> classification -> candidate mappings, plus standoff-annotation
projection and the on-disk project store.

A project directory is plain line-delimited records (one file per entity
type) with a JSON manifest, so review state stays diff-able and inspectable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from . import adjudication
from .adjudication import AdjudicationPolicy, CandidateMapping, Vote
from .classifier import (
    DEFAULT_TEMPLATE_ID,
    ClassificationRequest,
    InferenceBackend,
    Verdict,
    classify_batch,
)
from .corpus import Chunk, Document, chunk_document, document_from_record, document_to_record
from .exceptions import (
    EsgMapError,
    PendingCandidatesError,
    PipelineError,
    SchemaVersionError,
    StoreError,
)
from .taxonomy import (
    NaceCode,
    Taxonomy,
    activity_from_record,
    activity_to_record,
    select_activities,
)
from .vecindex import EmbeddingBackend, VectorIndex, build_index, load_index, query_top_k, save_index

STORE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ProjectConfig:
    """Every knob that influences a run, recorded so runs are reproducible."""

    chunk_target_tokens: int = 256
    chunk_overlap_tokens: int = 32
    top_k: int = 10
    min_score: float | None = None
    embedder_id: str = "hashed-bow-256"
    infer_backend_id: str = "stub"
    template_id: str = DEFAULT_TEMPLATE_ID
    seed: int = 0
    parallelism: int = 4
    panel_size: int = 3
    quorum: int = 2
    early_finalize: bool = True
    blind_mode: bool = True
    reveal_after_finalize: bool = True

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ProjectConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise StoreError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Project:
    project_id: str
    taxonomy: Taxonomy
    nace_codes: tuple[str, ...] = ()
    documents: dict[str, Document] = field(default_factory=dict)
    candidates: dict[str, CandidateMapping] = field(default_factory=dict)
    votes: list[Vote] = field(default_factory=list)
    config: ProjectConfig = field(default_factory=ProjectConfig)
    index: VectorIndex | None = None
    run_errors: list[tuple[str, str]] = field(default_factory=list)  # (candidate_id, message)

    def __post_init__(self):
        if not self.project_id:
            raise PipelineError("project_id must be non-empty")
        # Validate eagerly so a bad code fails at creation, not at run time.
        for code in self.nace_codes:
            NaceCode(code)

    @property
    def policy(self) -> AdjudicationPolicy:
        return AdjudicationPolicy(panel_size=self.config.panel_size, quorum=self.config.quorum)

    @property
    def early_finalize(self) -> bool:
        return self.config.early_finalize

    def add_document(self, doc: Document) -> None:
        if doc.doc_id in self.documents:
            raise PipelineError(f"document {doc.doc_id!r} already in project")
        self.documents[doc.doc_id] = doc


def candidate_id_for(doc_id: str, char_start: int, char_end: int, activity_id: str) -> str:
    digest = hashlib.sha256(f"{doc_id}|{char_start}|{char_end}|{activity_id}".encode()).hexdigest()
    return "cand-" + digest[:12]


def project_chunks(project: Project) -> list[Chunk]:
    """All chunks of all documents, in deterministic (doc_id, offset) order."""
    chunks = []
    for doc_id in sorted(project.documents):
        chunks.extend(
            chunk_document(
                project.documents[doc_id],
                target_size=project.config.chunk_target_tokens,
                overlap=project.config.chunk_overlap_tokens,
            )
        )
    return chunks


def run_pipeline(project: Project, embedder: EmbeddingBackend,
                 backend: InferenceBackend) -> list[CandidateMapping]:
    """Execute the full mapping flow and refresh the project's candidates.

    For each NACE-selected activity the top-k chunks are retrieved and
    classified; every (activity, retrieved chunk) becomes a candidate.
    Re-running replaces pending candidates but never touches finalized ones
    or their votes; classification failures are isolated per candidate and
    collected in project.run_errors.
    """
    cfg = project.config
    if not project.documents:
        raise PipelineError("project has no documents")
    if embedder.embedder_id != cfg.embedder_id:
        raise PipelineError(
            f"config expects embedder {cfg.embedder_id!r}, got {embedder.embedder_id!r}"
        )
    selected = select_activities(project.taxonomy, project.nace_codes)
    if not selected:
        raise PipelineError(
            f"no activities selected for NACE codes {sorted(project.nace_codes)}"
        )

    chunks = project_chunks(project)
    if not chunks:
        raise PipelineError("documents produced no chunks")
    index = build_index(chunks, embedder)
    project.index = index
    chunk_by_id = {c.chunk_id: c for c in chunks}

    k = min(cfg.top_k, len(chunks))
    planned: list[tuple] = []  # (candidate_id, activity, hit)
    seen_ids = set()
    for activity in selected:
        hits = query_top_k(index, activity.short_description, k, embedder)
        for hit in hits:
            if cfg.min_score is not None and hit.score < cfg.min_score:
                continue
            cid = candidate_id_for(hit.ref.doc_id, hit.ref.char_start,
                                   hit.ref.char_end, activity.activity_id)
            if cid in seen_ids:
                continue
            seen_ids.add(cid)
            planned.append((cid, activity, hit))

    # Finalized candidates survive re-runs untouched; only pendings are redone.
    finalized = {cid: c for cid, c in project.candidates.items()
                 if c.status != adjudication.PENDING}
    to_classify = [(cid, activity, hit) for cid, activity, hit in planned
                   if cid not in finalized]
    requests = [
        ClassificationRequest(
            chunk_text=chunk_by_id[hit.ref.chunk_id].text,
            activity_text=activity.short_description,
            prompt_template_id=cfg.template_id,
            chunk_id=hit.ref.chunk_id,
            activity_id=activity.activity_id,
        )
        for _, activity, hit in to_classify
    ]
    verdicts = classify_batch(requests, backend, parallelism=cfg.parallelism)

    new_candidates: dict[str, CandidateMapping] = {}
    errors: list[tuple[str, str]] = []
    fresh = iter(verdicts)
    for cid, activity, hit in planned:
        if cid in finalized:
            new_candidates[cid] = finalized[cid]
            continue
        verdict = next(fresh)
        model_verdict: Verdict | None
        if isinstance(verdict, EsgMapError):
            errors.append((cid, str(verdict)))
            model_verdict = None
        else:
            model_verdict = verdict
        new_candidates[cid] = CandidateMapping(
            candidate_id=cid,
            doc_id=hit.ref.doc_id,
            chunk_id=hit.ref.chunk_id,
            char_start=hit.ref.char_start,
            char_end=hit.ref.char_end,
            activity_id=activity.activity_id,
            retrieval_score=hit.score,
            model_verdict=model_verdict,
        )
    # Keep any finalized candidate that this run did not re-retrieve.
    for cid, cand in finalized.items():
        new_candidates.setdefault(cid, cand)

    project.candidates = new_candidates
    project.votes = [v for v in project.votes if v.candidate_id in new_candidates]
    project.run_errors = errors
    return list(new_candidates.values())


@dataclass(frozen=True)
class StandoffAnnotation:
    """A positive span stored separately from the text: (document, character
    span, activity) plus audit fields."""

    doc_id: str
    char_start: int
    char_end: int
    activity_id: str
    retrieval_score: float
    label: int
    candidate_id: str


def annotate(project: Project, mode: str = "model") -> list[StandoffAnnotation]:
    """Project candidates onto standoff annotations.

    mode="model": spans whose model verdict is 1. mode="adjudicated": spans
    accepted by the panel (requires every candidate finalized). Sorted by
    (doc_id, char_start).
    """
    if mode not in ("model", "adjudicated"):
        raise ValueError(f"unknown annotation mode {mode!r}")
    cands = list(project.candidates.values())
    if mode == "adjudicated":
        pending = [c.candidate_id for c in cands if c.status == adjudication.PENDING]
        if pending:
            raise PendingCandidatesError(pending)
        chosen = [c for c in cands if c.status == adjudication.ACCEPTED]
    else:
        chosen = [c for c in cands if c.model_verdict is not None and c.model_verdict.label == 1]
    chosen.sort(key=lambda c: (c.doc_id, c.char_start, c.char_end, c.activity_id))
    return [
        StandoffAnnotation(
            doc_id=c.doc_id,
            char_start=c.char_start,
            char_end=c.char_end,
            activity_id=c.activity_id,
            retrieval_score=c.retrieval_score,
            label=1,
            candidate_id=c.candidate_id,
        )
        for c in chosen
    ]


def _verdict_to_record(v: Verdict | None) -> dict | None:
    if v is None:
        return None
    return {"label": v.label, "probability": v.probability,
            "raw_output": v.raw_output, "template_id": v.template_id}


def _verdict_from_record(rec: dict | None) -> Verdict | None:
    if rec is None:
        return None
    return Verdict(label=int(rec["label"]),
                   probability=rec.get("probability"),
                   raw_output=rec.get("raw_output", ""),
                   template_id=rec.get("template_id", DEFAULT_TEMPLATE_ID))


def candidate_to_record(c: CandidateMapping) -> dict:
    return {
        "candidate_id": c.candidate_id,
        "doc_id": c.doc_id,
        "chunk_id": c.chunk_id,
        "char_start": c.char_start,
        "char_end": c.char_end,
        "activity_id": c.activity_id,
        "retrieval_score": c.retrieval_score,
        "model_verdict": _verdict_to_record(c.model_verdict),
        "status": c.status,
    }


def candidate_from_record(rec: dict) -> CandidateMapping:
    return CandidateMapping(
        candidate_id=rec["candidate_id"],
        doc_id=rec["doc_id"],
        chunk_id=rec["chunk_id"],
        char_start=int(rec["char_start"]),
        char_end=int(rec["char_end"]),
        activity_id=rec["activity_id"],
        retrieval_score=float(rec["retrieval_score"]),
        model_verdict=_verdict_from_record(rec.get("model_verdict")),
        status=rec.get("status", adjudication.PENDING),
    )


def serialize_candidates(candidates: Sequence[CandidateMapping]) -> bytes:
    lines = [json.dumps(candidate_to_record(c), ensure_ascii=False) for c in candidates]
    return ("".join(line + "\n" for line in lines)).encode("utf-8")


def _write_jsonl(path: Path, records) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise StoreError(f"{path.name}:{lineno}: corrupted record: {exc}") from exc
    return records


def save_project(project: Project, project_dir: str | Path) -> Path:
    """Write the whole project state into a directory (lossless round-trip)."""
    project_dir = Path(project_dir)
    project_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "schema_version": STORE_SCHEMA_VERSION,
        "project_id": project.project_id,
        "nace_codes": list(project.nace_codes),
        "taxonomy_version": project.taxonomy.version,
        "config": project.config.to_dict(),
        "run_errors": [list(e) for e in project.run_errors],
    }
    (project_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    _write_jsonl(project_dir / "taxonomy.jsonl",
                 (activity_to_record(a) for a in project.taxonomy.activities))
    _write_jsonl(project_dir / "documents.jsonl",
                 (document_to_record(project.documents[d]) for d in sorted(project.documents)))
    _write_jsonl(project_dir / "candidates.jsonl",
                 (candidate_to_record(c) for c in project.candidates.values()))
    _write_jsonl(project_dir / "votes.jsonl",
                 ({"candidate_id": v.candidate_id, "annotator_id": v.annotator_id,
                   "decision": v.decision, "timestamp": v.timestamp} for v in project.votes))
    if project.index is not None:
        save_index(project.index, project_dir / "index.bin")
    return project_dir


def load_project(project_dir: str | Path) -> Project:
    project_dir = Path(project_dir)
    manifest_path = project_dir / "manifest.json"
    if not manifest_path.exists():
        raise StoreError(f"{project_dir} is not a project store (no manifest.json)")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise StoreError(f"manifest.json: corrupted record: {exc}") from exc
    version = manifest.get("schema_version")
    if version != STORE_SCHEMA_VERSION:
        raise SchemaVersionError(
            f"store schema {version!r} not supported (expected {STORE_SCHEMA_VERSION})"
        )

    try:
        activities = tuple(activity_from_record(r)
                           for r in _read_jsonl(project_dir / "taxonomy.jsonl"))
        taxonomy = Taxonomy(activities=activities,
                            version=manifest.get("taxonomy_version", ""))
        documents = {}
        for rec in _read_jsonl(project_dir / "documents.jsonl"):
            doc = document_from_record(rec)
            documents[doc.doc_id] = doc
        candidates = {}
        for rec in _read_jsonl(project_dir / "candidates.jsonl"):
            cand = candidate_from_record(rec)
            candidates[cand.candidate_id] = cand
        votes = [Vote(candidate_id=r["candidate_id"], annotator_id=r["annotator_id"],
                      decision=r["decision"], timestamp=r["timestamp"])
                 for r in _read_jsonl(project_dir / "votes.jsonl")]
    except StoreError:
        raise
    except Exception as exc:
        raise StoreError(f"cannot rebuild project from {project_dir}: {exc}") from exc

    index_path = project_dir / "index.bin"
    index = load_index(index_path) if index_path.exists() else None
    return Project(
        project_id=manifest["project_id"],
        taxonomy=taxonomy,
        nace_codes=tuple(manifest.get("nace_codes", [])),
        documents=documents,
        candidates=candidates,
        votes=votes,
        config=ProjectConfig.from_dict(manifest.get("config", {})),
        index=index,
        run_errors=[tuple(e) for e in manifest.get("run_errors", [])],
    )
