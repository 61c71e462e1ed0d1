"""HTTP review API over the project store.

All mutations go through the same operations as the CLI, serialized per
project (one writer at a time, concurrent readers). Requests authenticate
with a static bearer token. Pipeline runs execute as background jobs with a
polled status endpoint.

Blind mode: while a candidate is pending, responses contain the requesting
annotator's own vote only - no other votes, no model verdict, no retrieval
score - honoring the independent-assessment protocol. Finalized candidates
reveal everything when the project's reveal toggle is on.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import Depends, FastAPI, Header, HTTPException, Query
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel

from . import adjudication
from .adjudication import Vote, record_vote, export_adjudicated
from .benchmark import HyperparameterManifest, serialize_dataset, serialize_finetune
from .classifier import (
    InferenceBackend,
    RemoteChatBackend,
    StubBackend,
    get_template,
)
from .corpus import Document, document_to_record, _doc_id_for, _normalize_newlines
from .exceptions import (
    BackendError,
    DuplicateVoteError,
    EsgMapError,
    FinalizedCandidateError,
    StoreError,
    UnknownCandidateError,
)
from .pipeline import (
    Project,
    ProjectConfig,
    annotate,
    load_project,
    run_pipeline,
    save_project,
)
from .taxonomy import Taxonomy, activity_from_record, activity_to_record
from .vecindex import EmbeddingBackend, HashedBagOfWordsEmbedder

CONTEXT_WINDOW = 300  # characters of surrounding document shown with a candidate


class CreateProjectBody(BaseModel):
    project_id: str
    nace_codes: list[str] = []
    taxonomy: list[dict]
    config: dict = {}


class AddDocumentBody(BaseModel):
    company: str = ""
    title: str = ""
    text: str | None = None
    pages: list[str] | None = None


class VoteBody(BaseModel):
    annotator_id: str
    decision: str


@dataclass
class Job:
    job_id: str
    project_id: str
    status: str = "queued"  # queued | running | done | failed
    detail: str = ""
    candidates: int | None = None


@dataclass
class _AppState:
    store_root: Path
    token: str
    embedders: dict[str, EmbeddingBackend]
    backends: dict[str, InferenceBackend]
    projects: dict[str, Project] = field(default_factory=dict)
    locks: dict[str, threading.Lock] = field(default_factory=dict)
    jobs: dict[str, Job] = field(default_factory=dict)
    registry_lock: threading.Lock = field(default_factory=threading.Lock)

    def lock_for(self, project_id: str) -> threading.Lock:
        with self.registry_lock:
            return self.locks.setdefault(project_id, threading.Lock())

    def get_project(self, project_id: str) -> Project:
        project = self.projects.get(project_id)
        if project is None:
            path = self.store_root / project_id
            if not (path / "manifest.json").exists():
                raise HTTPException(status_code=404, detail=f"unknown project {project_id!r}")
            project = load_project(path)
            self.projects[project_id] = project
        return project

    def save(self, project: Project) -> None:
        save_project(project, self.store_root / project.project_id)

    def find_candidate_project(self, candidate_id: str) -> Project:
        for project in self.projects.values():
            if candidate_id in project.candidates:
                return project
        # Fall back to scanning the store for projects not yet cached.
        if self.store_root.exists():
            for path in sorted(self.store_root.iterdir()):
                if not (path / "manifest.json").exists() or path.name in self.projects:
                    continue
                project = self.get_project(path.name)
                if candidate_id in project.candidates:
                    return project
        raise HTTPException(status_code=404, detail=f"unknown candidate {candidate_id!r}")

    def resolve_backends(self, project: Project) -> tuple[EmbeddingBackend, InferenceBackend]:
        cfg = project.config
        embedder = self.embedders.get(cfg.embedder_id)
        if embedder is None:
            raise HTTPException(status_code=422,
                                detail=f"no embedder registered for {cfg.embedder_id!r}")
        backend = self.backends.get(cfg.infer_backend_id)
        if backend is None:
            if cfg.infer_backend_id == "remote":
                try:
                    backend = RemoteChatBackend.from_env()
                except BackendError as exc:
                    raise HTTPException(status_code=422, detail=str(exc)) from exc
            else:
                raise HTTPException(status_code=422,
                                    detail=f"no backend registered for {cfg.infer_backend_id!r}")
        return embedder, backend


def candidate_view(project: Project, cand, annotator: str | None) -> dict:
    """Serialize a candidate for one annotator, applying blind-mode hiding."""
    cfg = project.config
    doc = project.documents.get(cand.doc_id)
    text = doc.text if doc else ""
    revealed = (not cfg.blind_mode) or (
        cand.status != adjudication.PENDING and cfg.reveal_after_finalize
    )
    view = {
        "candidate_id": cand.candidate_id,
        "project_id": project.project_id,
        "doc_id": cand.doc_id,
        "doc_title": doc.title if doc else "",
        "activity_id": cand.activity_id,
        "activity_title": "",
        "activity_text": "",
        "char_start": cand.char_start,
        "char_end": cand.char_end,
        "chunk_text": text[cand.char_start : cand.char_end],
        "context_before": text[max(0, cand.char_start - CONTEXT_WINDOW) : cand.char_start],
        "context_after": text[cand.char_end : cand.char_end + CONTEXT_WINDOW],
        "status": cand.status,
        "my_vote": None,
    }
    try:
        activity = project.taxonomy.get(cand.activity_id)
        view["activity_title"] = activity.title
        view["activity_text"] = activity.short_description
    except KeyError:
        pass
    if annotator:
        mine = [v for v in project.votes
                if v.candidate_id == cand.candidate_id and v.annotator_id == annotator]
        if mine:
            view["my_vote"] = {"decision": mine[0].decision, "timestamp": mine[0].timestamp}
    if revealed:
        view["retrieval_score"] = cand.retrieval_score
        view["model_verdict"] = (
            None if cand.model_verdict is None else {
                "label": cand.model_verdict.label,
                "probability": cand.model_verdict.probability,
                "raw_output": cand.model_verdict.raw_output,
                "template_id": cand.model_verdict.template_id,
            }
        )
        view["votes"] = [
            {"annotator_id": v.annotator_id, "decision": v.decision, "timestamp": v.timestamp}
            for v in project.votes if v.candidate_id == cand.candidate_id
        ]
    return view


def adjudicated_pairs(project: Project):
    return export_adjudicated(
        list(project.candidates.values()), project.documents, project.taxonomy.by_id()
    )


def create_app(store_root: str | Path, token: str,
               embedders: dict[str, EmbeddingBackend] | None = None,
               backends: dict[str, InferenceBackend] | None = None) -> FastAPI:
    """Build the service. `embedders`/`backends` extend the built-in registry
    (deterministic hashed-BoW embedder, all-negative stub backend)."""
    if not token:
        raise ValueError("a non-empty bearer token is required")
    default_embedder = HashedBagOfWordsEmbedder()
    state = _AppState(
        store_root=Path(store_root),
        token=token,
        embedders={default_embedder.embedder_id: default_embedder, **(embedders or {})},
        backends={"stub": StubBackend(), **(backends or {})},
    )
    state.store_root.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="esgmap review service")
    app.state.esgmap = state

    def require_auth(authorization: str = Header(default="")) -> None:
        if authorization != f"Bearer {state.token}":
            raise HTTPException(status_code=401, detail="invalid or missing bearer token")

    auth = Depends(require_auth)

    @app.exception_handler(EsgMapError)
    def esgmap_error_handler(request, exc: EsgMapError):
        if isinstance(exc, (DuplicateVoteError, FinalizedCandidateError)):
            status = 409
        elif isinstance(exc, UnknownCandidateError):
            status = 404
        elif isinstance(exc, StoreError):
            status = 500
        else:
            # validation-class: bad inputs, pending candidates, backend trouble
            status = 422
        return JSONResponse(status_code=status,
                            content={"detail": str(exc), "error": type(exc).__name__})

    @app.post("/projects", status_code=201, dependencies=[auth])
    def create_project(body: CreateProjectBody):
        with state.lock_for(body.project_id):
            if (state.store_root / body.project_id / "manifest.json").exists():
                raise HTTPException(status_code=409,
                                    detail=f"project {body.project_id!r} already exists")
            taxonomy = Taxonomy(
                activities=tuple(activity_from_record(r) for r in body.taxonomy)
            )
            project = Project(
                project_id=body.project_id,
                taxonomy=taxonomy,
                nace_codes=tuple(body.nace_codes),
                config=ProjectConfig.from_dict(body.config) if body.config else ProjectConfig(),
            )
            state.projects[project.project_id] = project
            state.save(project)
        return project_summary(project)

    def project_summary(project: Project) -> dict:
        statuses = {"pending": 0, "accepted": 0, "rejected": 0}
        for c in project.candidates.values():
            statuses[c.status] += 1
        return {
            "project_id": project.project_id,
            "nace_codes": list(project.nace_codes),
            "activities": len(project.taxonomy),
            "documents": len(project.documents),
            "candidates": statuses,
            "votes": len(project.votes),
            "config": project.config.to_dict(),
            "run_errors": [list(e) for e in project.run_errors],
        }

    @app.get("/projects", dependencies=[auth])
    def list_projects():
        ids = set(state.projects)
        if state.store_root.exists():
            ids.update(p.name for p in state.store_root.iterdir()
                       if (p / "manifest.json").exists())
        return {"projects": sorted(ids)}

    @app.get("/projects/{project_id}", dependencies=[auth])
    def get_project(project_id: str):
        return project_summary(state.get_project(project_id))

    @app.post("/projects/{project_id}/documents", status_code=201, dependencies=[auth])
    def add_document(project_id: str, body: AddDocumentBody):
        with state.lock_for(project_id):
            project = state.get_project(project_id)
            if (body.text is None) == (body.pages is None):
                raise HTTPException(status_code=422,
                                    detail="provide exactly one of 'text' or 'pages'")
            if body.text is not None:
                text = _normalize_newlines(body.text)
                page_offsets = ()
            else:
                pages = [_normalize_newlines(p) for p in body.pages]
                text = "\n".join(pages)
                offsets, pos = [], 0
                for i, page in enumerate(pages, start=1):
                    offsets.append((i, pos))
                    pos += len(page) + 1
                page_offsets = tuple(offsets)
            if not text:
                raise HTTPException(status_code=422, detail="document text is empty")
            doc = Document(doc_id=_doc_id_for(text), company=body.company,
                           title=body.title, text=text, page_offsets=page_offsets)
            project.add_document(doc)
            state.save(project)
        return {"doc_id": doc.doc_id, "characters": len(doc.text),
                "pages": len(doc.page_offsets)}

    @app.get("/projects/{project_id}/documents", dependencies=[auth])
    def list_documents(project_id: str):
        project = state.get_project(project_id)
        return {"documents": [
            {"doc_id": d.doc_id, "company": d.company, "title": d.title,
             "characters": len(d.text), "pages": len(d.page_offsets)}
            for d in (project.documents[k] for k in sorted(project.documents))
        ]}

    @app.get("/projects/{project_id}/documents/{doc_id}", dependencies=[auth])
    def get_document(project_id: str, doc_id: str):
        project = state.get_project(project_id)
        doc = project.documents.get(doc_id)
        if doc is None:
            raise HTTPException(status_code=404, detail=f"unknown document {doc_id!r}")
        return document_to_record(doc)

    @app.post("/projects/{project_id}/run", status_code=202, dependencies=[auth])
    def start_run(project_id: str):
        project = state.get_project(project_id)  # 404 before queuing
        if not project.documents:
            raise HTTPException(status_code=422, detail="project has no documents")
        job = Job(job_id=uuid.uuid4().hex[:12], project_id=project_id)
        state.jobs[job.job_id] = job

        def work():
            job.status = "running"
            try:
                with state.lock_for(project_id):
                    proj = state.get_project(project_id)
                    embedder, backend = state.resolve_backends(proj)
                    cands = run_pipeline(proj, embedder, backend)
                    state.save(proj)
                job.candidates = len(cands)
                job.status = "done"
            except Exception as exc:
                job.status = "failed"
                job.detail = str(exc)

        threading.Thread(target=work, daemon=True).start()
        return {"job_id": job.job_id, "status": job.status}

    @app.get("/projects/{project_id}/jobs/{job_id}", dependencies=[auth])
    def get_job(project_id: str, job_id: str):
        job = state.jobs.get(job_id)
        if job is None or job.project_id != project_id:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return {"job_id": job.job_id, "status": job.status, "detail": job.detail,
                "candidates": job.candidates}

    @app.get("/projects/{project_id}/candidates", dependencies=[auth])
    def list_candidates(project_id: str,
                        status: str | None = Query(default=None),
                        annotator: str | None = Query(default=None)):
        project = state.get_project(project_id)
        cands = list(project.candidates.values())
        if status is not None:
            if status not in adjudication.STATUSES:
                raise HTTPException(status_code=422, detail=f"unknown status {status!r}")
            cands = [c for c in cands if c.status == status]
        cands.sort(key=lambda c: (c.doc_id, c.char_start, c.char_end, c.activity_id))
        return {"candidates": [candidate_view(project, c, annotator) for c in cands]}

    @app.post("/candidates/{candidate_id}/votes", status_code=201, dependencies=[auth])
    def cast_vote(candidate_id: str, body: VoteBody):
        project = state.find_candidate_project(candidate_id)
        with state.lock_for(project.project_id):
            vote = Vote(candidate_id=candidate_id, annotator_id=body.annotator_id,
                        decision=body.decision)
            cand = record_vote(project, vote)
            state.save(project)
        return candidate_view(project, cand, body.annotator_id)

    @app.get("/projects/{project_id}/annotations", dependencies=[auth])
    def get_annotations(project_id: str, mode: str = Query(default="model")):
        project = state.get_project(project_id)
        spans = annotate(project, mode=mode)
        return {"mode": mode, "annotations": [
            {"doc_id": s.doc_id, "char_start": s.char_start, "char_end": s.char_end,
             "activity_id": s.activity_id, "retrieval_score": s.retrieval_score,
             "label": s.label, "candidate_id": s.candidate_id}
            for s in spans
        ]}

    @app.get("/projects/{project_id}/export/dataset", dependencies=[auth])
    def export_dataset(project_id: str):
        project = state.get_project(project_id)
        payload = serialize_dataset(adjudicated_pairs(project))
        return PlainTextResponse(content=payload, media_type="application/jsonl")

    @app.get("/projects/{project_id}/export/finetune", dependencies=[auth])
    def export_finetune_file(project_id: str):
        project = state.get_project(project_id)
        tmpl = get_template(project.config.template_id)
        payload = serialize_finetune(adjudicated_pairs(project), tmpl)
        return PlainTextResponse(content=payload, media_type="application/jsonl")

    @app.get("/projects/{project_id}/export/manifest", dependencies=[auth])
    def export_manifest(project_id: str):
        state.get_project(project_id)
        return HyperparameterManifest().to_dict()

    @app.get("/projects/{project_id}/taxonomy", dependencies=[auth])
    def get_taxonomy(project_id: str):
        project = state.get_project(project_id)
        return {"version": project.taxonomy.version,
                "activities": [activity_to_record(a) for a in project.taxonomy.activities]}

    return app
