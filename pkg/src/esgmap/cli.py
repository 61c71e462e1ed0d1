"""Command-line interface over the project store and dataset tooling.

Subcommands mirror the HTTP API: ingest, index, map, vote, annotate, eval,
augment, split, folds, export-finetune, stats, serve (plus init to create a
project). Run `esgmap <subcommand> -h` for flags.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .adjudication import Vote, export_adjudicated, record_vote
from .benchmark import (
    DatasetSplit,
    HyperparameterManifest,
    StubParaphraseBackend,
    augment,
    dataset_stats,
    export_finetune,
    load_dataset,
    make_folds,
    save_dataset,
    split_train_test,
)
from .classifier import RemoteChatBackend, StubBackend, get_template
from .corpus import ingest_document
from .exceptions import EsgMapError
from .metrics import render_metrics_table, weighted_metrics
from .pipeline import (
    Project,
    ProjectConfig,
    annotate,
    load_project,
    project_chunks,
    run_pipeline,
    save_project,
)
from .taxonomy import load_taxonomy
from .vecindex import HashedBagOfWordsEmbedder, build_index, save_index


def _project_dir(args) -> Path:
    return Path(args.store) / args.project


def _load(args) -> Project:
    return load_project(_project_dir(args))


def _save(args, project: Project) -> None:
    save_project(project, _project_dir(args))


def _embedder_for(config: ProjectConfig):
    default = HashedBagOfWordsEmbedder()
    if config.embedder_id == default.embedder_id:
        return default
    raise EsgMapError(f"no local embedder available for {config.embedder_id!r}")


def _infer_backend_for(config: ProjectConfig, infer_map: str | None):
    if config.infer_backend_id == "remote":
        return RemoteChatBackend.from_env()
    labels = {}
    if infer_map:
        raw = json.loads(Path(infer_map).read_text(encoding="utf-8"))
        labels = {tuple(k.split("|", 1)): int(v) for k, v in raw.items()}
    return StubBackend(labels=labels)


def cmd_init(args) -> int:
    tax = load_taxonomy(args.taxonomy)
    config = ProjectConfig(
        chunk_target_tokens=args.chunk_size,
        chunk_overlap_tokens=args.chunk_overlap,
        top_k=args.k,
        min_score=args.min_score,
        infer_backend_id=args.backend,
        seed=args.seed,
        blind_mode=not args.no_blind,
        early_finalize=not args.no_early_finalize,
    )
    project = Project(project_id=args.project, taxonomy=tax,
                      nace_codes=tuple(args.nace or []), config=config)
    path = save_project(project, _project_dir(args))
    print(f"created project {args.project} at {path} "
          f"({len(tax)} activities, NACE filter: {list(project.nace_codes) or 'off'})")
    return 0


def cmd_ingest(args) -> int:
    project = _load(args)
    for file in args.files:
        doc = ingest_document(file, company=args.company or "")
        project.add_document(doc)
        print(f"ingested {doc.doc_id}  {doc.title}  "
              f"({len(doc.text)} chars, {len(doc.page_offsets)} pages)")
    _save(args, project)
    return 0


def cmd_index(args) -> int:
    project = _load(args)
    chunks = project_chunks(project)
    if not chunks:
        raise EsgMapError("project has no documents to index")
    embedder = _embedder_for(project.config)
    project.index = build_index(chunks, embedder)
    save_index(project.index, _project_dir(args) / "index.bin")
    print(f"indexed {len(project.index)} chunks "
          f"(dimension {project.index.dimension}, embedder {project.index.embedder_id})")
    return 0


def cmd_map(args) -> int:
    project = _load(args)
    embedder = _embedder_for(project.config)
    backend = _infer_backend_for(project.config, args.infer_map)
    candidates = run_pipeline(project, embedder, backend)
    _save(args, project)
    positives = sum(1 for c in candidates
                    if c.model_verdict is not None and c.model_verdict.label == 1)
    print(f"mapped {len(candidates)} candidates "
          f"({positives} model-positive, {len(project.run_errors)} errors)")
    return 0


def cmd_vote(args) -> int:
    project = _load(args)
    cand = record_vote(project, Vote(candidate_id=args.candidate,
                                     annotator_id=args.annotator,
                                     decision=args.decision))
    _save(args, project)
    print(f"{args.candidate}: {args.decision} by {args.annotator} -> {cand.status}")
    return 0


def cmd_annotate(args) -> int:
    project = _load(args)
    spans = annotate(project, mode=args.mode)
    lines = [json.dumps({
        "doc_id": s.doc_id, "char_start": s.char_start, "char_end": s.char_end,
        "activity_id": s.activity_id, "retrieval_score": s.retrieval_score,
        "label": s.label, "candidate_id": s.candidate_id,
    }, ensure_ascii=False) for s in spans]
    payload = "".join(line + "\n" for line in lines)
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
        print(f"wrote {len(spans)} annotations to {args.out}")
    else:
        sys.stdout.write(payload)
    return 0


def cmd_export_dataset(args) -> int:
    project = _load(args)
    pairs = export_adjudicated(list(project.candidates.values()),
                               project.documents, project.taxonomy.by_id())
    save_dataset(pairs, args.out)
    stats = dataset_stats(pairs)
    print(f"exported {stats.total} pairs ({stats.positives} positive) to {args.out}")
    return 0


def cmd_eval(args) -> int:
    pairs = load_dataset(args.dataset)
    by_id = {}
    with open(args.predictions, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                by_id[rec["pair_id"]] = rec
    missing = [p.pair_id for p in pairs if p.pair_id not in by_id]
    if missing:
        raise EsgMapError(f"{len(missing)} pair(s) missing predictions, e.g. {missing[:3]}")
    y_true = [p.label for p in pairs]
    y_pred = [int(by_id[p.pair_id]["label"]) for p in pairs]
    probs = [by_id[p.pair_id].get("probability") for p in pairs]
    y_prob = [float(p) for p in probs] if all(p is not None for p in probs) else None
    report = weighted_metrics(y_true, y_pred, y_prob=y_prob)
    print(render_metrics_table([(args.model_name, report)]))
    if report.bce_loss is not None:
        print(f"\nBCE loss: {report.bce_loss:.6f}")
    if args.json_out:
        Path(args.json_out).write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return 0


def cmd_augment(args) -> int:
    pairs = load_dataset(args.input)
    generator = (RemoteChatBackend.from_env() if args.backend == "remote"
                 else StubParaphraseBackend())
    result = augment(pairs, generator, n_paraphrases=args.n)
    combined = list(pairs) + result.pairs if args.combined else result.pairs
    save_dataset(combined, args.output)
    note = ""
    if result.flagged_ids:
        note += f", {len(result.flagged_ids)} flagged as duplicate text"
    if result.errors:
        note += f", {len(result.errors)} generation errors"
    print(f"wrote {len(combined)} pairs to {args.output} "
          f"({len(result.pairs)} synthetic{note})")
    return 0


def cmd_split(args) -> int:
    pairs = load_dataset(args.input)
    split = split_train_test(pairs, args.test_fraction, seed=args.seed)
    save_dataset(list(split.train), args.train_out)
    save_dataset(list(split.test), args.test_out)
    print(f"split {len(pairs)} pairs -> {len(split.train)} train / {len(split.test)} test "
          f"(test positives: {sum(p.label for p in split.test)})")
    return 0


def cmd_folds(args) -> int:
    pairs = load_dataset(args.input)
    split = DatasetSplit(train=tuple(pairs), test=())
    plan = make_folds(split, k=args.k, seed=args.seed)
    payload = {"k": plan.k, "assignments": dict(sorted(plan.assignments.items()))}
    Path(args.out).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    sizes = [sum(1 for f in plan.assignments.values() if f == i) for i in range(plan.k)]
    print(f"wrote {plan.k}-fold plan to {args.out} (fold sizes {sizes})")
    return 0


def cmd_export_finetune(args) -> int:
    pairs = load_dataset(args.input)
    tmpl = get_template(args.template)
    out = export_finetune(pairs, tmpl, args.output, manifest=HyperparameterManifest())
    print(f"wrote {len(pairs)} chat records to {out} "
          f"(+ sidecar {out.name}.manifest.json)")
    return 0


def cmd_stats(args) -> int:
    stats = dataset_stats(load_dataset(args.input))
    print(json.dumps(stats.to_dict(), indent=2))
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    token = args.token or os.environ.get("ESGMAP_TOKEN", "")
    if not token:
        raise EsgMapError("provide --token or set ESGMAP_TOKEN")
    app = create_app(args.store, token=token)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="esgmap", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def with_store(p):
        p.add_argument("--store", required=True, help="project store root directory")
        p.add_argument("--project", required=True, help="project id")
        return p

    p = with_store(sub.add_parser("init", help="create a project"))
    p.add_argument("--taxonomy", required=True, help="taxonomy JSONL file")
    p.add_argument("--nace", nargs="*", help="NACE codes to filter activities")
    p.add_argument("--chunk-size", type=int, default=256, help="tokens per chunk")
    p.add_argument("--chunk-overlap", type=int, default=32, help="token overlap")
    p.add_argument("--k", type=int, default=10, help="retrieved chunks per activity")
    p.add_argument("--min-score", type=float, default=None)
    p.add_argument("--backend", default="stub", help="inference backend id (stub|remote)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-blind", action="store_true", help="disable blind voting")
    p.add_argument("--no-early-finalize", action="store_true",
                   help="wait for the full panel before finalizing")
    p.set_defaults(func=cmd_init)

    p = with_store(sub.add_parser("ingest", help="add documents to a project"))
    p.add_argument("files", nargs="+", help="plain-text or structured .json documents")
    p.add_argument("--company", default="")
    p.set_defaults(func=cmd_ingest)

    p = with_store(sub.add_parser("index", help="build and persist the vector index"))
    p.set_defaults(func=cmd_index)

    p = with_store(sub.add_parser("map", help="run the retrieval+classification pipeline"))
    p.add_argument("--infer-map", default=None,
                   help='JSON file of stub verdicts: {"<chunk_id>|<activity_id>": 1}')
    p.set_defaults(func=cmd_map)

    p = with_store(sub.add_parser("vote", help="record an adjudication vote"))
    p.add_argument("--candidate", required=True)
    p.add_argument("--annotator", required=True)
    p.add_argument("--decision", required=True, choices=["confirm", "reject"])
    p.set_defaults(func=cmd_vote)

    p = with_store(sub.add_parser("annotate", help="emit standoff annotations"))
    p.add_argument("--mode", default="model", choices=["model", "adjudicated"])
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_annotate)

    p = with_store(sub.add_parser("export-dataset",
                                  help="export the adjudicated dataset"))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export_dataset)

    p = sub.add_parser("eval", help="score predictions against a labeled dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--predictions", required=True,
                   help='JSONL of {"pair_id", "label", "probability"?}')
    p.add_argument("--model-name", default="model")
    p.add_argument("--json-out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("augment", help="generate synthetic paraphrase pairs")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--n", type=int, default=5, help="paraphrases per original")
    p.add_argument("--backend", default="stub", choices=["stub", "remote"])
    p.add_argument("--combined", action="store_true",
                   help="write originals + synthetic instead of synthetic only")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("split", help="stratified train/test split")
    p.add_argument("--input", required=True)
    p.add_argument("--train-out", required=True)
    p.add_argument("--test-out", required=True)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("folds", help="stratified cross-validation fold plan")
    p.add_argument("--input", required=True, help="training pairs JSONL")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_folds)

    p = sub.add_parser("export-finetune", help="chat-format fine-tuning export")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--template", default="esg-activity-zero-shot-v1")
    p.set_defaults(func=cmd_export_finetune)

    p = sub.add_parser("stats", help="dataset statistics")
    p.add_argument("--input", required=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("serve", help="run the HTTP review service")
    p.add_argument("--store", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--token", default=None, help="bearer token (or ESGMAP_TOKEN)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EsgMapError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
