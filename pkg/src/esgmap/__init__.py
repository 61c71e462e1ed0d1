"""esgmap: map corporate-disclosure text to EU taxonomy activities.

Retrieval-augmented pipeline (NACE-filtered activities, chunked documents,
exact cosine retrieval, 0/1 chunk-vs-activity classification), majority-vote
adjudication, dataset tooling (split / augment / folds / fine-tune export),
weighted evaluation metrics, and an HTTP review service.
"""

__version__ = "0.1.0"

from .adjudication import AdjudicationPolicy, CandidateMapping, Vote, record_vote, tally
from .benchmark import (
    DatasetSplit,
    FoldPlan,
    HyperparameterManifest,
    LabeledPair,
    augment,
    dataset_stats,
    export_finetune,
    load_dataset,
    make_folds,
    split_train_test,
)
from .classifier import (
    ClassificationRequest,
    PromptTemplate,
    Verdict,
    classify,
    classify_batch,
    parse_verdict,
    render_prompt,
)
from .corpus import Chunk, Document, chunk_document, ingest_document
from .metrics import ConfusionMatrix, MetricsReport, bce_loss, confusion, weighted_metrics
from .pipeline import (
    Project,
    ProjectConfig,
    StandoffAnnotation,
    annotate,
    load_project,
    run_pipeline,
    save_project,
)
from .taxonomy import EsgActivity, NaceCode, Taxonomy, load_taxonomy, select_activities
from .vecindex import HashedBagOfWordsEmbedder, VectorIndex, build_index, embed, query_top_k
