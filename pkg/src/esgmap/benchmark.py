"""Labeled-dataset lifecycle: loading/validation, stratified train/test
splitting, paraphrase augmentation, stratified k-fold plans, chat-format
fine-tuning export, and the hyperparameter manifest emitted next to exports.
"""

from __future__ import annotations

import json
import random
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .classifier import InferenceBackend, PromptTemplate, DEFAULT_TEMPLATE, build_messages
from .exceptions import DatasetError

PARAPHRASE_PROMPT_ID = "paraphrase-v1"
PARAPHRASE_PROMPT = (
    "Rewrite the following sentence in different words, preserving its exact "
    "meaning: {TEXT}. Return only the rewritten sentence."
)

PROVENANCES = ("original", "synthetic")


class StubParaphraseBackend:
    """Offline deterministic paraphraser for tests and demos.

    Recovers the sentence from the rendered prompt and applies a simple
    rewrite keyed by the paraphrase index. A remote backend produces real
    paraphrases; this one only guarantees distinct, deterministic text.
    """

    backend_id = "stub-paraphrase"

    _patterns = (
        "In other words, {}",
        "Put differently, {}",
        "Stated another way, {}",
        "To rephrase: {}",
        "Expressed with different wording, {}",
    )

    def complete(self, messages, meta=None):
        from .classifier import BackendReply

        prompt = messages[-1]["content"]
        prefix, suffix = PARAPHRASE_PROMPT.split("{TEXT}")
        text = prompt[len(prefix) : len(prompt) - len(suffix)]
        j = int((meta or {}).get("paraphrase_index", "1"))
        pattern = self._patterns[(j - 1) % len(self._patterns)]
        return BackendReply(text=pattern.replace("{}", text))


@dataclass(frozen=True)
class LabeledPair:
    """A benchmark triple: chunk text, activity description, binary class."""

    pair_id: str
    chunk_text: str
    activity_id: str
    activity_text: str
    label: int
    provenance: str = "original"
    parent_id: str | None = None

    def __post_init__(self):
        if not self.pair_id:
            raise DatasetError("pair_id must be non-empty")
        if self.label not in (0, 1):
            raise DatasetError(f"pair {self.pair_id!r}: label must be 0 or 1")
        if self.provenance not in PROVENANCES:
            raise DatasetError(f"pair {self.pair_id!r}: unknown provenance {self.provenance!r}")
        if (self.provenance == "synthetic") != (self.parent_id is not None):
            raise DatasetError(
                f"pair {self.pair_id!r}: parent_id must be present exactly when provenance is synthetic"
            )


def pair_to_record(pair: LabeledPair) -> dict:
    rec = {
        "pair_id": pair.pair_id,
        "chunk_text": pair.chunk_text,
        "activity_id": pair.activity_id,
        "activity_text": pair.activity_text,
        "label": pair.label,
        "provenance": pair.provenance,
    }
    if pair.parent_id is not None:
        rec["parent_id"] = pair.parent_id
    return rec


def pair_from_record(rec: dict) -> LabeledPair:
    try:
        return LabeledPair(
            pair_id=str(rec["pair_id"]),
            chunk_text=str(rec["chunk_text"]),
            activity_id=str(rec["activity_id"]),
            activity_text=str(rec["activity_text"]),
            label=int(rec["label"]),
            provenance=str(rec.get("provenance", "original")),
            parent_id=rec.get("parent_id"),
        )
    except KeyError as exc:
        raise DatasetError(f"missing field {exc.args[0]!r}") from exc


def validate_pairs(pairs: Sequence[LabeledPair]) -> None:
    """Cross-record invariants: unique ids, synthetic parents exist and agree
    on activity and label."""
    by_id: dict[str, LabeledPair] = {}
    for p in pairs:
        if p.pair_id in by_id:
            raise DatasetError(f"duplicate pair_id {p.pair_id!r}")
        by_id[p.pair_id] = p
    for p in pairs:
        if p.parent_id is None:
            continue
        parent = by_id.get(p.parent_id)
        if parent is None:
            raise DatasetError(f"pair {p.pair_id!r}: orphan parent_id {p.parent_id!r}")
        if parent.activity_id != p.activity_id or parent.label != p.label:
            raise DatasetError(
                f"pair {p.pair_id!r}: parent {p.parent_id!r} differs in activity_id or label"
            )


def load_dataset(path: str | Path, test_only: bool = False) -> list[LabeledPair]:
    """Load a JSONL dataset and validate it.

    With test_only=True the file is treated as a held-out test set and any
    synthetic item is rejected (test data is human-curated only).
    """
    path = Path(path)
    pairs = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"{path.name}:{lineno}: malformed record: {exc}") from exc
            try:
                pair = pair_from_record(rec)
            except DatasetError as exc:
                raise DatasetError(f"{path.name}:{lineno}: {exc}") from exc
            if test_only and pair.provenance != "original":
                raise DatasetError(
                    f"{path.name}:{lineno}: synthetic pair {pair.pair_id!r} in a test-only file"
                )
            pairs.append(pair)
    validate_pairs(pairs)
    return pairs


def save_dataset(pairs: Sequence[LabeledPair], path: str | Path) -> None:
    Path(path).write_bytes(serialize_dataset(pairs))


def serialize_dataset(pairs: Sequence[LabeledPair]) -> bytes:
    """Canonical JSONL bytes; shared by file export and the service so both
    produce identical output."""
    lines = [json.dumps(pair_to_record(p), ensure_ascii=False) for p in pairs]
    return ("".join(line + "\n" for line in lines)).encode("utf-8")


@dataclass(frozen=True)
class DatasetSplit:
    train: tuple[LabeledPair, ...]
    test: tuple[LabeledPair, ...]

    def __post_init__(self):
        train_ids = {p.pair_id for p in self.train}
        test_ids = {p.pair_id for p in self.test}
        if train_ids & test_ids:
            raise DatasetError(f"train/test overlap: {sorted(train_ids & test_ids)[:3]}")
        for p in self.test:
            if p.provenance != "original":
                raise DatasetError(f"synthetic pair {p.pair_id!r} in test set")


def _round_half_up(x: float) -> int:
    return int(x + 0.5)


def _apportion(total: int, counts: Mapping[int, int]) -> dict[int, int]:
    """Largest-remainder apportionment of `total` across classes, proportional
    to class counts. Guarantees each share is floor or ceil of its quota."""
    n = sum(counts.values())
    quotas = {c: total * cnt / n for c, cnt in counts.items()}
    shares = {c: int(q) for c, q in quotas.items()}
    leftover = total - sum(shares.values())
    # Deterministic order: larger fractional remainder first, then label.
    order = sorted(counts, key=lambda c: (-(quotas[c] - shares[c]), c))
    for c in order[:leftover]:
        shares[c] += 1
    return shares


def split_train_test(pairs: Sequence[LabeledPair], test_fraction: float,
                     seed: int) -> DatasetSplit:
    """Stratified random split of original pairs.

    |test| = round(test_fraction * N); per-class test counts are apportioned
    by largest remainder so each side's positive rate stays within one item
    of the global rate. Deterministic for a given seed.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    for p in pairs:
        if p.provenance != "original":
            raise DatasetError(f"split input must be original pairs only (got {p.pair_id!r})")
    by_class: dict[int, list[LabeledPair]] = {0: [], 1: []}
    for p in pairs:
        by_class[p.label].append(p)
    present = {c: members for c, members in by_class.items() if members}
    for c, members in present.items():
        if len(members) < 2:
            raise DatasetError(f"class {c} has {len(members)} item(s); need at least 2 to stratify")

    n_test = _round_half_up(test_fraction * len(pairs))
    shares = _apportion(n_test, {c: len(m) for c, m in present.items()})

    rng = random.Random(seed)
    test_ids = set()
    for c in sorted(present):
        members = list(present[c])
        rng.shuffle(members)
        test_ids.update(p.pair_id for p in members[: shares[c]])
    train = tuple(p for p in pairs if p.pair_id not in test_ids)
    test = tuple(p for p in pairs if p.pair_id in test_ids)
    return DatasetSplit(train=train, test=test)


@dataclass
class AugmentationResult:
    pairs: list[LabeledPair]
    flagged_ids: list[str] = field(default_factory=list)  # duplicate text after retries
    errors: list[tuple[str, str]] = field(default_factory=list)  # (pair_id, message)
    prompt_id: str = PARAPHRASE_PROMPT_ID


def augment(pairs: Sequence[LabeledPair], generator: InferenceBackend,
            n_paraphrases: int, max_retries: int = 3) -> AugmentationResult:
    """Generate `n_paraphrases` synthetic variants of each original pair.

    Paraphrases inherit activity and label and point back to their parent. A
    paraphrase equal to its parent (case-insensitive) is regenerated up to
    `max_retries` times, then kept but flagged. Generator failures are
    isolated per item and reported in the result.
    """
    if n_paraphrases < 0:
        raise ValueError("n_paraphrases must be >= 0")
    for p in pairs:
        if p.provenance != "original":
            raise DatasetError(f"augmentation input must be original pairs only (got {p.pair_id!r})")

    result = AugmentationResult(pairs=[])
    for parent in pairs:
        prompt = PARAPHRASE_PROMPT.replace("{TEXT}", parent.chunk_text)
        for j in range(1, n_paraphrases + 1):
            pair_id = f"{parent.pair_id}:p{j}"
            text = None
            try:
                for attempt in range(max_retries + 1):
                    meta = {"pair_id": parent.pair_id, "paraphrase_index": str(j),
                            "attempt": str(attempt)}
                    reply = generator.complete([{"role": "user", "content": prompt}], meta)
                    text = reply.text.strip()
                    if text and text.lower() != parent.chunk_text.lower():
                        break
                else:
                    result.flagged_ids.append(pair_id)
            except Exception as exc:
                result.errors.append((pair_id, str(exc)))
                continue
            if not text:
                result.errors.append((pair_id, "generator returned empty text"))
                continue
            result.pairs.append(
                LabeledPair(
                    pair_id=pair_id,
                    chunk_text=text,
                    activity_id=parent.activity_id,
                    activity_text=parent.activity_text,
                    label=parent.label,
                    provenance="synthetic",
                    parent_id=parent.pair_id,
                )
            )
    return result


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: Mapping[str, int]

    def __post_init__(self):
        for pid, f in self.assignments.items():
            if not 0 <= f < self.k:
                raise DatasetError(f"pair {pid!r} assigned to fold {f} outside [0, {self.k})")
        sizes = Counter(self.assignments.values()).values()
        if sizes and max(sizes) - min(sizes) > 1:
            raise DatasetError("fold sizes differ by more than 1")

    def fold_of(self, pair_id: str) -> int:
        return self.assignments[pair_id]


def make_folds(split: DatasetSplit, k: int, seed: int) -> FoldPlan:
    """Stratified k-fold plan over the training side of a split.

    Fold sizes differ by at most one and each fold's positive count is the
    floor or ceil of the proportional share. Deterministic for a given seed.
    """
    train = list(split.train)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > len(train):
        raise ValueError(f"k={k} exceeds the training-set size {len(train)}")

    n = len(train)
    base, extra = divmod(n, k)
    target = [base + (1 if f < extra else 0) for f in range(k)]

    positives = [p for p in train if p.label == 1]
    negatives = [p for p in train if p.label == 0]
    q1, r1 = divmod(len(positives), k)
    # Extra positives go to the largest folds first so per-fold negative
    # counts never go below zero.
    pos_count = [q1 + (1 if f < r1 else 0) for f in range(k)]
    neg_count = [target[f] - pos_count[f] for f in range(k)]
    if any(c < 0 for c in neg_count):  # pragma: no cover - construction forbids it
        raise DatasetError("internal stratification error")

    rng = random.Random(seed)
    rng.shuffle(positives)
    rng.shuffle(negatives)
    assignments: dict[str, int] = {}
    pi = ni = 0
    for f in range(k):
        for p in positives[pi : pi + pos_count[f]]:
            assignments[p.pair_id] = f
        pi += pos_count[f]
        for p in negatives[ni : ni + neg_count[f]]:
            assignments[p.pair_id] = f
        ni += neg_count[f]
    return FoldPlan(k=k, assignments=assignments)


def iter_folds(plan: FoldPlan, pairs: Sequence[LabeledPair]):
    """Yield (fold_index, holdout, rest) in fold order."""
    for f in range(plan.k):
        holdout = [p for p in pairs if plan.assignments.get(p.pair_id) == f]
        rest = [p for p in pairs
                if p.pair_id in plan.assignments and plan.assignments[p.pair_id] != f]
        yield f, holdout, rest


def split_validation(pairs: Sequence[LabeledPair], ratio: float, seed: int
                     ) -> tuple[list[LabeledPair], list[LabeledPair]]:
    """Carve a validation set out of a training portion (by default applied
    inside each CV fold, not before folding). Returns (train, validation)."""
    if not 0 < ratio < 1:
        raise ValueError("ratio must be in (0, 1)")
    members = list(pairs)
    rng = random.Random(seed)
    rng.shuffle(members)
    n_val = _round_half_up(ratio * len(members))
    val_ids = {p.pair_id for p in members[:n_val]}
    return ([p for p in pairs if p.pair_id not in val_ids],
            [p for p in pairs if p.pair_id in val_ids])


@dataclass(frozen=True)
class HyperparameterManifest:
    """Fine-tuning settings carried as reproducibility metadata next to every
    export; running the training job itself is downstream of this package."""

    gradient_accumulation_steps: int = 5
    learning_rate: float = 3e-4
    validation_split_ratio: float = 0.15
    cv_folds: int = 10
    eval_cadence: str = "every 10% of total steps"
    optimizer: str = "AdamW"
    adapter: str = "LoRA"
    lora_rank: int = 8
    lora_alpha: int = 32
    lora_dropout: float = 0.05
    lora_target_modules: tuple[str, ...] = ("query_key_value",)
    overrides: tuple[str, ...] = ()

    def with_overrides(self, **kwargs) -> "HyperparameterManifest":
        unknown = set(kwargs) - {f for f in self.__dataclass_fields__ if f != "overrides"}
        if unknown:
            raise ValueError(f"unknown manifest fields: {sorted(unknown)}")
        return replace(self, overrides=tuple(sorted(set(self.overrides) | set(kwargs))), **kwargs)

    def to_dict(self) -> dict:
        d = {
            "gradient_accumulation_steps": self.gradient_accumulation_steps,
            "learning_rate": self.learning_rate,
            "validation_split_ratio": self.validation_split_ratio,
            "cv_folds": self.cv_folds,
            "eval_cadence": self.eval_cadence,
            "optimizer": self.optimizer,
            "adapter": self.adapter,
            "lora_rank": self.lora_rank,
            "lora_alpha": self.lora_alpha,
            "lora_dropout": self.lora_dropout,
            "lora_target_modules": list(self.lora_target_modules),
        }
        if self.overrides:
            d["overrides"] = list(self.overrides)
        return d


def serialize_finetune(pairs: Sequence[LabeledPair],
                       tmpl: PromptTemplate = DEFAULT_TEMPLATE) -> bytes:
    """Chat-format JSONL: system role text, rendered user prompt, and the
    label as the assistant turn."""
    from .classifier import ClassificationRequest

    lines = []
    for p in pairs:
        req = ClassificationRequest(
            chunk_text=p.chunk_text,
            activity_text=p.activity_text,
            prompt_template_id=tmpl.template_id,
            activity_id=p.activity_id,
        )
        record = {"messages": build_messages(tmpl, req) + [
            {"role": "assistant", "content": str(p.label)}
        ]}
        lines.append(json.dumps(record, ensure_ascii=False))
    return ("".join(line + "\n" for line in lines)).encode("utf-8")


def export_finetune(pairs: Sequence[LabeledPair], tmpl: PromptTemplate,
                    path: str | Path,
                    manifest: HyperparameterManifest | None = None) -> Path:
    """Write the chat-format JSONL plus a `<path>.manifest.json` sidecar with
    the fine-tuning settings. Returns the dataset path."""
    path = Path(path)
    path.write_bytes(serialize_finetune(pairs, tmpl))
    sidecar = path.with_name(path.name + ".manifest.json")
    manifest = manifest or HyperparameterManifest()
    sidecar.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")
    return path


def _template_pattern(tmpl: PromptTemplate) -> re.Pattern:
    parts = re.split(r"(\{TEXT\}|\{ACTIVITY\})", tmpl.user_template)
    groups = [p for p in parts if p in ("{TEXT}", "{ACTIVITY}")]
    out = ["^"]
    seen = 0
    for p in parts:
        if p == "{TEXT}":
            seen += 1
            out.append("(?P<text>.*)" if seen == len(groups) else "(?P<text>.*?)")
        elif p == "{ACTIVITY}":
            seen += 1
            out.append("(?P<activity>.*)" if seen == len(groups) else "(?P<activity>.*?)")
        else:
            out.append(re.escape(p))
    out.append("$")
    return re.compile("".join(out), re.DOTALL)


def parse_finetune(path: str | Path,
                   tmpl: PromptTemplate = DEFAULT_TEMPLATE) -> list[dict]:
    """Invert an exported fine-tune file back to (chunk_text, activity_text,
    label) dicts by matching the user turn against the template structure.

    Inversion assumes the embedded texts do not themselves contain the
    template's section markers, which holds for disclosure text.
    """
    path = Path(path)
    pattern = _template_pattern(tmpl)
    rows = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                messages = {m["role"]: m["content"] for m in rec["messages"]}
                user = messages["user"]
                label = int(messages["assistant"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{path.name}:{lineno}: bad chat record: {exc}") from exc
            m = pattern.match(user)
            if m is None:
                raise DatasetError(
                    f"{path.name}:{lineno}: user turn does not match template "
                    f"{tmpl.template_id!r}"
                )
            if label not in (0, 1):
                raise DatasetError(f"{path.name}:{lineno}: assistant turn must be '0' or '1'")
            rows.append({
                "chunk_text": m.group("text"),
                "activity_text": m.group("activity"),
                "label": label,
            })
    return rows


@dataclass(frozen=True)
class DatasetStats:
    total: int
    positives: int
    negatives: int
    by_provenance: Mapping[str, int]
    by_activity: Mapping[str, int]

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "positives": self.positives,
            "negatives": self.negatives,
            "by_provenance": dict(self.by_provenance),
            "by_activity": dict(self.by_activity),
        }


def dataset_stats(pairs: Iterable[LabeledPair]) -> DatasetStats:
    pairs = list(pairs)
    positives = sum(p.label for p in pairs)
    return DatasetStats(
        total=len(pairs),
        positives=positives,
        negatives=len(pairs) - positives,
        by_provenance=dict(Counter(p.provenance for p in pairs)),
        by_activity=dict(sorted(Counter(p.activity_id for p in pairs).items())),
    )
