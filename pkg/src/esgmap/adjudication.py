"""Candidate mappings and majority-rule human validation.

A candidate is accepted once it collects `quorum` confirm votes from a panel
of `panel_size` annotators, rejected once enough rejects make the quorum
unreachable, and pending otherwise. Rejected candidates become the negative
examples of the exported dataset.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Mapping, Sequence

from .benchmark import LabeledPair
from .classifier import Verdict
from .corpus import Document
from .exceptions import (
    AdjudicationError,
    DuplicateVoteError,
    FinalizedCandidateError,
    PendingCandidatesError,
    UnknownCandidateError,
)
from .taxonomy import EsgActivity

PENDING = "pending"
ACCEPTED = "accepted"
REJECTED = "rejected"
STATUSES = (PENDING, ACCEPTED, REJECTED)

CONFIRM = "confirm"
REJECT = "reject"


@dataclass
class CandidateMapping:
    """A retrieved (chunk, activity) pair awaiting model verdict and/or human
    adjudication. Status only ever moves pending -> accepted/rejected."""

    candidate_id: str
    doc_id: str
    chunk_id: str
    char_start: int
    char_end: int
    activity_id: str
    retrieval_score: float
    model_verdict: Verdict | None = None
    status: str = PENDING

    def __post_init__(self):
        if self.status not in STATUSES:
            raise AdjudicationError(f"unknown status {self.status!r}")
        if not 0 <= self.char_start < self.char_end:
            raise AdjudicationError(
                f"candidate {self.candidate_id!r}: invalid span [{self.char_start}, {self.char_end})"
            )


@dataclass(frozen=True)
class Vote:
    candidate_id: str
    annotator_id: str
    decision: str
    timestamp: str = field(default_factory=lambda: datetime.now(timezone.utc).isoformat())

    def __post_init__(self):
        if not self.annotator_id:
            raise AdjudicationError("annotator_id must be non-empty")
        if self.decision not in (CONFIRM, REJECT):
            raise AdjudicationError(f"decision must be '{CONFIRM}' or '{REJECT}'")


@dataclass(frozen=True)
class AdjudicationPolicy:
    panel_size: int = 3
    quorum: int = 2

    def __post_init__(self):
        if not 1 <= self.quorum <= self.panel_size:
            raise AdjudicationError(
                f"quorum must satisfy 1 <= quorum <= panel_size, got {self.quorum}/{self.panel_size}"
            )


def tally(votes: Sequence[Vote], policy: AdjudicationPolicy) -> str:
    """Pure majority-rule tally; decides early as soon as the outcome is
    mathematically forced, independent of vote order."""
    if votes:
        candidate_ids = {v.candidate_id for v in votes}
        if len(candidate_ids) > 1:
            raise AdjudicationError(f"votes span multiple candidates: {sorted(candidate_ids)}")
        annotators = Counter(v.annotator_id for v in votes)
        dupes = [a for a, n in annotators.items() if n > 1]
        if dupes:
            raise AdjudicationError(f"duplicate annotator vote(s): {sorted(dupes)}")
    if len(votes) > policy.panel_size:
        raise AdjudicationError(f"{len(votes)} votes exceed panel size {policy.panel_size}")
    confirms = sum(1 for v in votes if v.decision == CONFIRM)
    rejects = len(votes) - confirms
    if confirms >= policy.quorum:
        return ACCEPTED
    if rejects > policy.panel_size - policy.quorum:
        return REJECTED
    return PENDING


def votes_for(votes: Sequence[Vote], candidate_id: str) -> list[Vote]:
    return [v for v in votes if v.candidate_id == candidate_id]


def record_vote(store, vote: Vote) -> CandidateMapping:
    """Record one vote in a project-like store and update candidate status.

    `store` needs `candidates` (id -> CandidateMapping), `votes` (list), a
    `policy`, and an `early_finalize` flag. Voting closes when the panel is
    complete; with early finalization the status flips as soon as the outcome
    is forced, but the remaining panel members may still file their votes
    (late votes can never overturn a forced outcome).
    """
    cand = store.candidates.get(vote.candidate_id)
    if cand is None:
        raise UnknownCandidateError(f"unknown candidate {vote.candidate_id!r}")
    existing = votes_for(store.votes, vote.candidate_id)
    if len(existing) >= store.policy.panel_size:
        raise FinalizedCandidateError(
            f"candidate {vote.candidate_id!r} already has a complete panel of "
            f"{store.policy.panel_size} votes"
        )
    if any(v.annotator_id == vote.annotator_id for v in existing):
        raise DuplicateVoteError(
            f"annotator {vote.annotator_id!r} already voted on {vote.candidate_id!r}"
        )
    store.votes.append(vote)
    outcome = tally(existing + [vote], store.policy)
    panel_full = len(existing) + 1 == store.policy.panel_size
    if outcome != PENDING and (store.early_finalize or panel_full):
        if cand.status != PENDING and cand.status != outcome:  # pragma: no cover
            raise AdjudicationError(
                f"candidate {cand.candidate_id!r} would flip {cand.status} -> {outcome}"
            )
        cand.status = outcome
    return cand


def export_adjudicated(candidates: Sequence[CandidateMapping],
                       documents: Mapping[str, Document],
                       activities: Mapping[str, EsgActivity]) -> list[LabeledPair]:
    """Turn a fully adjudicated candidate set into labeled pairs.

    Accepted candidates become positives, rejected ones negatives; chunk text
    is re-resolved from the document span. Pending candidates abort the
    export and are listed in the error.
    """
    pending = [c.candidate_id for c in candidates if c.status == PENDING]
    if pending:
        raise PendingCandidatesError(pending)
    pairs = []
    ordered = sorted(candidates, key=lambda c: (c.doc_id, c.char_start, c.char_end, c.activity_id))
    for cand in ordered:
        doc = documents[cand.doc_id]
        activity = activities[cand.activity_id]
        pairs.append(
            LabeledPair(
                pair_id=cand.candidate_id,
                chunk_text=doc.text[cand.char_start : cand.char_end],
                activity_id=cand.activity_id,
                activity_text=activity.short_description,
                label=1 if cand.status == ACCEPTED else 0,
                provenance="original",
            )
        )
    return pairs
