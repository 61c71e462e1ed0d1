import itertools

import pytest

from esgmap.adjudication import (
    ACCEPTED,
    PENDING,
    REJECTED,
    AdjudicationPolicy,
    CandidateMapping,
    Vote,
    export_adjudicated,
    record_vote,
    tally,
)
from esgmap.corpus import Document
from esgmap.exceptions import (
    AdjudicationError,
    DuplicateVoteError,
    FinalizedCandidateError,
    PendingCandidatesError,
    UnknownCandidateError,
)
from esgmap.taxonomy import EsgActivity


def vote(cid, annotator, decision):
    return Vote(candidate_id=cid, annotator_id=annotator, decision=decision, timestamp="t")


def candidate(cid="cand-1", start=0, end=10, activity="T01", doc="doc-a"):
    return CandidateMapping(candidate_id=cid, doc_id=doc, chunk_id=f"{doc}:{start}-{end}",
                            char_start=start, char_end=end, activity_id=activity,
                            retrieval_score=0.9)


class FakeStore:
    def __init__(self, candidates, policy=None, early_finalize=True):
        self.candidates = {c.candidate_id: c for c in candidates}
        self.votes = []
        self.policy = policy or AdjudicationPolicy()
        self.early_finalize = early_finalize


POLICY = AdjudicationPolicy(panel_size=3, quorum=2)


class TestTally:
    def test_exhaustive_three_vote_sequences(self):
        # DERIVED: all 2^3 sequences; accepted exactly when >= 2 confirms.
        for seq in itertools.product(["confirm", "reject"], repeat=3):
            votes = [vote("c", f"a{i}", d) for i, d in enumerate(seq)]
            expected = ACCEPTED if seq.count("confirm") >= 2 else REJECTED
            assert tally(votes, POLICY) == expected

    def test_vote_order_invariance(self):
        votes = [vote("c", "a1", "confirm"), vote("c", "a2", "reject"),
                 vote("c", "a3", "confirm")]
        outcomes = {tally(list(perm), POLICY) for perm in itertools.permutations(votes)}
        assert outcomes == {ACCEPTED}

    def test_early_decision_matches_full_panel(self):
        for seq in itertools.product(["confirm", "reject"], repeat=3):
            votes = [vote("c", f"a{i}", d) for i, d in enumerate(seq)]
            full = tally(votes, POLICY)
            early = PENDING
            for n in range(1, 4):
                early = tally(votes[:n], POLICY)
                if early != PENDING:
                    break
            assert early == full

    def test_insufficient_votes_pending(self):
        assert tally([vote("c", "a1", "confirm")], POLICY) == PENDING
        assert tally([], POLICY) == PENDING

    def test_quorum_one_accepts_immediately(self):
        policy = AdjudicationPolicy(panel_size=3, quorum=1)
        assert tally([vote("c", "a1", "confirm")], policy) == ACCEPTED

    def test_duplicate_annotator_rejected(self):
        with pytest.raises(AdjudicationError, match="duplicate"):
            tally([vote("c", "a1", "confirm"), vote("c", "a1", "confirm")], POLICY)

    def test_mixed_candidates_rejected(self):
        with pytest.raises(AdjudicationError, match="multiple"):
            tally([vote("c1", "a1", "confirm"), vote("c2", "a2", "confirm")], POLICY)


class TestPolicy:
    def test_quorum_bounds(self):
        with pytest.raises(AdjudicationError):
            AdjudicationPolicy(panel_size=3, quorum=4)
        with pytest.raises(AdjudicationError):
            AdjudicationPolicy(panel_size=3, quorum=0)


class TestRecordVote:
    def test_majority_two_confirms_then_reject(self):
        store = FakeStore([candidate()])
        record_vote(store, vote("cand-1", "a1", "confirm"))
        record_vote(store, vote("cand-1", "a2", "confirm"))
        third = record_vote(store, vote("cand-1", "a3", "reject"))
        assert third.status == ACCEPTED
        assert len(store.votes) == 3

    def test_two_rejects_then_confirm_rejected(self):
        store = FakeStore([candidate()])
        record_vote(store, vote("cand-1", "a1", "reject"))
        record_vote(store, vote("cand-1", "a2", "reject"))
        record_vote(store, vote("cand-1", "a3", "confirm"))
        assert store.candidates["cand-1"].status == REJECTED

    def test_duplicate_annotator(self):
        store = FakeStore([candidate()])
        record_vote(store, vote("cand-1", "a1", "confirm"))
        with pytest.raises(DuplicateVoteError):
            record_vote(store, vote("cand-1", "a1", "reject"))

    def test_unknown_candidate(self):
        store = FakeStore([candidate()])
        with pytest.raises(UnknownCandidateError):
            record_vote(store, vote("cand-404", "a1", "confirm"))

    def test_fourth_vote_rejected(self):
        store = FakeStore([candidate()])
        for i, d in enumerate(["confirm", "reject", "confirm"]):
            record_vote(store, vote("cand-1", f"a{i}", d))
        with pytest.raises(FinalizedCandidateError):
            record_vote(store, vote("cand-1", "a9", "reject"))

    def test_early_finalize_flips_status_before_panel_full(self):
        store = FakeStore([candidate()], early_finalize=True)
        record_vote(store, vote("cand-1", "a1", "confirm"))
        assert store.candidates["cand-1"].status == PENDING
        record_vote(store, vote("cand-1", "a2", "confirm"))
        assert store.candidates["cand-1"].status == ACCEPTED

    def test_collect_all_mode_waits_for_full_panel(self):
        store = FakeStore([candidate()], early_finalize=False)
        record_vote(store, vote("cand-1", "a1", "confirm"))
        record_vote(store, vote("cand-1", "a2", "confirm"))
        assert store.candidates["cand-1"].status == PENDING
        record_vote(store, vote("cand-1", "a3", "reject"))
        assert store.candidates["cand-1"].status == ACCEPTED

    def test_late_vote_never_flips_forced_outcome(self):
        store = FakeStore([candidate()], early_finalize=True)
        record_vote(store, vote("cand-1", "a1", "confirm"))
        record_vote(store, vote("cand-1", "a2", "confirm"))
        record_vote(store, vote("cand-1", "a3", "reject"))
        assert store.candidates["cand-1"].status == ACCEPTED


class TestExportAdjudicated:
    def _fixture(self, n=10, accepted=4):
        doc = Document(doc_id="doc-a", company="c", title="t",
                       text="x" * (n * 100 + 100))
        activity = EsgActivity(activity_id="T01", title="t", full_description="",
                               short_description="short description of T01")
        cands = []
        for i in range(n):
            c = candidate(cid=f"cand-{i}", start=i * 100, end=i * 100 + 50)
            c.status = ACCEPTED if i < accepted else REJECTED
            cands.append(c)
        return cands, {"doc-a": doc}, {"T01": activity}

    def test_conservation(self):
        cands, docs, acts = self._fixture(n=10, accepted=4)
        pairs = export_adjudicated(cands, docs, acts)
        assert len(pairs) == 10
        assert sum(p.label for p in pairs) == 4
        assert all(p.provenance == "original" for p in pairs)

    def test_chunk_text_resolved_from_span(self):
        doc = Document(doc_id="doc-a", company="", title="",
                       text="the quick brown fox jumps over the lazy dog")
        activity = EsgActivity(activity_id="T01", title="", full_description="",
                               short_description="desc")
        c = candidate(cid="cand-0", start=4, end=19)
        c.status = ACCEPTED
        pairs = export_adjudicated([c], {"doc-a": doc}, {"T01": activity})
        assert pairs[0].chunk_text == "quick brown fox"
        assert pairs[0].activity_text == "desc"

    def test_empty_input(self):
        assert export_adjudicated([], {}, {}) == []

    def test_pending_candidates_block_export(self):
        cands, docs, acts = self._fixture(n=10, accepted=5)
        cands[7].status = PENDING
        with pytest.raises(PendingCandidatesError) as exc_info:
            export_adjudicated(cands, docs, acts)
        assert "cand-7" in str(exc_info.value)

    def test_paper_scale_counts(self):
        cands, docs, acts = self._fixture(n=265, accepted=78)
        pairs = export_adjudicated(cands, docs, acts)
        assert len(pairs) == 265
        assert sum(p.label for p in pairs) == 78


class TestVoteValidation:
    def test_empty_annotator(self):
        with pytest.raises(AdjudicationError):
            Vote(candidate_id="c", annotator_id="", decision="confirm")

    def test_bad_decision(self):
        with pytest.raises(AdjudicationError):
            Vote(candidate_id="c", annotator_id="a", decision="maybe")
