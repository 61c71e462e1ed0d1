import math
import random
from fractions import Fraction

import pytest

from esgmap.metrics import bce_loss, confusion, render_metrics_table, weighted_metrics


def oracle_weighted(y_true, y_pred):
    """Independent brute-force implementation over exact rationals."""

    def prf(positive):
        tp = sum(1 for t, p in zip(y_true, y_pred) if t == positive and p == positive)
        fp = sum(1 for t, p in zip(y_true, y_pred) if t != positive and p == positive)
        fn = sum(1 for t, p in zip(y_true, y_pred) if t == positive and p != positive)
        precision = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
        recall = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else Fraction(0)
        return precision, recall, f1

    n0 = sum(1 for t in y_true if t == 0)
    n1 = len(y_true) - n0
    p0, r0, f0 = prf(0)
    p1, r1, f1 = prf(1)
    n = Fraction(len(y_true))
    return {
        "p0": p0, "r0": r0, "f0": f0, "p1": p1, "r1": r1, "f1": f1,
        "wp": (n0 * p0 + n1 * p1) / n,
        "wr": (n0 * r0 + n1 * r1) / n,
        "wf": (n0 * f0 + n1 * f1) / n,
    }


WORKED_Y = [1, 1, 0, 0, 0]
WORKED_PRED = [1, 0, 0, 0, 1]


class TestConfusion:
    def test_worked_example(self):
        # DERIVED: counted by hand over the five items.
        cm = confusion(WORKED_Y, WORKED_PRED)
        assert (cm.tp, cm.fn, cm.fp, cm.tn) == (1, 1, 1, 2)
        assert cm.total == 5

    def test_perfect_predictor(self):
        cm = confusion([1, 0, 1], [1, 0, 1])
        assert cm.fp == cm.fn == 0

    def test_anti_predictor(self):
        y = [1, 0, 1, 0]
        cm = confusion(y, [1 - v for v in y])
        assert cm.tp == cm.tn == 0

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="mismatch"):
            confusion([1], [1, 0])

    def test_empty(self):
        with pytest.raises(ValueError, match="empty"):
            confusion([], [])

    def test_non_binary_rejected(self):
        with pytest.raises(ValueError):
            confusion([2], [1])


class TestWeightedMetrics:
    def test_worked_example(self):
        # DERIVED by hand from the confusion example: class1 P=R=F1=0.5,
        # class0 P=R=F1=2/3, weighted = (3*(2/3) + 2*(1/2)) / 5 = 0.6.
        r = weighted_metrics(WORKED_Y, WORKED_PRED)
        assert r.precision1 == r.recall1 == r.f1_1 == pytest.approx(0.5)
        assert r.precision0 == r.recall0 == r.f1_0 == pytest.approx(2 / 3)
        assert r.weighted_precision == pytest.approx(0.6)
        assert r.weighted_recall == pytest.approx(0.6)
        assert r.weighted_f1 == pytest.approx(0.6)
        assert (r.support0, r.support1) == (3, 2)

    def test_perfect_predictions(self):
        r = weighted_metrics([1, 0, 0, 1, 1], [1, 0, 0, 1, 1])
        assert r.weighted_precision == r.weighted_recall == r.weighted_f1 == 1.0

    def test_all_zero_predictions_zero_denominator_rule(self):
        # DERIVED by hand: class1 P=0 (0/0 rule), R=0; class0 P=0.5, R=1,
        # F1=2/3; weighted F1 = (1*(2/3) + 1*0)/2 = 1/3.
        r = weighted_metrics([1, 0], [0, 0])
        assert r.precision1 == 0.0 and r.recall1 == 0.0 and r.f1_1 == 0.0
        assert r.precision0 == pytest.approx(0.5)
        assert r.recall0 == pytest.approx(1.0)
        assert r.f1_0 == pytest.approx(2 / 3)
        assert r.weighted_f1 == pytest.approx(1 / 3)

    def test_matches_rational_oracle_on_random_sets(self):
        rng = random.Random(7)
        for _ in range(300):
            n = rng.randint(1, 120)
            y = [rng.randint(0, 1) for _ in range(n)]
            p = [rng.randint(0, 1) for _ in range(n)]
            r = weighted_metrics(y, p)
            o = oracle_weighted(y, p)
            for got, want in [
                (r.precision0, o["p0"]), (r.recall0, o["r0"]), (r.f1_0, o["f0"]),
                (r.precision1, o["p1"]), (r.recall1, o["r1"]), (r.f1_1, o["f1"]),
                (r.weighted_precision, o["wp"]), (r.weighted_recall, o["wr"]),
                (r.weighted_f1, o["wf"]),
            ]:
                assert abs(got - float(want)) <= 1e-9

    def test_permutation_invariance(self):
        rng = random.Random(13)
        y = [rng.randint(0, 1) for _ in range(60)]
        p = [rng.randint(0, 1) for _ in range(60)]
        base = weighted_metrics(y, p)
        order = list(range(60))
        rng.shuffle(order)
        shuffled = weighted_metrics([y[i] for i in order], [p[i] for i in order])
        assert shuffled == base

    def test_label_swap_symmetry(self):
        rng = random.Random(29)
        y = [rng.randint(0, 1) for _ in range(50)]
        p = [rng.randint(0, 1) for _ in range(50)]
        a = weighted_metrics(y, p)
        b = weighted_metrics([1 - v for v in y], [1 - v for v in p])
        assert (b.precision0, b.recall0, b.f1_0) == (a.precision1, a.recall1, a.f1_1)
        assert (b.precision1, b.recall1, b.f1_1) == (a.precision0, a.recall0, a.f1_0)
        assert b.weighted_precision == pytest.approx(a.weighted_precision)
        assert b.weighted_recall == pytest.approx(a.weighted_recall)
        assert b.weighted_f1 == pytest.approx(a.weighted_f1)

    def test_all_metrics_within_unit_interval(self):
        rng = random.Random(41)
        for _ in range(50):
            n = rng.randint(1, 40)
            y = [rng.randint(0, 1) for _ in range(n)]
            p = [rng.randint(0, 1) for _ in range(n)]
            r = weighted_metrics(y, p)
            for v in [r.precision0, r.recall0, r.f1_0, r.precision1, r.recall1,
                      r.f1_1, r.weighted_precision, r.weighted_recall, r.weighted_f1,
                      r.macro_precision, r.macro_recall, r.macro_f1]:
                assert 0.0 <= v <= 1.0


class TestBceLoss:
    def test_half_probabilities_give_ln2(self):
        assert bce_loss([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-12)

    def test_quarter_probability_gives_ln4(self):
        assert bce_loss([1], [0.25]) == pytest.approx(math.log(4), abs=1e-12)

    def test_perfect_predictions_clamped(self):
        assert bce_loss([1, 0, 1], [1.0, 0.0, 1.0]) <= 1e-11

    def test_probability_out_of_range(self):
        with pytest.raises(ValueError, match="outside"):
            bce_loss([1], [1.5])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            bce_loss([1, 0], [0.5])

    def test_loss_minimized_at_truth(self):
        # Convexity spot check: perturbing probabilities away from the labels
        # never lowers the loss.
        rng = random.Random(3)
        y = [rng.randint(0, 1) for _ in range(20)]
        best = bce_loss(y, [float(v) for v in y])
        for _ in range(25):
            probs = [min(1.0, max(0.0, v + rng.uniform(-0.9, 0.9))) for v in y]
            assert bce_loss(y, probs) >= best

    def test_included_in_report_when_probs_given(self):
        r = weighted_metrics([1, 0], [1, 0], y_prob=[0.9, 0.2])
        assert r.bce_loss == pytest.approx(-(math.log(0.9) + math.log(0.8)) / 2)


def test_render_table_layout():
    r = weighted_metrics(WORKED_Y, WORKED_PRED)
    table = render_metrics_table([("stub-model", r)])
    lines = table.splitlines()
    assert lines[0].split() == ["Model", "Precision", "Recall", "F1-Score"]
    assert "stub-model" in lines[2]
    assert "0.6000" in lines[2]
