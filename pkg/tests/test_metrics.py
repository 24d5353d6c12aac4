import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nusa import metrics
from nusa.errors import InvalidInputError, UndefinedMetricError
from nusa.metrics import (
    Curve,
    auc,
    average_curves,
    histogram,
    invert_scores,
    normalize_scores,
    pr_curve,
    roc_curve,
)


# ---------------------------------------------------------------------------
# Independent brute-force oracles.  These stay deliberately naive: enumerate
# every distinct threshold and count, or count score pairs directly.

def oracle_roc_points(scores, truth):
    scores = np.asarray(scores, float)
    truth = np.asarray(truth, bool)
    n_pos, n_neg = truth.sum(), (~truth).sum()
    points = [(0.0, 0.0)]
    for threshold in sorted(set(scores), reverse=True):
        pred = scores >= threshold
        points.append(((pred & ~truth).sum() / n_neg, (pred & truth).sum() / n_pos))
    return points


def oracle_pr_points(scores, truth):
    scores = np.asarray(scores, float)
    truth = np.asarray(truth, bool)
    n_pos = truth.sum()
    points = [(0.0, 1.0)]
    for threshold in sorted(set(scores), reverse=True):
        pred = scores >= threshold
        tp = (pred & truth).sum()
        points.append((tp / n_pos, tp / pred.sum()))
    return points


def oracle_auc_pairs(scores, truth):
    scores = np.asarray(scores, float)
    truth = np.asarray(truth, bool)
    pos = scores[truth]
    neg = scores[~truth]
    total = 0.0
    for p in pos:
        for q in neg:
            total += 1.0 if p > q else (0.5 if p == q else 0.0)
    return total / (len(pos) * len(neg))


def oracle_histogram(scores, bins):
    counts = [0] * bins
    for s in scores:
        idx = int(np.floor(s * bins))
        if idx == bins:  # right edge belongs to the last bin
            idx -= 1
        counts[idx] += 1
    return counts


def random_instance(rng, n=20, ties=False):
    scores = rng.integers(0, 8, size=n) / 7.0 if ties else rng.random(n)
    truth = rng.random(n) < 0.4
    if not truth.any():
        truth[0] = True
    if truth.all():
        truth[-1] = False
    return scores, truth


# ---------------------------------------------------------------------------
# normalize / invert

def test_normalize_examples():
    np.testing.assert_allclose(normalize_scores([2, 4, 6]), [0.0, 0.5, 1.0])
    np.testing.assert_allclose(normalize_scores([3.3, 3.3, 3.3]), [0.5, 0.5, 0.5])


@given(st.lists(st.floats(-1e6, 1e6), min_size=2, max_size=50))
def test_normalize_is_order_preserving(values):
    # strictly ordered inputs closer than float epsilon relative to the range
    # may collapse to ties, so assert weak-order preservation here
    normalized = normalize_scores(values)
    order = np.argsort(values, kind="stable")
    assert np.all(np.diff(normalized[order]) >= 0)


def test_normalize_ranking_unchanged_on_random_input():
    scores = np.random.default_rng(17).random(100)
    normalized = normalize_scores(scores)
    assert np.array_equal(np.argsort(scores, kind="stable"),
                          np.argsort(normalized, kind="stable"))


def test_invert_examples():
    np.testing.assert_allclose(invert_scores([0.0, 0.5, 1.0]), [1.0, 0.5, 0.0])
    s = np.linspace(0, 1, 11)
    np.testing.assert_allclose(invert_scores(invert_scores(s)), s)
    with pytest.raises(InvalidInputError):
        invert_scores([1.5])


def test_invert_flips_auc():
    rng = np.random.default_rng(5)
    scores, truth = random_instance(rng)
    scores = normalize_scores(scores)
    a = auc(roc_curve(scores, truth))
    b = auc(roc_curve(invert_scores(scores), truth))
    assert a + b == pytest.approx(1.0, abs=1e-12)


# ---------------------------------------------------------------------------
# ROC

def test_roc_perfect_separation_passes_through_corner():
    scores = np.array([0.9, 0.8, 0.7, 0.2, 0.1])
    truth = np.array([True, True, True, False, False])
    curve = roc_curve(scores, truth)
    points = set(zip(curve.xs.tolist(), curve.ys.tolist()))
    assert (0.0, 1.0) in points
    assert curve.xs[0] == 0.0 and curve.ys[0] == 0.0
    assert curve.xs[-1] == 1.0 and curve.ys[-1] == 1.0


def test_roc_all_tied_is_diagonal():
    curve = roc_curve([0.5] * 6, [True, False] * 3)
    np.testing.assert_allclose(curve.xs, [0.0, 1.0])
    np.testing.assert_allclose(curve.ys, [0.0, 1.0])


def test_roc_matches_bruteforce_enumeration():
    rng = np.random.default_rng(12)
    for trial in range(30):
        scores, truth = random_instance(rng, ties=trial % 2 == 0)
        curve = roc_curve(scores, truth)
        expected = oracle_roc_points(scores, truth)
        np.testing.assert_allclose(list(zip(curve.xs, curve.ys)), expected, atol=1e-15)


def test_roc_single_class_rejected():
    with pytest.raises(UndefinedMetricError):
        roc_curve([0.1, 0.2], [True, True])


def test_roc_monotone_both_coordinates():
    rng = np.random.default_rng(23)
    for _ in range(20):
        scores, truth = random_instance(rng, ties=True)
        curve = roc_curve(scores, truth)
        assert np.all(np.diff(curve.xs) >= 0)
        assert np.all(np.diff(curve.ys) >= 0)


# ---------------------------------------------------------------------------
# AUC

def test_auc_examples():
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    truth = np.array([True, True, False, False])
    assert auc(roc_curve(scores, truth)) == pytest.approx(1.0, abs=1e-15)
    assert auc(roc_curve([0.5] * 4, truth)) == pytest.approx(0.5, abs=1e-15)


def test_auc_matches_pair_counting():
    rng = np.random.default_rng(40)
    for trial in range(30):
        scores, truth = random_instance(rng, ties=trial % 3 == 0)
        assert auc(roc_curve(scores, truth)) == pytest.approx(
            oracle_auc_pairs(scores, truth), abs=1e-12)


def test_auc_reversed_labels():
    rng = np.random.default_rng(41)
    scores = rng.random(25)  # continuous: no ties
    truth = rng.random(25) < 0.5
    truth[0], truth[1] = True, False
    assert auc(roc_curve(scores, truth)) + auc(roc_curve(scores, ~truth)) == \
        pytest.approx(1.0, abs=1e-12)


def test_monotone_transform_leaves_roc_auc_pr_unchanged():
    rng = np.random.default_rng(42)
    scores, truth = random_instance(rng)
    transformed = np.exp(3.0 * scores) + 1.0
    r1, r2 = roc_curve(scores, truth), roc_curve(transformed, truth)
    np.testing.assert_allclose(r1.xs, r2.xs)
    np.testing.assert_allclose(r1.ys, r2.ys)
    p1, p2 = pr_curve(scores, truth), pr_curve(transformed, truth)
    np.testing.assert_allclose(p1.xs, p2.xs)
    np.testing.assert_allclose(p1.ys, p2.ys)
    assert auc(r1) == pytest.approx(auc(r2), abs=1e-15)


# ---------------------------------------------------------------------------
# PR

def test_pr_perfect_separation():
    scores = np.array([0.9, 0.8, 0.7, 0.65, 0.6, 0.2, 0.15, 0.1, 0.05, 0.0])
    truth = np.array([True] * 5 + [False] * 5)
    curve = pr_curve(scores, truth)
    assert (1.0, 1.0) in set(zip(curve.xs.tolist(), curve.ys.tolist()))


def test_pr_all_tied_gives_base_rate():
    truth = np.array([True, True, False, False, False, False, False, False])
    curve = pr_curve([0.3] * 8, truth)
    np.testing.assert_allclose(curve.xs, [0.0, 1.0])
    np.testing.assert_allclose(curve.ys, [1.0, 0.25])


def test_pr_matches_bruteforce_enumeration():
    rng = np.random.default_rng(77)
    for trial in range(30):
        scores, truth = random_instance(rng, ties=trial % 2 == 1)
        curve = pr_curve(scores, truth)
        expected = oracle_pr_points(scores, truth)
        np.testing.assert_allclose(list(zip(curve.xs, curve.ys)), expected, atol=1e-15)


def test_pr_without_positives_rejected():
    with pytest.raises(UndefinedMetricError):
        pr_curve([0.1, 0.2], [False, False])


# ---------------------------------------------------------------------------
# curve averaging

def test_average_with_itself_reproduces_curve():
    curve = Curve([0.0, 0.25, 1.0], [0.0, 0.9, 1.0], "roc")
    averaged = average_curves([curve, curve, curve], grid_size=9)
    expected = np.interp(averaged.xs, curve.xs, curve.ys)
    np.testing.assert_allclose(averaged.ys, expected, atol=1e-15)


def test_average_diagonal_stays_diagonal():
    diag = Curve([0.0, 1.0], [0.0, 1.0], "roc")
    averaged = average_curves([diag] * 5, grid_size=101)
    np.testing.assert_allclose(averaged.ys, averaged.xs, atol=1e-15)


def test_average_two_roc_curves_hand_interpolated():
    # piecewise-linear curves with easy closed forms:
    # c1 rises to 1 at x=0.5 then stays; c2 is the diagonal
    c1 = Curve([0.0, 0.5, 1.0], [0.0, 1.0, 1.0], "roc")
    c2 = Curve([0.0, 1.0], [0.0, 1.0], "roc")
    grid = np.linspace(0.0, 1.0, 101)
    hand = (np.minimum(2.0 * grid, 1.0) + grid) / 2.0
    averaged = average_curves([c1, c2], grid_size=101)
    np.testing.assert_allclose(averaged.ys, hand, atol=1e-12)


def test_average_pr_uses_step_carry():
    c = Curve([0.0, 0.5, 1.0], [1.0, 0.8, 0.4], "precision_recall")
    averaged = average_curves([c], grid_size=5)
    # grid 0, .25, .5, .75, 1 -> last value at or before each grid point
    np.testing.assert_allclose(averaged.ys, [1.0, 1.0, 0.8, 0.8, 0.4])


def test_average_permutation_invariant():
    rng = np.random.default_rng(3)
    curves = []
    for _ in range(4):
        scores, truth = random_instance(rng)
        curves.append(roc_curve(scores, truth))
    forward = average_curves(curves, 51)
    backward = average_curves(curves[::-1], 51)
    np.testing.assert_allclose(forward.ys, backward.ys, atol=1e-15)


def test_average_mixed_kinds_rejected():
    roc = Curve([0.0, 1.0], [0.0, 1.0], "roc")
    pr = Curve([0.0, 1.0], [1.0, 0.5], "precision_recall")
    with pytest.raises(InvalidInputError):
        average_curves([roc, pr])


# ---------------------------------------------------------------------------
# histogram

def test_histogram_edges():
    counts = histogram([0.05, 0.95], bins=10)
    assert counts[0] == 1 and counts[9] == 1 and counts.sum() == 2


def test_histogram_right_edge_inclusive():
    counts = histogram([1.0, 0.0], bins=4)
    assert counts[0] == 1 and counts[-1] == 1


@settings(deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=1, max_size=200),
       st.integers(1, 25))
def test_histogram_total_and_bruteforce(values, bins):
    counts = histogram(values, bins=bins)
    assert counts.sum() == len(values)
    assert counts.tolist() == oracle_histogram(values, bins)


def test_histogram_matches_bruteforce_on_random_scores():
    rng = np.random.default_rng(8)
    scores = rng.random(1000)
    assert histogram(scores, 20).tolist() == oracle_histogram(scores, 20)


def test_curve_and_histogram_csv_shapes():
    curve = Curve([0.0, 1.0], [0.0, 1.0], "roc")
    text = metrics.curve_csv(curve)
    assert text.splitlines()[0] == "x,y"
    assert len(text.splitlines()) == 3
    hist_text = metrics.histogram_csv(np.array([2, 0, 1]))
    assert hist_text.splitlines()[0] == "bin_left,bin_right,count"
    assert len(hist_text.splitlines()) == 4


def test_metrics_record_fields():
    record = metrics.metrics_record("knn", [0.9, 0.1, 0.8], [True, False, True])
    assert record["method"] == "knn"
    assert record["n_pos"] == 2 and record["n_neg"] == 1
    assert 0.0 <= record["auc"] <= 1.0
