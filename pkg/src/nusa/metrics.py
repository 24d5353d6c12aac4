"""ROC/PR curves, AUC, score normalization, curve averaging, histograms.

Outliers are the positive class throughout.  Scores fed to the curve
functions must already be oriented so that higher means more outlying; use
``invert_scores`` on detector outputs where high means inlier, and
``normalize_scores`` to put mixed detectors on a shared [0, 1] axis (min-max
scaling never changes a ranking, so ROC/PR/AUC are unaffected by it).
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidInputError, UndefinedMetricError

CURVE_KINDS = ("roc", "precision_recall")
DEFAULT_GRID_SIZE = 101


@dataclass
class Curve:
    xs: np.ndarray
    ys: np.ndarray
    kind: str

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        if self.kind not in CURVE_KINDS:
            raise InvalidInputError(f"kind must be one of {CURVE_KINDS}")
        if self.xs.shape != self.ys.shape or self.xs.ndim != 1:
            raise DimensionMismatchError("curve coordinates must be matching 1-D arrays")
        if np.any(np.diff(self.xs) < 0):
            raise InvalidInputError("curve x-coordinates must be non-decreasing")


def normalize_scores(scores) -> np.ndarray:
    """Min-max scale to [0, 1]; a constant list maps to all 0.5."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise InvalidInputError("empty score list")
    if not np.all(np.isfinite(scores)):
        raise InvalidInputError("scores contain non-finite values")
    low, high = float(scores.min()), float(scores.max())
    if high == low:
        return np.full_like(scores, 0.5)
    return (scores - low) / (high - low)


def invert_scores(scores) -> np.ndarray:
    """Flip orientation on [0, 1]: score -> 1 - score."""
    scores = np.asarray(scores, dtype=float)
    if np.any(scores < -1e-12) or np.any(scores > 1.0 + 1e-12):
        raise InvalidInputError("scores must lie in [0, 1]")
    return 1.0 - scores


def _validated_samples(scores, is_outlier):
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(is_outlier, dtype=bool)
    if scores.shape != truth.shape or scores.ndim != 1:
        raise DimensionMismatchError("scores and truth must be matching 1-D arrays")
    if not np.all(np.isfinite(scores)):
        raise InvalidInputError("scores contain non-finite values")
    return scores, truth


def _threshold_sweep(scores, truth):
    """Cumulative (tp, fp) after each distinct threshold, descending; ties grouped."""
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    t = truth[order]
    boundaries = np.nonzero(np.diff(s))[0]  # last index of each tie group
    ends = np.concatenate([boundaries, [s.size - 1]])
    tp = np.cumsum(t)[ends]
    fp = np.cumsum(~t)[ends]
    return tp, fp


def roc_curve(samples_scores, is_outlier) -> Curve:
    """False-positive rate vs true-positive rate over all distinct thresholds."""
    scores, truth = _validated_samples(samples_scores, is_outlier)
    n_pos = int(truth.sum())
    n_neg = truth.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("ROC needs at least one outlier and one inlier")
    tp, fp = _threshold_sweep(scores, truth)
    xs = np.concatenate([[0.0], fp / n_neg])
    ys = np.concatenate([[0.0], tp / n_pos])
    return Curve(xs, ys, "roc")


def pr_curve(samples_scores, is_outlier) -> Curve:
    """Recall vs precision over the threshold sweep; precision at recall 0 is 1."""
    scores, truth = _validated_samples(samples_scores, is_outlier)
    n_pos = int(truth.sum())
    if n_pos == 0:
        raise UndefinedMetricError("PR needs at least one outlier")
    tp, fp = _threshold_sweep(scores, truth)
    xs = np.concatenate([[0.0], tp / n_pos])
    ys = np.concatenate([[1.0], tp / (tp + fp)])
    return Curve(xs, ys, "precision_recall")


def auc(curve: Curve) -> float:
    """Trapezoidal area under the curve.

    For ROC curves built by ``roc_curve`` this equals the Mann-Whitney
    ranking statistic, with tied scores counting one half.
    """
    return float(np.trapezoid(curve.ys, curve.xs))


def average_curves(curves: list[Curve], grid_size: int = DEFAULT_GRID_SIZE) -> Curve:
    """Resample every curve onto a uniform x-grid and average the y values.

    ROC curves are interpolated linearly (vertical segments collapse to their
    upper envelope); PR curves carry the last precision value forward between
    recall points, the conservative step convention.
    """
    if not curves:
        raise InvalidInputError("no curves to average")
    if grid_size < 2:
        raise InvalidInputError("grid_size must be >= 2")
    kind = curves[0].kind
    if any(c.kind != kind for c in curves):
        raise InvalidInputError("cannot average curves of mixed kinds")
    grid = np.linspace(0.0, 1.0, grid_size)
    resampled = np.array([_resample(c, grid) for c in curves])
    return Curve(grid, resampled.mean(axis=0), kind)


def _resample(curve: Curve, grid: np.ndarray) -> np.ndarray:
    if curve.kind == "roc":
        # collapse duplicate x to the max y so verticals have a defined value
        xs, inverse = np.unique(curve.xs, return_inverse=True)
        ys = np.full(xs.size, -np.inf)
        np.maximum.at(ys, inverse, curve.ys)
        return np.interp(grid, xs, ys)
    idx = np.searchsorted(curve.xs, grid, side="right") - 1
    return curve.ys[np.clip(idx, 0, curve.ys.size - 1)]


def histogram(scores, bins: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
    """Uniform-width bin counts over [low, high]; the last bin includes its right edge."""
    if bins < 1:
        raise InvalidInputError("bins must be >= 1")
    scores = np.asarray(scores, dtype=float)
    counts, _ = np.histogram(scores, bins=bins, range=(low, high))
    return counts


def curve_csv(curve: Curve) -> str:
    lines = ["x,y"]
    lines += [f"{x!r},{y!r}" for x, y in zip(curve.xs.tolist(), curve.ys.tolist())]
    return "\n".join(lines) + "\n"


def histogram_csv(counts: np.ndarray, low: float = 0.0, high: float = 1.0) -> str:
    edges = np.linspace(low, high, len(counts) + 1)
    lines = ["bin_left,bin_right,count"]
    lines += [
        f"{left!r},{right!r},{int(count)}"
        for left, right, count in zip(edges[:-1].tolist(), edges[1:].tolist(), counts)
    ]
    return "\n".join(lines) + "\n"


def metrics_record(method: str, scores, is_outlier) -> dict:
    """Summary dict ({method, auc, n_pos, n_neg}) for one scored test set."""
    scores, truth = _validated_samples(scores, is_outlier)
    record = {
        "method": method,
        "auc": auc(roc_curve(scores, truth)),
        "n_pos": int(truth.sum()),
        "n_neg": int(truth.size - truth.sum()),
    }
    return record


def metrics_json(records: list[dict]) -> str:
    return json.dumps(records, indent=2, sort_keys=True) + "\n"
