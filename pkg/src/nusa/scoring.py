"""Null-space analysis scores, gradients, detection, and threshold calibration.

The layer score of a sample ``x`` against a weight matrix ``w`` is

    score(w, x) = ||P(w) x|| / ||x||,

the fraction of the sample's length that survives projection onto the row
space of ``w``.  Components in the null space of ``w`` are invisible to the
layer, so a low score means the layer barely sees the sample: outlier-like.
A network-level score aggregates the layer scores along a forward trace.

Sign convention of the training term: in ``maximize_inlier_score`` mode the
aggregate is SUBTRACTED from the classification loss, so training drives the
scores of training data up and the detector can threshold low scores away.
``minimize_inlier_score`` adds the term instead (same magnitude, opposite
pressure) and is kept selectable for comparison runs.
"""

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    InvalidInputError,
    UnsupportedOperationError,
)
from .network import Network, ForwardTrace, forward_with_trace
from .rng import Xorshift64Star, derive_seed

SIGN_MODES = ("maximize_inlier_score", "minimize_inlier_score")
AGGREGATIONS = ("mean", "sum")


@dataclass(frozen=True)
class NusaConfig:
    """Settings shared by the training term and the detector.

    ``lam`` weighs the score term against the classification loss.
    ``layer_selector`` lists dense-layer indices to score; None selects every
    layer that narrows (in_dim > out_dim), the only ones with a nontrivial
    null space.  ``aggregation`` is "mean" (keeps scores in [0, 1] at any
    depth) or "sum" over the selected layers.
    """

    lam: float = 0.1
    sign: str = "maximize_inlier_score"
    layer_selector: tuple[int, ...] | None = None
    aggregation: str = "mean"
    norm_epsilon: float = 1e-12
    rank_tol: float = 1e-10
    grad_epsilon: float = 1e-8

    def __post_init__(self):
        if self.lam < 0:
            raise InvalidInputError("lam must be >= 0")
        if self.sign not in SIGN_MODES:
            raise InvalidInputError(f"sign must be one of {SIGN_MODES}")
        if self.aggregation not in AGGREGATIONS:
            raise InvalidInputError(f"aggregation must be one of {AGGREGATIONS}")
        if self.norm_epsilon <= 0 or self.rank_tol <= 0:
            raise InvalidInputError("epsilons must be positive")


@dataclass
class NusaReport:
    """Detection result for one sample (Algorithm: inlier iff score > threshold)."""

    per_layer_scores: list[float]
    aggregate_score: float
    predicted_class: int
    is_outlier: bool
    threshold_used: float


@dataclass
class NusaGradient:
    grad_weights: np.ndarray
    grad_input: np.ndarray
    degenerate: bool


def resolve_layer_selection(net: Network, cfg: NusaConfig) -> list[int]:
    """Indices of the dense layers to score; explicit selection is validated."""
    if cfg.layer_selector is not None:
        for idx in cfg.layer_selector:
            if not (0 <= idx < len(net.layers)):
                raise InvalidInputError(f"selected layer {idx} does not exist")
        return list(cfg.layer_selector)
    return [i for i, layer in enumerate(net.layers) if layer.in_dim > layer.out_dim]


def layer_nusa_score(w, x, rank_tol: float = 1e-10, norm_epsilon: float = 1e-12) -> float:
    """Score one vector against one weight matrix (QR projector route)."""
    w = linalg.as_matrix(w)
    x = linalg.as_vector(x)
    if w.shape[1] != x.shape[0]:
        raise DimensionMismatchError(
            f"weights expect dim {w.shape[1]}, vector has dim {x.shape[0]}"
        )
    p = linalg.row_space_projector(w, rank_tol)
    return _score_from_projector(p, x, norm_epsilon)


def _score_from_projector(p: np.ndarray, x: np.ndarray, norm_epsilon: float) -> float:
    nx = float(np.linalg.norm(x))
    if nx <= norm_epsilon:
        raise DegenerateInputError("vector norm is below norm_epsilon")
    r = float(np.linalg.norm(p @ x)) / nx
    return min(max(r, 0.0), 1.0)


def layer_nusa_gradient(w, x, norm_epsilon: float = 1e-12,
                        grad_epsilon: float = 1e-8) -> NusaGradient:
    """Gradients of the layer score with respect to the weights and the input.

    Closed form, no QR: with ``v = (w wT)^-1 w x``, ``px = wT v`` and score
    ``r``,

        grad_w = outer(v, x - px) / (r (||x||^2 + norm_epsilon))
        grad_x = (px - r^2 x)     / (r (||x||^2 + norm_epsilon))

    Requires full row rank.  At ``r <= grad_epsilon`` the score is not
    differentiable; zero gradients are returned with ``degenerate`` set (the
    chosen subgradient).
    """
    w = linalg.as_matrix(w)
    x = linalg.as_vector(x)
    if w.shape[1] != x.shape[0]:
        raise DimensionMismatchError(
            f"weights expect dim {w.shape[1]}, vector has dim {x.shape[0]}"
        )
    n2 = float(x @ x)
    if np.sqrt(n2) <= norm_epsilon:
        raise DegenerateInputError("vector norm is below norm_epsilon")
    try:
        v = np.linalg.solve(w @ w.T, w @ x)
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError("weight matrix must have full row rank") from exc
    px = w.T @ v
    r = float(np.sqrt(max(float(px @ x), 0.0) / n2))
    r = min(r, 1.0)
    if r <= grad_epsilon:
        return NusaGradient(np.zeros_like(w), np.zeros_like(x), True)
    denom = r * (n2 + norm_epsilon)
    grad_w = np.outer(v, x - px) / denom
    grad_x = (px - r * r * x) / denom
    return NusaGradient(grad_w, grad_x, False)


def network_nusa_term(net: Network, trace: ForwardTrace, cfg: NusaConfig) -> float:
    """Aggregate layer scores along a forward trace (mean or sum)."""
    selected = resolve_layer_selection(net, cfg)
    if not selected:
        raise InvalidInputError("no layers selected for scoring")
    scores = [
        layer_nusa_score(net.layers[i].weights, trace.layer_inputs[i],
                         cfg.rank_tol, cfg.norm_epsilon)
        for i in selected
    ]
    total = float(np.sum(scores))
    return total / len(scores) if cfg.aggregation == "mean" else total


def nusa_objective(class_loss: float, nusa_term: float, cfg: NusaConfig) -> float:
    """Combine classification loss and score term with the configured sign."""
    sign = -1.0 if cfg.sign == "maximize_inlier_score" else 1.0
    return class_loss + sign * cfg.lam * nusa_term


def _layer_projectors(net: Network, selected: list[int], cfg: NusaConfig) -> dict[int, np.ndarray]:
    return {
        i: linalg.row_space_projector(net.layers[i].weights, cfg.rank_tol)
        for i in selected
    }


def _trace_scores(net: Network, trace: ForwardTrace, selected: list[int],
                  projectors: dict[int, np.ndarray], cfg: NusaConfig) -> list[float]:
    # A degenerate intermediate input carries no class evidence: score 0.
    scores = []
    for i in selected:
        x = trace.layer_inputs[i]
        if float(np.linalg.norm(x)) <= cfg.norm_epsilon:
            scores.append(0.0)
        else:
            scores.append(_score_from_projector(projectors[i], x, cfg.norm_epsilon))
    return scores


def aggregate_score(net: Network, x, cfg: NusaConfig,
                    _projectors: dict[int, np.ndarray] | None = None) -> float:
    """Network-level score of one sample (mean/sum of its layer scores)."""
    selected = resolve_layer_selection(net, cfg)
    if not selected:
        raise InvalidInputError("no layers selected for scoring")
    projectors = _projectors if _projectors is not None else _layer_projectors(net, selected, cfg)
    x = linalg.as_vector(x)
    if float(np.linalg.norm(x)) <= cfg.norm_epsilon:
        return 0.0
    trace = forward_with_trace(net, x)
    scores = _trace_scores(net, trace, selected, projectors, cfg)
    total = float(np.sum(scores))
    return total / len(scores) if cfg.aggregation == "mean" else total


def aggregate_scores(net: Network, features: np.ndarray, cfg: NusaConfig) -> np.ndarray:
    """Network-level scores for every row of ``features`` (projectors built once)."""
    selected = resolve_layer_selection(net, cfg)
    if not selected:
        raise InvalidInputError("no layers selected for scoring")
    projectors = _layer_projectors(net, selected, cfg)
    return np.array(
        [aggregate_score(net, row, cfg, _projectors=projectors) for row in np.asarray(features, dtype=float)]
    )


def calibrate_threshold(net: Network, calibration_data, cfg: NusaConfig,
                        percentile: float = 5.0) -> float:
    """Score percentile over calibration samples (linear interpolation).

    The default 5th percentile flags at most about 5% of calibration inliers.
    """
    if not (0.0 <= percentile <= 100.0):
        raise InvalidInputError("percentile must be in [0, 100]")
    if calibration_data.size == 0:
        raise InvalidInputError("calibration data is empty")
    scores = aggregate_scores(net, calibration_data.features, cfg)
    return float(np.percentile(scores, percentile))


def detect(net: Network, x, threshold: float, cfg: NusaConfig,
           _projectors: dict[int, np.ndarray] | None = None) -> NusaReport:
    """Classify one sample and decide inlier/outlier from its aggregate score.

    A sample is an outlier when its score is <= threshold (inliers keep
    their argmax class).  Inputs of near-zero norm score 0 on every layer.
    """
    selected = resolve_layer_selection(net, cfg)
    if not selected:
        raise InvalidInputError("no layers selected for scoring")
    projectors = _projectors if _projectors is not None else _layer_projectors(net, selected, cfg)
    x = linalg.as_vector(x)
    trace = forward_with_trace(net, x)
    if float(np.linalg.norm(x)) <= cfg.norm_epsilon:
        scores = [0.0] * len(selected)
    else:
        scores = _trace_scores(net, trace, selected, projectors, cfg)
    total = float(np.sum(scores))
    aggregate = total / len(scores) if cfg.aggregation == "mean" else total
    return NusaReport(
        per_layer_scores=scores,
        aggregate_score=aggregate,
        predicted_class=int(np.argmax(trace.output)),
        is_outlier=aggregate <= threshold,
        threshold_used=float(threshold),
    )


def detect_batch(net: Network, features: np.ndarray, threshold: float,
                 cfg: NusaConfig) -> list[NusaReport]:
    """Per-sample reports for every row, identical to single-sample calls."""
    selected = resolve_layer_selection(net, cfg)
    if not selected:
        raise InvalidInputError("no layers selected for scoring")
    projectors = _layer_projectors(net, selected, cfg)
    return [
        detect(net, row, threshold, cfg, _projectors=projectors)
        for row in np.asarray(features, dtype=float)
    ]


def null_space_perturbation(net: Network, x, magnitude: float, seed: int) -> np.ndarray:
    """Add a seeded unit null-space direction of the first layer, scaled.

    The perturbation is invisible to the first layer's affine map, so the
    network output is unchanged for any magnitude.  Raises when the first
    layer has a trivial null space.
    """
    x = linalg.as_vector(x)
    basis = linalg.null_space_basis(net.layers[0].weights)
    if basis.shape[0] == 0:
        raise UnsupportedOperationError("first layer has a trivial null space")
    rng = Xorshift64Star(derive_seed(seed, 0x2E11))
    coeffs = rng.normals(basis.shape[0])
    z = coeffs @ basis
    z /= np.linalg.norm(z)
    return x + magnitude * z
