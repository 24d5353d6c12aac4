"""Classical outlier detectors used as comparison points: KNN and PCA.

Both return scores where higher means more outlying.  Search and fitting are
exhaustive/dense on purpose; desk-scale datasets make indexes unnecessary.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, InvalidInputError
from .rng import Xorshift64Star

_POWER_ITER_SEED = 0x9CA  # fixed start vector stream for the eigen solver
_POWER_ITER_TOL = 1e-13
_POWER_ITER_MAX = 5000


@dataclass
class KnnDetector:
    k: int
    points: np.ndarray  # (n, d)


def knn_fit(data, k: int) -> KnnDetector:
    """Retain the training features; the detector is the data itself.

    Scoring a training point with k = 1 gives 0: the point is its own
    nearest neighbor (self-inclusion is the convention here).
    """
    features = np.asarray(data.features, dtype=float)
    if features.shape[0] == 0:
        raise InvalidInputError("empty training data")
    if not (1 <= k <= features.shape[0]):
        raise InvalidInputError(f"k={k} out of range for {features.shape[0]} points")
    return KnnDetector(k=k, points=features.copy())


def knn_score(det: KnnDetector, x) -> float:
    """Mean Euclidean distance to the k nearest training points."""
    x = np.asarray(x, dtype=float)
    if x.shape != (det.points.shape[1],):
        raise DimensionMismatchError(
            f"query dim {x.shape} does not match training dim {det.points.shape[1]}"
        )
    dists = np.linalg.norm(det.points - x, axis=1)
    nearest = np.partition(dists, det.k - 1)[: det.k]
    return float(np.mean(nearest))


def knn_score_many(det: KnnDetector, features) -> np.ndarray:
    return np.array([knn_score(det, row) for row in np.asarray(features, dtype=float)])


@dataclass
class PcaDetector:
    mean: np.ndarray
    components: np.ndarray  # (num_components, d), orthonormal rows
    num_components: int


def _top_eigenpairs(matrix: np.ndarray, max_pairs: int, total_variance: float,
                    variance_target: float | None):
    """Leading eigenpairs of a symmetric PSD matrix by power iteration.

    Iterated deflation: extract the dominant pair, subtract it, repeat.  New
    vectors are re-orthogonalized against earlier ones each step to stop
    drift.  Stops early when the eigenvalues are exhausted (near-zero) or,
    when ``variance_target`` is given, once the kept eigenvalues explain that
    fraction of ``total_variance``.
    """
    rng = Xorshift64Star(_POWER_ITER_SEED)
    dim = matrix.shape[0]
    work = matrix.copy()
    floor = max(total_variance, 1.0) * 1e-12
    values: list[float] = []
    vectors: list[np.ndarray] = []
    explained = 0.0
    for _ in range(max_pairs):
        v = rng.unit_vector(dim)
        for _ in range(_POWER_ITER_MAX):
            w = work @ v
            for u in vectors:
                w -= (u @ w) * u
            norm = float(np.linalg.norm(w))
            if norm <= floor:
                break
            w /= norm
            if float(np.linalg.norm(w - v)) < _POWER_ITER_TOL:
                v = w
                break
            v = w
        lam = float(v @ (work @ v))
        if lam <= floor:
            break
        values.append(lam)
        vectors.append(v)
        work -= lam * np.outer(v, v)
        explained += lam
        if variance_target is not None and explained >= variance_target * total_variance:
            break
    return values, vectors


def pca_fit(data, num_components: int | None = None,
            variance_target: float = 0.9) -> PcaDetector:
    """Center the data and extract leading principal directions.

    With ``num_components`` None, keeps the smallest number of components
    explaining at least ``variance_target`` of the variance.  Requesting more
    components than the data's rank reduces to the rank with a warning.
    """
    features = np.asarray(data.features, dtype=float)
    n, dim = features.shape
    if n < 2:
        raise InvalidInputError("need at least 2 samples to fit")
    if num_components is not None and not (1 <= num_components <= dim):
        raise InvalidInputError(f"num_components={num_components} out of range for dim {dim}")
    mean = features.mean(axis=0)
    centered = features - mean
    cov = centered.T @ centered / (n - 1)
    total_variance = float(np.trace(cov))
    requested = num_components if num_components is not None else dim
    target = None if num_components is not None else variance_target
    values, vectors = _top_eigenpairs(cov, requested, total_variance, target)
    if num_components is not None and len(values) < num_components:
        warnings.warn(
            f"data rank {len(values)} is below the requested {num_components} components",
            stacklevel=2,
        )
    components = np.array(vectors) if vectors else np.zeros((0, dim))
    return PcaDetector(mean=mean, components=components, num_components=components.shape[0])


def pca_score(det: PcaDetector, x) -> float:
    """Reconstruction residual: distance from the centered point to its projection."""
    x = np.asarray(x, dtype=float)
    if x.shape != (det.mean.shape[0],):
        raise DimensionMismatchError(
            f"query dim {x.shape} does not match training dim {det.mean.shape[0]}"
        )
    centered = x - det.mean
    if det.num_components == 0:
        return float(np.linalg.norm(centered))
    projected = det.components.T @ (det.components @ centered)
    return float(np.linalg.norm(centered - projected))


def pca_score_many(det: PcaDetector, features) -> np.ndarray:
    return np.array([pca_score(det, row) for row in np.asarray(features, dtype=float)])
