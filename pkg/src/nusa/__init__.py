"""Null-space analysis for dense classifiers.

A fully connected classifier only reacts to the part of an input that lies in
the row space of its weight matrices; everything in the null space is
invisible.  This package trains classifiers with a score term that rewards
training data for staying visible, then thresholds the per-sample score at
test time so that one model both classifies and flags outliers.
"""

from .baselines import KnnDetector, PcaDetector, knn_fit, knn_score, pca_fit, pca_score
from .data import (
    LabeledDataset,
    SplitSpec,
    enumerate_class_combinations,
    generate_gaussian_classes,
    load_csv,
    make_split_spec,
    save_csv,
    split_known_unknown,
)
from .metrics import Curve, auc, average_curves, histogram, invert_scores, normalize_scores, pr_curve, roc_curve
from .network import (
    AdamState,
    DenseLayer,
    ForwardTrace,
    Network,
    adam_step,
    backward,
    build_network,
    cross_entropy_loss,
    forward_with_trace,
    load_model,
    predict,
    save_model,
)
from .scoring import (
    NusaConfig,
    NusaReport,
    aggregate_score,
    aggregate_scores,
    calibrate_threshold,
    detect,
    detect_batch,
    layer_nusa_gradient,
    layer_nusa_score,
    network_nusa_term,
    nusa_objective,
    null_space_perturbation,
)
from .training import EpochStats, TrainConfig, train

__version__ = "0.1.0"
