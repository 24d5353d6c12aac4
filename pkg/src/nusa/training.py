"""Mini-batch Adam training of the combined classification + score objective.

Per sample the objective is

    cross_entropy(probs, label)  +  sign * lam * aggregate(layer scores)

with sign -1 in ``maximize_inlier_score`` mode and +1 in
``minimize_inlier_score`` mode (see scoring).  Gradients are exact: the
direct dependence of every selected layer's score on its weights AND the
dependence of deeper layer scores on earlier weights (through the layer
inputs) are both propagated.

The per-batch score path solves the normal equations (w wT) v = w x instead
of factorizing, so it assumes full row rank; freshly initialized and trained
dense layers satisfy that in practice.  Samples whose score or norm is
degenerate contribute zero gradient (chosen subgradient).
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, NumericError
from .network import (
    LOG_EPSILON,
    Network,
    activate,
    activation_derivative,
    adam_step,
    init_adam,
    network_parameters,
    softmax,
)
from .rng import Xorshift64Star, derive_seed
from .scoring import NusaConfig, resolve_layer_selection


@dataclass
class TrainConfig:
    batch_size: int = 25
    learning_rate: float = 0.01
    epochs: int = 200
    lam: float = 0.1
    nusa_sign: str = "maximize_inlier_score"
    rng_seed: int = 0
    nusa_layers: tuple[int, ...] | None = None  # None: every narrowing layer
    aggregation: str = "mean"
    # Plateau stop: end early when the best epoch loss has not improved by
    # more than early_stop_tol (relative) for early_stop_patience epochs.
    # patience 0 disables.
    early_stop_patience: int = 0
    early_stop_tol: float = 1e-4

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidInputError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise InvalidInputError("learning_rate must be positive")
        if self.lam < 0:
            raise InvalidInputError("lam must be >= 0")
        if self.epochs < 1:
            raise InvalidInputError("epochs must be >= 1")

    def nusa_config(self) -> NusaConfig:
        return NusaConfig(
            lam=self.lam,
            sign=self.nusa_sign,
            layer_selector=self.nusa_layers,
            aggregation=self.aggregation,
        )


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float
    mean_nusa: float


def _forward_batch(net: Network, x: np.ndarray):
    """Batched forward pass; returns (layer inputs, post-activations, probs)."""
    inputs, posts = [], []
    a = x
    for layer in net.layers:
        inputs.append(a)
        z = a @ layer.weights.T
        if layer.bias is not None:
            z = z + layer.bias
        if not np.all(np.isfinite(z)):
            raise NumericError("non-finite pre-activation in forward pass")
        a = activate(z, layer.activation)
        posts.append(a)
    return inputs, posts, softmax(a)


def _layer_scores_batch(w: np.ndarray, a: np.ndarray, norm_epsilon: float):
    """Scores of every row of ``a`` against ``w``, plus gradient ingredients.

    Returns (r, v, px, n2) with r the clipped scores, v the normal-equation
    solutions (one column per sample), px the projected rows (columns), and
    n2 the squared row norms.  Degenerate rows get score 0.
    """
    gram = w @ w.T
    try:
        v = np.linalg.solve(gram, w @ a.T)
    except np.linalg.LinAlgError as exc:
        raise NumericError("rank-deficient layer weights in score term") from exc
    px = w.T @ v
    s = np.maximum(np.einsum("nd,dn->n", a, px), 0.0)
    n2 = np.einsum("nd,nd->n", a, a)
    valid = n2 > norm_epsilon**2
    r = np.zeros_like(n2)
    np.divide(s, n2, out=r, where=valid)
    r = np.minimum(np.sqrt(r), 1.0)
    return r, v, px, n2


def objective_batch(net: Network, x: np.ndarray, labels: np.ndarray, ncfg: NusaConfig,
                    compute_grads: bool = True):
    """Mean combined objective over a batch, with optional exact gradients.

    Returns (value, grads or None, n_correct, sum of per-sample aggregates).
    Gradients come back as a flat list aligned with network_parameters(net).
    """
    n = x.shape[0]
    selected = resolve_layer_selection(net, ncfg)
    if ncfg.lam > 0 and not selected:
        raise InvalidInputError("no layers selected for the score term")
    inputs, posts, probs = _forward_batch(net, x)

    rows = np.arange(n)
    p_label = probs[rows, labels]
    ce = -np.log(p_label + LOG_EPSILON)

    weight = 1.0 / len(selected) if (selected and ncfg.aggregation == "mean") else 1.0
    sign = -1.0 if ncfg.sign == "maximize_inlier_score" else 1.0
    layer_data = {}
    agg = np.zeros(n)
    for l in selected:
        r, v, px, n2 = _layer_scores_batch(net.layers[l].weights, inputs[l], ncfg.norm_epsilon)
        layer_data[l] = (r, v, px, n2)
        agg += weight * r

    value = float(np.mean(ce + sign * ncfg.lam * agg))
    n_correct = int(np.sum(np.argmax(probs, axis=1) == labels))
    agg_sum = float(np.sum(agg))
    if not compute_grads:
        return value, None, n_correct, agg_sum

    # Backward pass. g_post is d(value)/d(post-activation of current layer).
    scale = (p_label / (p_label + LOG_EPSILON)) / n
    g_post = probs * scale[:, None]
    g_post[rows, labels] -= scale
    per_layer: list[tuple[np.ndarray, np.ndarray | None]] = []
    coef_base = sign * ncfg.lam * weight / n
    for l in reversed(range(len(net.layers))):
        layer = net.layers[l]
        delta = g_post * activation_derivative(posts[l], layer.activation)
        grad_w = delta.T @ inputs[l]
        grad_b = delta.sum(axis=0) if layer.bias is not None else None
        g_post = delta @ layer.weights
        if ncfg.lam > 0 and l in layer_data:
            r, v, px, n2 = layer_data[l]
            live = r > ncfg.grad_epsilon
            coef = np.where(live, coef_base / np.where(live, r, 1.0)
                            / (n2 + ncfg.norm_epsilon), 0.0)
            grad_w += (v * coef) @ (inputs[l] - px.T)
            g_post += coef[:, None] * (px.T - (r * r)[:, None] * inputs[l])
        per_layer.append((grad_w, grad_b))
        if not np.all(np.isfinite(grad_w)):
            raise NumericError("non-finite gradient")
    grads: list[np.ndarray] = []
    for grad_w, grad_b in reversed(per_layer):
        grads.append(grad_w)
        if grad_b is not None:
            grads.append(grad_b)
    return value, grads, n_correct, agg_sum


def objective_value(net: Network, x: np.ndarray, labels: np.ndarray, ncfg: NusaConfig) -> float:
    """Combined objective only; the finite-difference target in tests."""
    value, _, _, _ = objective_batch(net, x, labels, ncfg, compute_grads=False)
    return value


def train(net: Network, data, cfg: TrainConfig):
    """Mini-batch Adam on the combined objective; returns (net, history).

    Batches are drawn by seeded shuffling each epoch (remainder batch kept).
    History records per-epoch means of the objective, accuracy, and aggregate
    score, as seen during the epoch (before each batch's update).  With
    lam = 0 this is plain classifier training.
    """
    if data.size == 0:
        raise InvalidInputError("training data is empty")
    if data.dim != net.input_dim:
        raise InvalidInputError(
            f"data dim {data.dim} does not match network input_dim {net.input_dim}"
        )
    if int(data.labels.max()) >= net.num_classes:
        raise InvalidInputError("label out of range for the network's classes")
    ncfg = cfg.nusa_config()
    params = network_parameters(net)
    state = init_adam(params, cfg.learning_rate)
    rng = Xorshift64Star(derive_seed(cfg.rng_seed, 0x5F0))
    n = data.size
    history: list[EpochStats] = []
    best_loss = np.inf
    since_improved = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        correct = 0
        agg_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb = data.features[idx]
            yb = data.labels[idx]
            value, grads, n_correct, batch_agg = objective_batch(net, xb, yb, ncfg)
            if not np.isfinite(value):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch starting at {start}"
                )
            loss_sum += value * len(idx)
            correct += n_correct
            agg_sum += batch_agg
            adam_step(params, grads, state)
        epoch_loss = loss_sum / n
        history.append(EpochStats(epoch, epoch_loss, correct / n, agg_sum / n))
        if cfg.early_stop_patience > 0:
            if epoch_loss < best_loss - cfg.early_stop_tol * max(abs(best_loss), 1e-12):
                best_loss = epoch_loss
                since_improved = 0
            else:
                since_improved += 1
                if since_improved >= cfg.early_stop_patience:
                    break
        else:
            best_loss = min(best_loss, epoch_loss)
    return net, history
