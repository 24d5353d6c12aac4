"""Fully-connected feedforward classifiers with manual gradients and Adam.

A network is an ordered list of dense layers (affine map, then an elementwise
activation).  The final softmax is treated as part of the loss, not as a
layer, so layer indices always refer to the dense layers only.  Forward
passes can record a trace (the input seen by every layer) which downstream
scoring consumes.
"""

import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataError,
    DimensionMismatchError,
    InvalidInputError,
    NumericError,
)
from .rng import Xorshift64Star, derive_seed

ACTIVATIONS = ("sigmoid", "identity")
LOG_EPSILON = 1e-12
LOGIT_CLAMP = 500.0  # |t| bound before exponentiation
MODEL_FORMAT_VERSION = 1


def activate(z: np.ndarray, kind: str) -> np.ndarray:
    """Apply an activation elementwise (branch-stable sigmoid, or identity)."""
    if kind == "identity":
        return z
    if kind == "sigmoid":
        z = np.clip(z, -LOGIT_CLAMP, LOGIT_CLAMP)
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    raise InvalidInputError(f"unknown activation {kind!r}")


def activation_derivative(post: np.ndarray, kind: str) -> np.ndarray:
    """Derivative of the activation, expressed through its output value."""
    if kind == "identity":
        return np.ones_like(post)
    if kind == "sigmoid":
        return post * (1.0 - post)
    raise InvalidInputError(f"unknown activation {kind!r}")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    np.clip(z, -LOGIT_CLAMP, None, out=z)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray | None = None
    activation: str = "sigmoid"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 2:
            raise InvalidInputError("layer weights must be a 2-D matrix")
        if not np.all(np.isfinite(self.weights)):
            raise InvalidInputError("layer weights contain non-finite entries")
        if self.bias is not None:
            self.bias = np.asarray(self.bias, dtype=float)
            if self.bias.shape != (self.weights.shape[0],):
                raise DimensionMismatchError(
                    f"bias shape {self.bias.shape} does not match out_dim {self.weights.shape[0]}"
                )
            if not np.all(np.isfinite(self.bias)):
                raise InvalidInputError("layer bias contains non-finite entries")
        if self.activation not in ACTIVATIONS:
            raise InvalidInputError(f"unknown activation {self.activation!r}")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]


@dataclass
class Network:
    layers: list[DenseLayer]
    input_dim: int
    num_classes: int

    def __post_init__(self):
        if not self.layers:
            raise InvalidInputError("network needs at least one layer")
        if self.layers[0].in_dim != self.input_dim:
            raise DimensionMismatchError(
                f"first layer expects dim {self.layers[0].in_dim}, input_dim is {self.input_dim}"
            )
        for a, b in zip(self.layers, self.layers[1:]):
            if a.out_dim != b.in_dim:
                raise DimensionMismatchError(
                    f"layer chain broken: out_dim {a.out_dim} feeds in_dim {b.in_dim}"
                )
        if self.layers[-1].out_dim != self.num_classes:
            raise DimensionMismatchError(
                f"last layer out_dim {self.layers[-1].out_dim} != num_classes {self.num_classes}"
            )


@dataclass
class ForwardTrace:
    """Per-layer record of one forward pass.

    ``layer_inputs[l]`` is the vector presented to layer ``l`` (the network
    input for l = 0), ``pre_activations[l]`` the affine output before the
    activation, and ``output`` the softmax class probabilities.
    """

    layer_inputs: list[np.ndarray]
    pre_activations: list[np.ndarray]
    output: np.ndarray


def forward_with_trace(net: Network, x) -> ForwardTrace:
    """Run one sample through the network and record every layer input."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != net.input_dim:
        raise DimensionMismatchError(
            f"input dim {x.shape} does not match network input_dim {net.input_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("input contains non-finite entries")
    inputs, preacts = [], []
    a = x
    for layer in net.layers:
        inputs.append(a)
        z = layer.weights @ a
        if layer.bias is not None:
            z = z + layer.bias
        if not np.all(np.isfinite(z)):
            raise NumericError("non-finite pre-activation in forward pass")
        preacts.append(z)
        a = activate(z, layer.activation)
    return ForwardTrace(inputs, preacts, softmax(a))


def cross_entropy_loss(probs, label: int) -> float:
    """Negative log likelihood of the labeled class: -log(p[label] + 1e-12)."""
    probs = np.asarray(probs, dtype=float)
    if not (0 <= label < probs.shape[0]):
        raise InvalidInputError(f"label {label} out of range for {probs.shape[0]} classes")
    return float(-np.log(probs[label] + LOG_EPSILON))


def predict(net: Network, x):
    """Return (argmax class, probability vector); ties break to the lowest index."""
    trace = forward_with_trace(net, x)
    return int(np.argmax(trace.output)), trace.output


def backward(net: Network, trace: ForwardTrace, label: int) -> list[np.ndarray]:
    """Exact gradients of ``cross_entropy_loss`` for one sample.

    Returns a flat list of arrays aligned with ``network_parameters(net)``.
    """
    probs = trace.output
    if not (0 <= label < net.num_classes):
        raise InvalidInputError(f"label {label} out of range")
    if len(trace.layer_inputs) != len(net.layers):
        raise DimensionMismatchError("trace does not match network depth")
    # d(-log(p_y + eps))/d(logits) = c * (p - onehot), c = p_y / (p_y + eps)
    scale = probs[label] / (probs[label] + LOG_EPSILON)
    g_post = scale * probs.copy()
    g_post[label] -= scale
    grads: list[np.ndarray] = []
    per_layer: list[tuple[np.ndarray, np.ndarray | None]] = []
    for l in reversed(range(len(net.layers))):
        layer = net.layers[l]
        post = activate(trace.pre_activations[l], layer.activation)
        delta = g_post * activation_derivative(post, layer.activation)
        grad_w = np.outer(delta, trace.layer_inputs[l])
        grad_b = delta.copy() if layer.bias is not None else None
        per_layer.append((grad_w, grad_b))
        g_post = layer.weights.T @ delta
    for grad_w, grad_b in reversed(per_layer):
        grads.append(grad_w)
        if grad_b is not None:
            grads.append(grad_b)
    return grads


def network_parameters(net: Network) -> list[np.ndarray]:
    """Live references to all parameter arrays, in layer order (weights, then bias)."""
    params: list[np.ndarray] = []
    for layer in net.layers:
        params.append(layer.weights)
        if layer.bias is not None:
            params.append(layer.bias)
    return params


@dataclass
class AdamState:
    first_moment: list[np.ndarray]
    second_moment: list[np.ndarray]
    step_count: int
    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def init_adam(params: list[np.ndarray], learning_rate: float, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> AdamState:
    if learning_rate <= 0:
        raise InvalidInputError("learning_rate must be positive")
    return AdamState(
        first_moment=[np.zeros_like(p) for p in params],
        second_moment=[np.zeros_like(p) for p in params],
        step_count=0,
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
    )


def adam_step(params: list[np.ndarray], grads: list[np.ndarray], state: AdamState) -> None:
    """Bias-corrected Adam update, applied to the parameter arrays in place."""
    if len(params) != len(grads) or len(params) != len(state.first_moment):
        raise DimensionMismatchError("parameter/gradient/state lengths differ")
    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise DimensionMismatchError(
                f"gradient shape {g.shape} does not match parameter shape {p.shape}"
            )
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)


def build_network(input_dim: int, hidden_dims: list[int], num_classes: int, seed: int,
                  activation: str = "sigmoid", bias: bool = True) -> Network:
    """Construct a network with Gaussian init, scale 1/sqrt(in_dim), zero biases.

    Hidden layers use ``activation``; the output layer is identity (its
    logits feed the softmax inside the loss).
    """
    rng = Xorshift64Star(derive_seed(seed, 0xA11))
    dims = [input_dim] + list(hidden_dims) + [num_classes]
    layers = []
    for i, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
        w = rng.normals(d_out * d_in).reshape(d_out, d_in) / np.sqrt(d_in)
        b = np.zeros(d_out) if bias else None
        kind = activation if i < len(dims) - 2 else "identity"
        layers.append(DenseLayer(w, b, kind))
    return Network(layers, input_dim, num_classes)


def save_model(net: Network, path: str) -> None:
    """Write the model as versioned JSON (atomic: temp file, then rename)."""
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "input_dim": net.input_dim,
        "num_classes": net.num_classes,
        "layers": [
            {
                "rows": layer.out_dim,
                "cols": layer.in_dim,
                "weights": layer.weights.tolist(),
                "bias": None if layer.bias is None else layer.bias.tolist(),
                "activation": layer.activation,
            }
            for layer in net.layers
        ],
    }
    text = json.dumps(doc, indent=2)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_model(path: str) -> Network:
    """Read a model written by ``save_model``; schema problems raise DataError."""
    try:
        with open(path) as handle:
            doc = json.load(handle)
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model format")
    try:
        layers = []
        for i, spec in enumerate(doc["layers"]):
            w = np.asarray(spec["weights"], dtype=float)
            if w.shape != (spec["rows"], spec["cols"]):
                raise DataError(f"{path}: layer {i} weight shape mismatch")
            b = spec["bias"]
            layers.append(DenseLayer(w, None if b is None else np.asarray(b, dtype=float),
                                     spec["activation"]))
        return Network(layers, int(doc["input_dim"]), int(doc["num_classes"]))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"{path}: malformed model document ({exc})") from exc
