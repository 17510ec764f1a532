"""Fully connected feed-forward Q-network with manual backprop.

The net maps a state vector to one Q-value per catalog action: ReLU on
hidden layers, identity on the output. Everything is float64 and the
batch dimension is handled by the caller as a plain loop, which keeps
the gradient code directly comparable with finite differences.
"""

from __future__ import annotations

import json

import numpy as np

from deepdial.text import Vocabulary

POLICY_MAGIC = "SIMPLEDS-POLICY/1"


class DimensionError(ValueError):
    pass


class TrainingFault(RuntimeError):
    """Non-finite numbers reached the optimiser."""


class PolicyFormatError(ValueError):
    """Malformed policy stream; carries the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class QNetwork:
    """Weights and biases of the value net.

    ``weights[l]`` has shape (fan_out, fan_in); ``biases[l]`` shape
    (fan_out,). A QNetwork is a value object: ``copy`` is deep and
    updates never alias across copies.
    """

    def __init__(self, layer_dims: list[int], rng: np.random.Generator | None = None):
        if len(layer_dims) != 4:
            raise DimensionError(f"expected 4 layer dims, got {layer_dims}")
        if any(d < 1 for d in layer_dims):
            raise DimensionError(f"layer dims must be positive: {layer_dims}")
        self.layer_dims = list(layer_dims)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        rng = rng or np.random.default_rng(0)
        for fan_in, fan_out in zip(layer_dims, layer_dims[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    def num_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self) -> "QNetwork":
        clone = object.__new__(QNetwork)
        clone.layer_dims = list(self.layer_dims)
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def equals(self, other: "QNetwork") -> bool:
        return (self.layer_dims == other.layer_dims
                and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
                and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases)))


def forward(net: QNetwork, s: np.ndarray) -> np.ndarray:
    """Q-values for every action, in catalog order."""
    x = np.asarray(s, dtype=np.float64)
    if x.shape != (net.input_dim,):
        raise DimensionError(
            f"state has shape {x.shape}, net expects ({net.input_dim},)")
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        x = w @ x + b
        np.maximum(x, 0.0, out=x)
    return net.weights[-1] @ x + net.biases[-1]


def _forward_trace(net: QNetwork, s: np.ndarray):
    """Forward pass keeping the post-activation of every layer."""
    activations = [np.asarray(s, dtype=np.float64)]
    x = activations[0]
    for w, b in zip(net.weights[:-1], net.biases[:-1]):
        x = np.maximum(w @ x + b, 0.0)
        activations.append(x)
    out = net.weights[-1] @ x + net.biases[-1]
    return out, activations


class Gradient:
    """Per-layer gradients with the same shapes as the net's parameters."""

    __slots__ = ("d_weights", "d_biases")

    def __init__(self, d_weights: list[np.ndarray], d_biases: list[np.ndarray]):
        self.d_weights = d_weights
        self.d_biases = d_biases

    @classmethod
    def zeros_like(cls, net: QNetwork) -> "Gradient":
        return cls([np.zeros_like(w) for w in net.weights],
                   [np.zeros_like(b) for b in net.biases])

    def add_(self, other: "Gradient") -> None:
        for mine, theirs in zip(self.d_weights, other.d_weights):
            mine += theirs
        for mine, theirs in zip(self.d_biases, other.d_biases):
            mine += theirs

    def scale_(self, factor: float) -> None:
        for w in self.d_weights:
            w *= factor
        for b in self.d_biases:
            b *= factor

    def is_finite(self) -> bool:
        return (all(np.isfinite(w).all() for w in self.d_weights)
                and all(np.isfinite(b).all() for b in self.d_biases))


def backward(net: QNetwork, s: np.ndarray, action_index: int,
             td_target: float) -> tuple[Gradient, float]:
    """Gradient of the squared TD error (Q(s,a) - target)^2 w.r.t. all parameters.

    Only the selected output unit receives error; returns (gradient,
    squared TD error). ``td_target`` must be finite.
    """
    if not 0 <= action_index < net.output_dim:
        raise IndexError(f"action index {action_index} outside [0, {net.output_dim})")
    if not np.isfinite(td_target):
        raise ValueError(f"td_target is not finite: {td_target}")
    q, activations = _forward_trace(net, s)
    residual = q[action_index] - td_target
    loss = residual * residual

    d_weights = [np.zeros_like(w) for w in net.weights]
    d_biases = [np.zeros_like(b) for b in net.biases]

    # Output layer: error flows only through the taken action's unit.
    delta_out = 2.0 * residual
    d_weights[-1][action_index] = delta_out * activations[-1]
    d_biases[-1][action_index] = delta_out
    delta = delta_out * net.weights[-1][action_index]

    for layer in range(len(net.weights) - 2, -1, -1):
        # ReLU derivative: active iff the post-activation is positive.
        delta = delta * (activations[layer + 1] > 0.0)
        d_weights[layer] = np.outer(delta, activations[layer])
        d_biases[layer] = delta
        if layer > 0:
            delta = net.weights[layer].T @ delta
    return Gradient(d_weights, d_biases), loss


def apply_sgd(net: QNetwork, gradient: Gradient, learning_rate: float) -> None:
    """One SGD step, in place: theta <- theta - lr * grad."""
    if learning_rate < 0:
        raise ValueError(f"learning rate must be >= 0, got {learning_rate}")
    if not gradient.is_finite():
        raise TrainingFault("non-finite gradient reached the optimiser")
    for w, dw in zip(net.weights, gradient.d_weights):
        w -= learning_rate * dw
    for b, db in zip(net.biases, gradient.d_biases):
        b -= learning_rate * db


def save_policy(net: QNetwork, vocab: Vocabulary, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_policy(net, vocab))


def serialize_policy(net: QNetwork, vocab: Vocabulary) -> str:
    """Self-describing text form: magic line, then one JSON document."""
    payload = {
        "layer_dims": net.layer_dims,
        "vocabulary": list(vocab.words),
        "layers": [
            {"weights": [list(row) for row in w], "biases": list(b)}
            for w, b in zip(net.weights, net.biases)
        ],
    }
    return POLICY_MAGIC + "\n" + json.dumps(payload) + "\n"


def load_policy(path: str) -> tuple[QNetwork, Vocabulary]:
    with open(path, "r", encoding="utf-8") as fh:
        return deserialize_policy(fh.read())


def deserialize_policy(stream: str) -> tuple[QNetwork, Vocabulary]:
    magic, sep, body = stream.partition("\n")
    if magic != POLICY_MAGIC or not sep:
        raise PolicyFormatError(f"bad magic, expected {POLICY_MAGIC!r}", offset=0)
    base = len(magic) + 1
    try:
        payload = json.loads(body)
    except json.JSONDecodeError as exc:
        raise PolicyFormatError(f"invalid policy body: {exc.msg}",
                                offset=base + exc.pos) from exc
    try:
        layer_dims = [int(d) for d in payload["layer_dims"]]
        vocab = Vocabulary(tuple(payload["vocabulary"]))
        layers = payload["layers"]
        weights = [np.array(layer["weights"], dtype=np.float64) for layer in layers]
        biases = [np.array(layer["biases"], dtype=np.float64) for layer in layers]
    except (KeyError, TypeError, ValueError) as exc:
        raise PolicyFormatError(f"invalid policy payload: {exc}", offset=base) from exc
    if len(weights) != len(layer_dims) - 1:
        raise PolicyFormatError(
            f"expected {len(layer_dims) - 1} layers, found {len(weights)}", offset=base)
    net = object.__new__(QNetwork)
    net.layer_dims = layer_dims
    net.weights = weights
    net.biases = biases
    for i, (w, b) in enumerate(zip(weights, biases)):
        expected = (layer_dims[i + 1], layer_dims[i])
        if w.shape != expected or b.shape != (layer_dims[i + 1],):
            raise PolicyFormatError(
                f"layer {i} has shape {w.shape}, expected {expected}", offset=base)
    return net, vocab
