"""Small dense classifier on a flat parameter vector, with hand-rolled backprop.

Hidden layers use tanh, the output layer is affine, and the loss is mean
softmax cross-entropy.  Keeping every weight and bias in one flat vector is
what lets the whole model be treated as a single point of the rank-one
geometry during training.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolationError

__all__ = [
    "MlpModel",
    "param_count",
    "init_mlp",
    "mlp_forward",
    "mlp_loss",
    "mlp_backward",
    "accuracy",
]


def param_count(layer_sizes) -> int:
    return sum(
        fan_in * fan_out + fan_out
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:])
    )


@dataclass
class MlpModel:
    layer_sizes: tuple[int, ...]
    theta: np.ndarray

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2 or any(s < 1 for s in self.layer_sizes):
            raise ContractViolationError("need at least input and output layers")
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (param_count(self.layer_sizes),):
            raise ContractViolationError(
                f"theta length {self.theta.shape} != ({param_count(self.layer_sizes)},)"
            )
        if not np.all(np.isfinite(self.theta)):
            raise ContractViolationError("parameters must be finite")

    def unpack(self):
        """Views (no copies) of theta as per-layer (W, b) pairs."""
        layers = []
        offset = 0
        for fan_in, fan_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            w = self.theta[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            b = self.theta[offset : offset + fan_out]
            offset += fan_out
            layers.append((w, b))
        return layers


def init_mlp(layer_sizes, rng: np.random.Generator, scale: float = 0.1) -> MlpModel:
    theta = scale * rng.standard_normal(param_count(layer_sizes))
    return MlpModel(tuple(layer_sizes), theta)


def _forward_pass(model: MlpModel, batch: np.ndarray):
    """Returns (activations per layer, logits); activations[0] is the input."""
    a = np.asarray(batch, dtype=float)
    if a.ndim != 2 or a.shape[1] != model.layer_sizes[0]:
        raise ContractViolationError(
            f"batch shape {a.shape} incompatible with input size {model.layer_sizes[0]}"
        )
    activations = [a]
    layers = model.unpack()
    for w, b in layers[:-1]:
        a = np.tanh(a @ w + b)
        activations.append(a)
    w, b = layers[-1]
    logits = a @ w + b
    return activations, logits


def mlp_forward(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Class logits for a batch of rows."""
    return _forward_pass(model, batch)[1]


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _check_labels(model, batch, labels):
    labels = np.asarray(labels)
    if labels.shape != (np.shape(batch)[0],):
        raise ContractViolationError("one integer label per batch row required")
    if labels.min() < 0 or labels.max() >= model.layer_sizes[-1]:
        raise ContractViolationError("label out of range")
    return labels


def mlp_loss(model: MlpModel, batch: np.ndarray, labels: np.ndarray) -> float:
    """Mean softmax cross-entropy."""
    _, logits = _forward_pass(model, batch)
    labels = _check_labels(model, batch, labels)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    return float(-np.mean(log_probs[np.arange(len(labels)), labels]))


def mlp_backward(model: MlpModel, batch: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Gradient of the mean cross-entropy loss as a flat vector."""
    activations, logits = _forward_pass(model, batch)
    labels = _check_labels(model, batch, labels)
    m = len(labels)
    delta = _softmax(logits)
    delta[np.arange(m), labels] -= 1.0
    delta /= m

    layers = model.unpack()
    grads = [None] * len(layers)
    for li in range(len(layers) - 1, -1, -1):
        w, _ = layers[li]
        a_in = activations[li]
        grads[li] = (a_in.T @ delta, delta.sum(axis=0))
        if li > 0:
            delta = (delta @ w.T) * (1.0 - activations[li] ** 2)

    flat = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])
    return flat


def accuracy(model: MlpModel, batch: np.ndarray, labels: np.ndarray) -> float:
    logits = mlp_forward(model, batch)
    return float(np.mean(np.argmax(logits, axis=1) == np.asarray(labels)))
