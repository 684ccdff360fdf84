"""Single-hidden-layer perceptron on a flat parameter vector.

The whole network lives in one contiguous float64 vector so the federated
loop can treat model updates as plain dense vectors.  Layout:
``[W1 (n_in x n_hidden, row major) | b1 | W2 (n_hidden x n_out) | b2]``.
Hidden activation is ReLU (subgradient 0 at 0), output is softmax with the
cross-entropy loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MlpDims:
    n_in: int = 784
    n_hidden: int = 20
    n_out: int = 10

    @property
    def param_count(self) -> int:
        return (
            self.n_in * self.n_hidden
            + self.n_hidden
            + self.n_hidden * self.n_out
            + self.n_out
        )


def unpack(w: np.ndarray, dims: MlpDims):
    """Views into the flat vector; no copies, so gradients assemble in place."""
    i1 = dims.n_in * dims.n_hidden
    i2 = i1 + dims.n_hidden
    i3 = i2 + dims.n_hidden * dims.n_out
    w1 = w[:i1].reshape(dims.n_in, dims.n_hidden)
    b1 = w[i1:i2]
    w2 = w[i2:i3].reshape(dims.n_hidden, dims.n_out)
    b2 = w[i3:]
    return w1, b1, w2, b2


def init_params(dims: MlpDims, rng: np.random.Generator) -> np.ndarray:
    """Symmetric uniform fan-in initialization; biases start at zero."""
    w = np.zeros(dims.param_count)
    w1, _, w2, _ = unpack(w, dims)
    w1[:] = rng.uniform(-1.0, 1.0, w1.shape) / np.sqrt(dims.n_in)
    w2[:] = rng.uniform(-1.0, 1.0, w2.shape) / np.sqrt(dims.n_hidden)
    return w


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def forward_logits(w: np.ndarray, dims: MlpDims, x: np.ndarray) -> np.ndarray:
    w1, b1, w2, b2 = unpack(w, dims)
    hidden = np.maximum(x @ w1 + b1, 0.0)
    return hidden @ w2 + b2


def predict_proba(w: np.ndarray, dims: MlpDims, x: np.ndarray) -> np.ndarray:
    return np.exp(_log_softmax(forward_logits(w, dims, x)))


def loss_and_grad(
    w: np.ndarray, dims: MlpDims, x: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over the batch and its exact flat gradient."""
    batch = x.shape[0]
    w1, b1, w2, b2 = unpack(w, dims)
    pre_hidden = x @ w1 + b1
    hidden = np.maximum(pre_hidden, 0.0)
    log_p = _log_softmax(hidden @ w2 + b2)
    loss = -float(log_p[np.arange(batch), y].mean())

    d_logits = np.exp(log_p)
    d_logits[np.arange(batch), y] -= 1.0
    d_logits /= batch

    grad = np.empty_like(w)
    g1, gb1, g2, gb2 = unpack(grad, dims)
    g2[:] = hidden.T @ d_logits
    gb2[:] = d_logits.sum(axis=0)
    d_hidden = (d_logits @ w2.T) * (pre_hidden > 0.0)
    g1[:] = x.T @ d_hidden
    gb1[:] = d_hidden.sum(axis=0)
    return loss, grad


def evaluate(
    w: np.ndarray, dims: MlpDims, x: np.ndarray, y: np.ndarray, chunk: int = 4096
) -> tuple[float, float]:
    """(mean cross-entropy, accuracy) over a test set, evaluated in chunks."""
    total_loss = 0.0
    correct = 0
    for start in range(0, x.shape[0], chunk):
        xb = x[start : start + chunk]
        yb = y[start : start + chunk]
        log_p = _log_softmax(forward_logits(w, dims, xb))
        total_loss += -float(log_p[np.arange(xb.shape[0]), yb].sum())
        correct += int((log_p.argmax(axis=1) == yb).sum())
    n = x.shape[0]
    return total_loss / n, correct / n
