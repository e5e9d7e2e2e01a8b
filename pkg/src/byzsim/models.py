"""Differentiable classifiers over a flat parameter vector.

Aggregation operates on flat gradient vectors, so both models expose the same
surface: init_params / loss / loss_and_grad / predict, with the parameters
packed into a single 1-D float64 array. Gradients are exact closed forms
(finite-difference checked in the test suite), loss is mean cross-entropy
computed through logsumexp for stability.
"""
from __future__ import annotations

import numpy as np


def _one_hot(labels: np.ndarray, n_classes: int) -> np.ndarray:
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


def _cross_entropy_and_probs(logits: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    log_probs = shifted - log_norm
    loss = float(-log_probs[np.arange(labels.size), labels].mean())
    return loss, np.exp(log_probs)


class SoftmaxRegression:
    """Multinomial logistic regression: logits = X W^T + b."""

    def __init__(self, n_features: int, n_classes: int):
        if n_features < 1 or n_classes < 2:
            raise ValueError("need n_features >= 1 and n_classes >= 2")
        self.n_features = n_features
        self.n_classes = n_classes

    @property
    def dim(self) -> int:
        return self.n_classes * self.n_features + self.n_classes

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        weights = rng.uniform(-0.05, 0.05, size=self.n_classes * self.n_features)
        return np.concatenate([weights, np.zeros(self.n_classes)])

    def unpack(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        split = self.n_classes * self.n_features
        weights = theta[:split].reshape(self.n_classes, self.n_features)
        return weights, theta[split:]

    def logits(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        weights, bias = self.unpack(theta)
        return features @ weights.T + bias

    def loss(self, theta: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
        self._check_batch(features, labels)
        loss, _ = _cross_entropy_and_probs(self.logits(theta, features), labels)
        return loss

    def loss_and_grad(self, theta: np.ndarray, features: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
        self._check_batch(features, labels)
        loss, probs = _cross_entropy_and_probs(self.logits(theta, features), labels)
        delta = (probs - _one_hot(labels, self.n_classes)) / labels.size
        grad_w = delta.T @ features
        grad_b = delta.sum(axis=0)
        return loss, np.concatenate([grad_w.ravel(), grad_b])

    def grad(self, theta: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
        return self.loss_and_grad(theta, features, labels)[1]

    def predict(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(theta, features), axis=1)

    def _check_batch(self, features: np.ndarray, labels: np.ndarray) -> None:
        if features.ndim != 2 or features.shape[1] != self.n_features:
            raise ValueError(f"expected features of width {self.n_features}, got shape {features.shape}")
        if labels.size == 0:
            raise ValueError("empty batch")


class OneHiddenLayerNet:
    """One rectifier hidden layer: logits = relu(X W1^T + b1) W2^T + b2."""

    def __init__(self, n_features: int, n_classes: int, hidden: int = 64):
        if n_features < 1 or n_classes < 2 or hidden < 1:
            raise ValueError("need n_features >= 1, n_classes >= 2, hidden >= 1")
        self.n_features = n_features
        self.n_classes = n_classes
        self.hidden = hidden

    @property
    def dim(self) -> int:
        return self.hidden * self.n_features + self.hidden + self.n_classes * self.hidden + self.n_classes

    def init_params(self, rng: np.random.Generator) -> np.ndarray:
        w1 = rng.uniform(-0.05, 0.05, size=self.hidden * self.n_features)
        w2 = rng.uniform(-0.05, 0.05, size=self.n_classes * self.hidden)
        return np.concatenate([w1, np.zeros(self.hidden), w2, np.zeros(self.n_classes)])

    def unpack(self, theta: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        h, f, c = self.hidden, self.n_features, self.n_classes
        offsets = np.cumsum([h * f, h, c * h])
        w1 = theta[: offsets[0]].reshape(h, f)
        b1 = theta[offsets[0] : offsets[1]]
        w2 = theta[offsets[1] : offsets[2]].reshape(c, h)
        b2 = theta[offsets[2] :]
        return w1, b1, w2, b2

    def preactivations(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        w1, b1, _, _ = self.unpack(theta)
        return features @ w1.T + b1

    def logits(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        _, _, w2, b2 = self.unpack(theta)
        hidden = np.maximum(self.preactivations(theta, features), 0.0)
        return hidden @ w2.T + b2

    def loss(self, theta: np.ndarray, features: np.ndarray, labels: np.ndarray) -> float:
        self._check_batch(features, labels)
        loss, _ = _cross_entropy_and_probs(self.logits(theta, features), labels)
        return loss

    def loss_and_grad(self, theta: np.ndarray, features: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
        self._check_batch(features, labels)
        w1, b1, w2, b2 = self.unpack(theta)
        pre = features @ w1.T + b1
        hidden = np.maximum(pre, 0.0)
        logits = hidden @ w2.T + b2
        loss, probs = _cross_entropy_and_probs(logits, labels)
        delta = (probs - _one_hot(labels, self.n_classes)) / labels.size
        grad_w2 = delta.T @ hidden
        grad_b2 = delta.sum(axis=0)
        back = (delta @ w2) * (pre > 0.0)
        grad_w1 = back.T @ features
        grad_b1 = back.sum(axis=0)
        return loss, np.concatenate([grad_w1.ravel(), grad_b1, grad_w2.ravel(), grad_b2])

    def grad(self, theta: np.ndarray, features: np.ndarray, labels: np.ndarray) -> np.ndarray:
        return self.loss_and_grad(theta, features, labels)[1]

    def predict(self, theta: np.ndarray, features: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(theta, features), axis=1)

    def _check_batch(self, features: np.ndarray, labels: np.ndarray) -> None:
        if features.ndim != 2 or features.shape[1] != self.n_features:
            raise ValueError(f"expected features of width {self.n_features}, got shape {features.shape}")
        if labels.size == 0:
            raise ValueError("empty batch")


MODEL_NAMES = ("softmax", "mlp")


def make_model(name: str, n_features: int, n_classes: int, hidden: int = 64):
    if name == "softmax":
        return SoftmaxRegression(n_features, n_classes)
    if name == "mlp":
        return OneHiddenLayerNet(n_features, n_classes, hidden)
    raise ValueError(f"unknown model {name!r} (expected one of {MODEL_NAMES})")
