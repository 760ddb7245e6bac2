"""Multinomial logistic regression trained by single-sample local SGD.

The parameter vector stacks the ``(C, d_f)`` weight matrix row by row and
then the ``C`` biases, so ``d = C * d_f + C``.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .transport import OFFLINE_THRESHOLD


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    n_classes: int = 10

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features must be (n, d_f) with one label per row")
        if self.labels.size == 0:
            raise ValueError("empty dataset")
        if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
            raise ValueError("labels out of range")

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def model_dim(self) -> int:
        return self.n_classes * (self.n_features + 1)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.features[idx], self.labels[idx], self.n_classes)


@dataclass(frozen=True)
class ClientShard:
    data: Dataset
    alpha: float
    client_id: int


@dataclass
class LocalRunReport:
    tau_used: int
    delta: np.ndarray
    max_grad_norm: float
    start_model: np.ndarray


def unpack(w, n_classes, n_features):
    w = np.asarray(w)
    cut = n_classes * n_features
    return w[:cut].reshape(n_classes, n_features), w[cut:]


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def loss_and_grad(w, features, labels, n_classes):
    """Mean cross-entropy of the batch and its gradient with respect to ``w``."""
    X = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.atleast_1d(labels)
    n = X.shape[0]
    W, b = unpack(w, n_classes, X.shape[1])
    logits = X @ W.T + b
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(n), y]))
    err = _softmax(logits)
    err[np.arange(n), y] -= 1.0
    err /= n
    grad = np.concatenate([(err.T @ X).ravel(), err.sum(axis=0)])
    return loss, grad


def sample_grad_norms(w, data: Dataset) -> np.ndarray:
    """Per-sample gradient norms ``||p - e_y|| * sqrt(||x||^2 + 1)``."""
    W, b = unpack(w, data.n_classes, data.n_features)
    err = _softmax(data.features @ W.T + b)
    err[np.arange(len(data)), data.labels] -= 1.0
    return np.linalg.norm(err, axis=1) * np.sqrt(np.sum(data.features**2, axis=1) + 1.0)


def evaluate(w, data: Dataset):
    """Return ``(accuracy, mean loss)``; argmax ties go to the lowest class index."""
    W, b = unpack(w, data.n_classes, data.n_features)
    logits = data.features @ W.T + b
    acc = float(np.mean(np.argmax(logits, axis=1) == data.labels))
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_norm - shifted[np.arange(len(data)), data.labels]))
    return acc, loss


def local_sgd(w_start, shard: ClientShard, eta: float, tau: int, rng) -> LocalRunReport:
    """``tau`` single-sample SGD steps; samples drawn uniformly with replacement."""
    if tau < 1:
        raise ValueError("tau must be >= 1")
    data = shard.data
    if len(data) == 0:
        raise ValueError(f"client {shard.client_id} has no data")
    C, d_f = data.n_classes, data.n_features
    w = np.array(w_start, dtype=float)
    W, b = unpack(w, C, d_f)  # views into w
    picks = rng.integers(0, len(data), size=tau)
    max_norm = 0.0
    for j in picks:
        x = data.features[j]
        p = _softmax(W @ x + b)
        p[data.labels[j]] -= 1.0
        max_norm = max(max_norm, float(np.linalg.norm(p) * np.sqrt(x @ x + 1.0)))
        W -= eta * np.outer(p, x)
        b -= eta * p
    return LocalRunReport(int(tau), w - np.asarray(w_start, dtype=float), max_norm,
                          np.asarray(w_start))


def partition_one_class(data: Dataset, m: int):
    """Shard ``i`` gets every sample of the i-th smallest label present."""
    classes = np.unique(data.labels)
    if classes.size < m:
        raise ValueError(f"need {m} distinct classes, dataset has {classes.size}")
    idx = [np.flatnonzero(data.labels == c) for c in classes[:m]]
    total = sum(len(ix) for ix in idx)
    return [
        ClientShard(data.subset(ix), len(ix) / total, i) for i, ix in enumerate(idx)
    ]


def projected_power(h_eff_hat, beta_u, alpha, eta, G, tau, cancel_ratio):
    """Predicted ``|beta_i|^2 ||delta||^2`` with ``||delta|| ~ ratio * eta * tau * G``."""
    beta = beta_u * alpha / (tau * abs(h_eff_hat))
    return (beta * cancel_ratio * eta * tau * G) ** 2


@dataclass(frozen=True)
class TauChoice:
    tau: int
    feasible: bool


def choose_tau(h_eff_hat, beta_u, alpha, eta, G, power, tau_max, cancel_ratio=1.0) -> TauChoice:
    """Largest ``tau <= tau_max`` whose projected transmit power fits the budget."""
    if tau_max < 1:
        raise ValueError("tau_max must be >= 1")
    if abs(h_eff_hat) < OFFLINE_THRESHOLD:
        return TauChoice(1, False)
    for tau in range(int(tau_max), 0, -1):
        if projected_power(h_eff_hat, beta_u, alpha, eta, G, tau, cancel_ratio) <= power:
            return TauChoice(tau, True)
    return TauChoice(1, False)


class CancellationTracker:
    """Trailing mean of ``||delta|| / (eta tau G)`` per client, starting at 1."""

    def __init__(self, n_clients: int, window: int = 5):
        self._hist = [deque(maxlen=window) for _ in range(n_clients)]

    def ratio(self, i: int) -> float:
        h = self._hist[i]
        return float(np.mean(h)) if h else 1.0

    def update(self, i: int, delta_norm: float, eta: float, tau: int, G: float) -> None:
        if eta > 0 and G > 0:
            self._hist[i].append(delta_norm / (eta * tau * G))

    def state(self):
        return [list(h) for h in self._hist]


def estimate_G(shards, probes, rng, per_shard: int = 200, safety: float = 1.5) -> float:
    """Safety factor times the largest single-sample gradient norm over a calibration sweep."""
    probes = list(probes)
    if not probes:
        raise ValueError("need at least one probe model")
    best = 0.0
    for shard in shards:
        n = len(shard.data)
        idx = rng.choice(n, size=min(per_shard, n), replace=False)
        sample = shard.data.subset(np.sort(idx))
        for w in probes:
            best = max(best, float(sample_grad_norms(w, sample).max()))
    return safety * best


def calibration_probes(dim: int, rng, n_perturbed: int = 3, scale: float = 0.01):
    """The zero model plus ``n_perturbed`` Gaussian perturbations of it."""
    return [np.zeros(dim)] + [scale * rng.standard_normal(dim) for _ in range(n_perturbed)]
