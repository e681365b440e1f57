"""Classical baselines and the encoder-head classifier.

Three model families, one probability contract: every predict path returns
a length-K vector of probabilities summing to 1.

* Multinomial naive Bayes with add-alpha smoothing, feature weights treated
  as counts (works for binary BoW and for TF-IDF weights alike).
* One-vs-rest logistic regression trained by full-batch gradient descent on
  log-loss plus an L2 penalty; per-class sigmoid scores are normalized to
  sum to 1 (argmax is preserved).
* A one-hidden-layer MLP head (ReLU, softmax) over a frozen text-encoder
  backend, trained by seeded mini-batch gradient descent with a stepped
  learning-rate schedule (base 1e-4, x0.1 entering epochs 4 and 8).

Loss and gradient functions are exposed separately so they can be checked
against finite differences; the training loops call the same functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyTrainingSet
from .features import SparseVector

__all__ = [
    "LrConfig",
    "LrSchedule",
    "MlpHead",
    "NaiveBayesModel",
    "OvRLogisticModel",
    "init_mlp_head",
    "lr_loss",
    "lr_gradients",
    "lr_predict",
    "lr_predict_matrix",
    "lr_train",
    "mlp_forward",
    "mlp_gradients",
    "mlp_loss",
    "mlp_predict_matrix",
    "mlp_train",
    "nb_predict",
    "nb_predict_matrix",
    "nb_train",
]

DEFAULT_HIDDEN = 256
DEFAULT_BATCH_SIZE = 16
DEFAULT_EPOCHS = 12


class EncoderBackend(Protocol):
    """A frozen text encoder; see the backends module for implementations."""

    name: str
    dim: int
    max_tokens: int

    def embed(self, text: str) -> np.ndarray: ...

    def embed_batch(self, texts: Sequence[str]) -> np.ndarray: ...


def _as_dense_row(x: SparseVector | np.ndarray | Sequence[float], dim: int) -> np.ndarray:
    if isinstance(x, np.ndarray) or (x and not isinstance(x[0], tuple)):
        row = np.asarray(x, dtype=np.float64)
        if row.shape != (dim,):
            raise DimensionMismatch(dim, row.shape[0] if row.ndim == 1 else -1)
        return row
    row = np.zeros(dim, dtype=np.float64)
    for idx, weight in x:
        if not 0 <= idx < dim:
            raise DimensionMismatch(dim, idx, what="feature index")
        row[idx] = weight
    return row


def _design_matrix(
    examples: Sequence[tuple[SparseVector | np.ndarray, int]], n_classes: int, dim: int
) -> tuple[np.ndarray, np.ndarray]:
    if not examples:
        raise EmptyTrainingSet("no training examples")
    rows = np.zeros((len(examples), dim), dtype=np.float64)
    labels = np.zeros(len(examples), dtype=np.int64)
    for i, (x, y) in enumerate(examples):
        if not 0 <= y < n_classes:
            raise ValueError(f"label {y} out of range for {n_classes} classes")
        rows[i] = _as_dense_row(x, dim)
        labels[i] = y
    return rows, labels


# ---------------------------------------------------------------------------
# Naive Bayes


@dataclass(frozen=True)
class NaiveBayesModel:
    class_log_prior: np.ndarray  # (K,)
    feature_log_prob: np.ndarray  # (K, V)
    alpha: float

    @property
    def n_classes(self) -> int:
        return self.class_log_prior.shape[0]

    @property
    def dim(self) -> int:
        return self.feature_log_prob.shape[1]


def nb_train(
    examples: Sequence[tuple[SparseVector | np.ndarray, int]],
    n_classes: int,
    dim: int,
    alpha: float = 1.0,
) -> NaiveBayesModel:
    """Multinomial NB over feature weights as counts, add-alpha smoothed.

    Classes absent from the data get the same alpha smoothing, so priors
    never vanish and likelihood rows stay proper distributions.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    X, y = _design_matrix(examples, n_classes, dim)
    class_counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    prior = (class_counts + alpha) / (len(examples) + alpha * n_classes)
    weight_sums = np.zeros((n_classes, dim), dtype=np.float64)
    np.add.at(weight_sums, y, X)
    totals = weight_sums.sum(axis=1, keepdims=True)
    likelihood = (weight_sums + alpha) / (totals + alpha * dim)
    return NaiveBayesModel(
        class_log_prior=np.log(prior),
        feature_log_prob=np.log(likelihood),
        alpha=alpha,
    )


def nb_predict_matrix(model: NaiveBayesModel, X: np.ndarray) -> np.ndarray:
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise DimensionMismatch(model.dim, X.shape[-1] if X.ndim else -1)
    joint = X @ model.feature_log_prob.T + model.class_log_prior
    joint -= joint.max(axis=1, keepdims=True)
    probs = np.exp(joint)
    probs /= probs.sum(axis=1, keepdims=True)
    return probs


def nb_predict(model: NaiveBayesModel, x: SparseVector | np.ndarray) -> np.ndarray:
    """Posterior over classes, computed in log space then normalized."""
    row = _as_dense_row(x, model.dim)
    return nb_predict_matrix(model, row[None, :])[0]


# ---------------------------------------------------------------------------
# One-vs-rest logistic regression


@dataclass(frozen=True)
class LrConfig:
    lr: float = 0.5
    epochs: int = 200
    l2: float = 1e-4

    def __post_init__(self) -> None:
        if self.lr <= 0 or self.epochs < 0 or self.l2 < 0:
            raise ValueError(f"invalid logistic-regression config: {self}")


@dataclass(frozen=True)
class OvRLogisticModel:
    weights: np.ndarray  # (K, V)
    bias: np.ndarray  # (K,)
    config: LrConfig

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def lr_loss(
    weights: np.ndarray, bias: np.ndarray, X: np.ndarray, y_onehot: np.ndarray, l2: float
) -> float:
    """Sum over classes of mean binary log-loss, plus 0.5 * l2 * ||W||^2."""
    Z = X @ weights.T + bias
    # max(z,0) - z*y + log(1 + exp(-|z|)) is the overflow-safe form.
    ce = np.maximum(Z, 0.0) - Z * y_onehot + np.log1p(np.exp(-np.abs(Z)))
    return float(ce.mean(axis=0).sum() + 0.5 * l2 * np.sum(weights * weights))


def lr_gradients(
    weights: np.ndarray, bias: np.ndarray, X: np.ndarray, y_onehot: np.ndarray, l2: float
) -> tuple[np.ndarray, np.ndarray]:
    residual = _sigmoid(X @ weights.T + bias) - y_onehot
    grad_w = residual.T @ X / X.shape[0] + l2 * weights
    grad_b = residual.mean(axis=0)
    return grad_w, grad_b


def lr_train(
    examples: Sequence[tuple[SparseVector | np.ndarray, int]],
    n_classes: int,
    dim: int,
    config: LrConfig = LrConfig(),
) -> OvRLogisticModel:
    """K independent binary logistic regressions, full-batch, zero-init."""
    X, y = _design_matrix(examples, n_classes, dim)
    y_onehot = np.zeros((len(y), n_classes), dtype=np.float64)
    y_onehot[np.arange(len(y)), y] = 1.0
    weights = np.zeros((n_classes, dim), dtype=np.float64)
    bias = np.zeros(n_classes, dtype=np.float64)
    for _ in range(config.epochs):
        grad_w, grad_b = lr_gradients(weights, bias, X, y_onehot, config.l2)
        weights -= config.lr * grad_w
        bias -= config.lr * grad_b
    return OvRLogisticModel(weights=weights, bias=bias, config=config)


def lr_predict_matrix(model: OvRLogisticModel, X: np.ndarray) -> np.ndarray:
    if X.ndim != 2 or X.shape[1] != model.dim:
        raise DimensionMismatch(model.dim, X.shape[-1] if X.ndim else -1)
    scores = _sigmoid(X @ model.weights.T + model.bias)
    sums = scores.sum(axis=1, keepdims=True)
    uniform = np.full_like(scores, 1.0 / model.n_classes)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.where(sums > 0.0, scores / np.where(sums > 0.0, sums, 1.0), uniform)
    return probs


def lr_predict(model: OvRLogisticModel, x: SparseVector | np.ndarray) -> np.ndarray:
    """Sigmoid scores normalized to sum to 1; uniform when every score is 0."""
    row = _as_dense_row(x, model.dim)
    return lr_predict_matrix(model, row[None, :])[0]


# ---------------------------------------------------------------------------
# MLP head over a frozen encoder


@dataclass(frozen=True)
class MlpHead:
    w1: np.ndarray  # (hidden, d)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (K, hidden)
    b2: np.ndarray  # (K,)

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def hidden(self) -> int:
        return self.w1.shape[0]

    @property
    def n_classes(self) -> int:
        return self.w2.shape[0]


def init_mlp_head(
    input_dim: int, n_classes: int, hidden: int = DEFAULT_HIDDEN, seed: int = 0
) -> MlpHead:
    """Glorot-uniform weights, zero biases, fully determined by the seed."""
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / (input_dim + hidden))
    lim2 = np.sqrt(6.0 / (hidden + n_classes))
    return MlpHead(
        w1=rng.uniform(-lim1, lim1, size=(hidden, input_dim)),
        b1=np.zeros(hidden),
        w2=rng.uniform(-lim2, lim2, size=(n_classes, hidden)),
        b2=np.zeros(n_classes),
    )


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=-1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=-1, keepdims=True)


def mlp_predict_matrix(head: MlpHead, E: np.ndarray) -> np.ndarray:
    if E.ndim != 2 or E.shape[1] != head.input_dim:
        raise DimensionMismatch(head.input_dim, E.shape[-1] if E.ndim else -1)
    hidden = np.maximum(E @ head.w1.T + head.b1, 0.0)
    return _softmax(hidden @ head.w2.T + head.b2)


def mlp_forward(head: MlpHead, e: np.ndarray) -> np.ndarray:
    """softmax(W2 relu(W1 e + b1) + b2)."""
    e = np.asarray(e, dtype=np.float64)
    if e.shape != (head.input_dim,):
        raise DimensionMismatch(head.input_dim, e.shape[0] if e.ndim == 1 else -1)
    return mlp_predict_matrix(head, e[None, :])[0]


def mlp_loss(head: MlpHead, E: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy of the head on embedded examples."""
    probs = mlp_predict_matrix(head, E)
    picked = np.clip(probs[np.arange(len(y)), y], 1e-300, None)
    return float(-np.log(picked).mean())


def mlp_gradients(
    head: MlpHead, E: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Gradients of mean cross-entropy w.r.t. (w1, b1, w2, b2)."""
    n = E.shape[0]
    pre = E @ head.w1.T + head.b1
    hidden = np.maximum(pre, 0.0)
    probs = _softmax(hidden @ head.w2.T + head.b2)
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grad_w2 = delta.T @ hidden
    grad_b2 = delta.sum(axis=0)
    back = (delta @ head.w2) * (pre > 0.0)
    grad_w1 = back.T @ E
    grad_b1 = back.sum(axis=0)
    return grad_w1, grad_b1, grad_w2, grad_b2


@dataclass(frozen=True)
class LrSchedule:
    """Step schedule: multiply by ``decay`` on entering each boundary epoch."""

    base_lr: float = 1e-4
    decay: float = 0.1
    boundaries: tuple[int, ...] = (4, 8)

    def lr_at(self, epoch: int) -> float:
        steps = sum(1 for b in self.boundaries if epoch >= b)
        return self.base_lr * self.decay**steps


def mlp_train(
    head: MlpHead,
    backend: EncoderBackend,
    examples: Sequence[tuple[str, int]],
    schedule: LrSchedule = LrSchedule(),
    batch_size: int = DEFAULT_BATCH_SIZE,
    epochs: int = DEFAULT_EPOCHS,
    seed: int = 0,
) -> MlpHead:
    """Mini-batch gradient descent on the head; the backend stays frozen.

    Texts are embedded once up front (the encoder never sees gradients) and
    per-epoch shuffling comes from the seed alone, so identical inputs give
    identical trained heads.
    """
    if not examples:
        raise EmptyTrainingSet("no training examples")
    if backend.dim != head.input_dim:
        raise DimensionMismatch(head.input_dim, backend.dim)
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    E = backend.embed_batch([text for text, _ in examples])
    y = np.asarray([label for _, label in examples], dtype=np.int64)
    if y.min() < 0 or y.max() >= head.n_classes:
        raise ValueError(f"labels out of range for {head.n_classes} classes")

    current = MlpHead(
        w1=head.w1.copy(), b1=head.b1.copy(), w2=head.w2.copy(), b2=head.b2.copy()
    )
    rng = np.random.default_rng(seed)
    for epoch in range(epochs):
        lr = schedule.lr_at(epoch)
        order = rng.permutation(len(examples))
        for start in range(0, len(examples), batch_size):
            batch = order[start : start + batch_size]
            g_w1, g_b1, g_w2, g_b2 = mlp_gradients(current, E[batch], y[batch])
            current = MlpHead(
                w1=current.w1 - lr * g_w1,
                b1=current.b1 - lr * g_b1,
                w2=current.w2 - lr * g_w2,
                b2=current.b2 - lr * g_b2,
            )
    return current
