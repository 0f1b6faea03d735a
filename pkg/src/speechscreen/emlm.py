"""Extreme Minimal Learning Machine: a distance-based classifier.

The hidden representation of a sample is its vector of Euclidean distances
to a set of reference points (here: every training sample). Output weights
W (classes x references) solve the regularized linear system

    W (H H^T + (alpha N / m) I) = Y H^T,

with H the reference-to-sample distance matrix, Y the 1-of-k class coding
and alpha = sqrt(machine epsilon) the only regularization constant.
Prediction is argmax of W h(x). Feature importances are mean absolute
sensitivities of the outputs with respect to the inputs, available in closed
form because the distance derivative is (x - r_i) / ||x - r_i||.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np
import scipy.linalg

from .errors import TrainingError

__all__ = [
    "EmlmModel",
    "DEFAULT_ALPHA",
    "distance_matrix",
    "emlm_fit",
    "emlm_predict",
    "emlm_predict_batch",
    "emlm_sensitivity",
    "emlm_importance",
    "emlm_to_dict",
    "emlm_from_dict",
]

_EPS = float(np.finfo(np.float64).eps)
DEFAULT_ALPHA = float(np.sqrt(np.finfo(np.float64).eps))


@dataclass(frozen=True)
class EmlmModel:
    references: np.ndarray          # m x n
    weights: np.ndarray             # k x m
    class_order: tuple[Hashable, ...]
    alpha: float

    def __post_init__(self):
        R = np.array(self.references, dtype=np.float64, copy=True)
        W = np.array(self.weights, dtype=np.float64, copy=True)
        if R.ndim != 2 or W.ndim != 2:
            raise TrainingError("references and weights must be 2-D")
        if W.shape != (len(self.class_order), R.shape[0]):
            raise TrainingError(
                f"weights shape {W.shape} inconsistent with "
                f"{len(self.class_order)} classes x {R.shape[0]} references"
            )
        if self.alpha <= 0:
            raise TrainingError(f"alpha must be > 0, got {self.alpha}")
        R.setflags(write=False)
        W.setflags(write=False)
        object.__setattr__(self, "references", R)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "class_order", tuple(self.class_order))

    @property
    def n_references(self) -> int:
        return self.references.shape[0]

    @property
    def n_features(self) -> int:
        return self.references.shape[1]


def distance_matrix(R: np.ndarray, X: np.ndarray) -> np.ndarray:
    """H[i, j] = ||R[i] - X[j]||_2, computed per column so each entry matches
    the naive two-loop evaluation bit for bit."""
    R = np.asarray(R, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if R.ndim != 2 or X.ndim != 2 or R.shape[1] != X.shape[1]:
        raise TrainingError(f"distance_matrix: incompatible shapes {R.shape} vs {X.shape}")
    H = np.empty((R.shape[0], X.shape[0]))
    for j in range(X.shape[0]):
        diff = R - X[j]
        H[:, j] = np.sqrt((diff * diff).sum(axis=1))
    return H


def emlm_fit(X: np.ndarray, y: Sequence[Hashable], alpha: float | None = None,
             class_order: Sequence[Hashable] | None = None) -> EmlmModel:
    """Fit the full model: every training row is a reference point (m = N)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != len(y):
        raise TrainingError(f"shape mismatch: X {X.shape}, {len(y)} labels")
    if X.shape[0] < 2:
        raise TrainingError("emlm_fit requires at least 2 rows")
    if not np.isfinite(X).all():
        raise TrainingError("non-finite values in training inputs")
    if alpha is None:
        alpha = DEFAULT_ALPHA

    if class_order is None:
        seen: list[Hashable] = []
        for label in y:
            if label not in seen:
                seen.append(label)
        class_order = tuple(seen)
    else:
        class_order = tuple(class_order)
        extra = set(y) - set(class_order)
        if extra:
            raise TrainingError(f"labels not in class_order: {sorted(map(str, extra))}")
    if len(set(y)) < 2:
        raise TrainingError("emlm_fit requires at least 2 classes present")

    n_samples = X.shape[0]
    index = {label: i for i, label in enumerate(class_order)}
    Y = np.zeros((len(class_order), n_samples))
    for j, label in enumerate(y):
        Y[index[label], j] = 1.0

    H = distance_matrix(X, X)  # m = N, symmetric, zero diagonal
    M = H @ H.T
    M[np.diag_indices_from(M)] += alpha  # the (alpha N / m) coefficient, with m = N
    try:
        cho = scipy.linalg.cho_factor(M, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise TrainingError("EMLM factorization failed: catastrophic conditioning") from exc
    W = scipy.linalg.cho_solve(cho, (Y @ H.T).T).T
    return EmlmModel(references=X, weights=W, class_order=class_order, alpha=alpha)


def _scores(model: EmlmModel, X: np.ndarray) -> np.ndarray:
    H_star = distance_matrix(model.references, X)
    return (model.weights @ H_star).T  # rows: samples, cols: classes


def emlm_predict(model: EmlmModel, x_star: np.ndarray) -> tuple[np.ndarray, Hashable]:
    """Scores W h(x*) and the argmax class; ties resolve to the earliest class
    in class_order."""
    x_star = np.asarray(x_star, dtype=np.float64)
    if x_star.ndim != 1 or x_star.shape[0] != model.n_features:
        raise TrainingError(
            f"emlm_predict: expected vector of length {model.n_features}, got {x_star.shape}"
        )
    scores = _scores(model, x_star[None, :])[0]
    return scores, model.class_order[int(np.argmax(scores))]


def emlm_predict_batch(model: EmlmModel, X: np.ndarray) -> tuple[np.ndarray, list]:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise TrainingError(f"emlm_predict_batch: bad shape {X.shape}")
    scores = _scores(model, X)
    labels = [model.class_order[i] for i in np.argmax(scores, axis=1)]
    return scores, labels


def emlm_sensitivity(model: EmlmModel, x: np.ndarray) -> np.ndarray:
    """Jacobian (k x n) of the class scores at x.

    Row i of the inner matrix is (x - r_i) / max(eps, ||x - r_i||); the eps
    guard zeroes the contribution when x coincides with a reference instead
    of producing NaN.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.n_features:
        raise TrainingError(f"emlm_sensitivity: bad shape {x.shape}")
    diff = x[None, :] - model.references
    norms = np.sqrt((diff * diff).sum(axis=1))
    E = diff / np.maximum(_EPS, norms)[:, None]
    return model.weights @ E


def emlm_importance(model: EmlmModel, X_train: np.ndarray) -> np.ndarray:
    """Mean absolute sensitivity per feature over the given samples and over
    the class outputs.

    The difference vectors are formed explicitly per sample: a sample that
    coincides with a reference (the usual case, since references come from
    the training set) then contributes an exact zero row instead of the
    catastrophic cancellation a factored evaluation would produce.
    """
    X = np.asarray(X_train, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise TrainingError(f"emlm_importance: bad shape {X.shape}")
    W = model.weights
    R = model.references

    total = np.zeros(model.n_features)
    for x in X:
        diff = x[None, :] - R
        norms = np.sqrt((diff * diff).sum(axis=1))
        E = diff / np.maximum(_EPS, norms)[:, None]
        total += np.abs(W @ E).mean(axis=0)
    return total / X.shape[0]


def emlm_to_dict(model: EmlmModel) -> dict:
    return {
        "alpha": model.alpha,
        "class_order": [getattr(c, "value", c) for c in model.class_order],
        "references": [[float(v) for v in row] for row in model.references],
        "W": [[float(v) for v in row] for row in model.weights],
    }


def emlm_from_dict(payload: dict, class_type=None) -> EmlmModel:
    classes = payload["class_order"]
    if class_type is not None:
        classes = [class_type(c) for c in classes]
    return EmlmModel(
        references=np.array(payload["references"], dtype=np.float64),
        weights=np.array(payload["W"], dtype=np.float64),
        class_order=tuple(classes),
        alpha=float(payload["alpha"]),
    )
