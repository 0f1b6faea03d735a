"""Linear soft-margin SVM trained by full-batch subgradient descent.

Objective: 0.5 ||w||^2 + C sum_i max(0, 1 - y_i (w . x_i + b)). The
subgradient over the violating set S = {i : 1 - y_i (w . x_i + b) > 0} is
grad_w = w - C sum_{i in S} y_i x_i and grad_b = -C sum_{i in S} y_i.
Training is deterministic: it starts from zero, uses the decaying step
eta_t = eta0 / (1 + t), and returns the iterate with the lowest recorded
objective (the zero model included). Feature importances are |w_i|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import TrainingError

__all__ = [
    "SvmConfig",
    "SvmModel",
    "svm_objective",
    "svm_fit",
    "svm_predict",
    "svm_importance",
    "svm_to_dict",
    "svm_from_dict",
]

_DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    eta0: float | None = None       # None -> 1 / (C N)
    max_epochs: int = 500
    tol: float = 1e-8               # relative objective change per epoch
    seed: int = 0                   # reserved for shuffling variants; the full-batch path is seed-free

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError(f"C must be > 0, got {self.C}")
        if self.eta0 is not None and self.eta0 <= 0:
            raise ValueError(f"eta0 must be > 0, got {self.eta0}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.tol <= 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")


@dataclass(frozen=True)
class SvmModel:
    w: np.ndarray
    b: float
    C: float

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64, copy=True)
        if not (np.isfinite(w).all() and np.isfinite(self.b)):
            raise TrainingError("SvmModel requires finite parameters")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)


def svm_objective(w: np.ndarray, b: float, X: np.ndarray, y_pm: np.ndarray, C: float) -> float:
    w = np.asarray(w, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y_pm, dtype=np.float64)
    if X.shape[1] != w.shape[0] or X.shape[0] != y.shape[0]:
        raise TrainingError(f"svm_objective: shape mismatch X {X.shape}, w {w.shape}, y {y.shape}")
    margins = 1.0 - y * (X @ w + b)
    return float(0.5 * (w @ w) + C * np.maximum(0.0, margins).sum())


def svm_fit(X: np.ndarray, y_pm: np.ndarray, cfg: SvmConfig) -> SvmModel:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y_pm, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise TrainingError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if not set(np.unique(y)) <= {-1.0, 1.0}:
        raise TrainingError("labels must be encoded as -1/+1")
    if len(np.unique(y)) < 2:
        raise TrainingError("svm_fit requires both classes present")
    if not np.isfinite(X).all():
        raise TrainingError("non-finite values in training inputs")

    n_samples, n_features = X.shape
    # 1/(C N) bounds the first step; the cap keeps the regularizer term
    # stable (its gradient contribution w needs eta < 2) when C N < 1.
    eta0 = cfg.eta0 if cfg.eta0 is not None else min(1.0, 1.0 / (cfg.C * n_samples))

    w = np.zeros(n_features)
    b = 0.0
    prev_obj = svm_objective(w, b, X, y, cfg.C)  # == C * N at the zero model
    best_obj, best_w, best_b = prev_obj, w.copy(), b

    for t in range(cfg.max_epochs):
        margins = 1.0 - y * (X @ w + b)
        violating = margins > 0.0
        yv = y[violating]
        grad_w = w - cfg.C * (yv @ X[violating])
        grad_b = -cfg.C * yv.sum()
        eta = eta0 / (1.0 + t)
        w = w - eta * grad_w
        b = b - eta * grad_b

        obj = svm_objective(w, b, X, y, cfg.C)
        if not np.isfinite(obj) or obj > _DIVERGENCE_LIMIT:
            raise TrainingError(
                f"svm_fit diverged (objective {obj:.3e} after epoch {t}); use a smaller eta0"
            )
        if obj < best_obj:
            best_obj, best_w, best_b = obj, w.copy(), b
        if abs(prev_obj - obj) < cfg.tol * max(1.0, abs(prev_obj)):
            break
        prev_obj = obj

    return SvmModel(w=best_w, b=best_b, C=cfg.C)


def svm_predict(model: SvmModel, X: np.ndarray) -> np.ndarray:
    """sign(w . x + b) with 0 mapped to +1."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.w.shape[0]:
        raise TrainingError(f"svm_predict: {X.shape[-1]} columns vs {model.w.shape[0]} weights")
    scores = X @ model.w + model.b
    return np.where(scores >= 0.0, 1, -1)


def svm_importance(model: SvmModel) -> np.ndarray:
    """|w_i| per feature, in catalog order."""
    return np.abs(model.w)


def svm_to_dict(model: SvmModel) -> dict:
    return {"C": model.C, "w": [float(v) for v in model.w], "b": model.b}


def svm_from_dict(payload: dict) -> SvmModel:
    return SvmModel(
        w=np.array(payload["w"], dtype=np.float64),
        b=float(payload["b"]),
        C=float(payload["C"]),
    )
