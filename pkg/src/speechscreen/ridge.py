"""Ridge linear regression used as a binary classifier.

The squared-error objective with an L2 penalty,

    J(beta) = (y - X beta)^T (y - X beta) + lambda beta^T beta,

is solved either in closed form, beta = (X^T X + lambda I)^-1 X^T y, or by
gradient descent on grad J = -2 X^T (y - X beta) + 2 lambda beta. Data is
centered internally so the intercept is fitted unpenalized. Feature
importances are |beta_i|.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import TrainingError

__all__ = [
    "RidgeConfig",
    "RidgeModel",
    "ridge_objective",
    "ridge_gradient",
    "ridge_fit",
    "ridge_predict",
    "ridge_importance",
    "ridge_to_dict",
    "ridge_from_dict",
]


@dataclass(frozen=True)
class RidgeConfig:
    lam: float = 1.0
    learning_rate: float | None = None  # None -> 1 / (2 L), L = lambda_max(X^T X + lam I)
    max_iters: int = 100_000
    grad_tol: float = 1e-8
    solver: str = "closed_form"  # "closed_form" | "gradient"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lam must be >= 0, got {self.lam}")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.grad_tol <= 0:
            raise ValueError(f"grad_tol must be > 0, got {self.grad_tol}")
        if self.solver not in ("closed_form", "gradient"):
            raise ValueError(f"unknown solver {self.solver!r}")


@dataclass(frozen=True)
class RidgeModel:
    beta: np.ndarray
    intercept: float
    lam: float
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        beta = np.array(self.beta, dtype=np.float64, copy=True)
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        if self.feature_names is not None and len(self.feature_names) != beta.shape[0]:
            raise ValueError("feature_names length does not match beta length")


def ridge_objective(X: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float) -> float:
    r = y - X @ beta
    return float(r @ r + lam * (beta @ beta))


def ridge_gradient(X: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float) -> np.ndarray:
    return -2.0 * (X.T @ (y - X @ beta)) + 2.0 * lam * beta


def _top_eigenvalue(Xc: np.ndarray, lam: float) -> float:
    """Largest eigenvalue of (Xc^T Xc + lam I) by power iteration on matvecs
    through Xc (never forms the n x n Gram matrix)."""
    n = Xc.shape[1]
    v = np.ones(n) / np.sqrt(n)
    eig = 0.0
    for _ in range(300):
        w = Xc.T @ (Xc @ v) + lam * v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return lam if lam > 0 else 0.0
        v_new = w / norm
        eig_new = float(v_new @ (Xc.T @ (Xc @ v_new)) + lam * (v_new @ v_new))
        if abs(eig_new - eig) <= 1e-12 * max(1.0, abs(eig_new)):
            return eig_new
        eig, v = eig_new, v_new
    return eig


def _solve_closed_form(Xc: np.ndarray, yc: np.ndarray, lam: float) -> np.ndarray:
    n_rows, n_cols = Xc.shape
    try:
        if lam > 0 and n_cols > n_rows:
            # Dual route: beta = Xc^T (Xc Xc^T + lam I)^-1 yc, same solution,
            # O(N^3) instead of O(n^3) when features outnumber rows.
            K = Xc @ Xc.T
            K[np.diag_indices_from(K)] += lam
            return Xc.T @ scipy.linalg.solve(K, yc, assume_a="pos")
        A = Xc.T @ Xc
        A[np.diag_indices_from(A)] += lam
        if lam == 0.0 and np.linalg.matrix_rank(A) < n_cols:
            raise TrainingError("singular system: X^T X is rank-deficient and lam = 0")
        return scipy.linalg.solve(A, Xc.T @ yc, assume_a="pos")
    except scipy.linalg.LinAlgError as exc:
        raise TrainingError(
            f"singular system: X^T X + lam I is not positive definite (lam={lam})"
        ) from exc


def ridge_fit(X: np.ndarray, y_pm: np.ndarray, cfg: RidgeConfig,
              feature_names: tuple[str, ...] | None = None) -> RidgeModel:
    """Fit on centered data; the intercept absorbs the means and is unpenalized.

    Labels are expected as -1 (control) / +1 (AD) when used for
    classification, but any finite response vector is accepted.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y_pm, dtype=np.float64)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise TrainingError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if X.shape[0] < 2:
        raise TrainingError("ridge_fit requires at least 2 rows")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise TrainingError("non-finite values in training inputs")

    x_mean = X.mean(axis=0)
    y_mean = float(y.mean())
    Xc = X - x_mean
    yc = y - y_mean

    if cfg.solver == "closed_form":
        beta = _solve_closed_form(Xc, yc, cfg.lam)
    else:
        eta = cfg.learning_rate
        if eta is None:
            L = _top_eigenvalue(Xc, cfg.lam)
            if L <= 0.0:
                L = 1.0
            eta = 1.0 / (2.0 * L)
        beta = np.zeros(X.shape[1])
        for _ in range(cfg.max_iters):
            g = ridge_gradient(Xc, yc, beta, cfg.lam)
            if np.linalg.norm(g) <= cfg.grad_tol:
                break
            beta = beta - eta * g
        if not np.isfinite(beta).all():
            raise TrainingError("gradient solver diverged; lower the learning rate")

    intercept = y_mean - float(x_mean @ beta)
    return RidgeModel(beta=beta, intercept=intercept, lam=cfg.lam, feature_names=feature_names)


def ridge_predict(model: RidgeModel, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Scores X beta + intercept and hard labels sign(score), with 0 -> +1 (AD)."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.beta.shape[0]:
        raise TrainingError(
            f"ridge_predict: {X.shape[-1]} columns vs {model.beta.shape[0]} coefficients"
        )
    scores = X @ model.beta + model.intercept
    labels = np.where(scores >= 0.0, 1, -1)
    return scores, labels


def ridge_importance(model: RidgeModel) -> np.ndarray:
    """|beta_i| per feature, in catalog order."""
    return np.abs(model.beta)


def ridge_to_dict(model: RidgeModel) -> dict:
    return {
        "lambda": model.lam,
        "beta": [float(v) for v in model.beta],
        "intercept": model.intercept,
        "feature_names": list(model.feature_names) if model.feature_names else None,
    }


def ridge_from_dict(payload: dict) -> RidgeModel:
    names = payload.get("feature_names")
    return RidgeModel(
        beta=np.array(payload["beta"], dtype=np.float64),
        intercept=float(payload["intercept"]),
        lam=float(payload["lambda"]),
        feature_names=tuple(names) if names else None,
    )
