"""Uniform train / predict / importance surface over the three classifiers.

Label encoding is kept out of the dataset types and localized here:
control -> -1 and AD -> +1 for the margin-based models, 1-of-k in a fixed
(control, AD) class order for the distance-based model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import emlm, ridge, svm
from .dataset import Label
from .errors import ConfigError

__all__ = [
    "MODEL_IDS",
    "TrainedModel",
    "hyperparam_name",
    "train_model",
    "predict_labels",
    "feature_importance",
    "model_to_dict",
]

MODEL_IDS = ("ridge", "emlm", "svm")


@dataclass(frozen=True)
class TrainedModel:
    model_id: str
    inner: object
    hyperparam: float | None


def hyperparam_name(model_id: str) -> str | None:
    """Name of the searched regularization parameter; None when the model has none."""
    _check_id(model_id)
    return {"ridge": "lambda", "svm": "C", "emlm": None}[model_id]


def _check_id(model_id: str) -> None:
    if model_id not in MODEL_IDS:
        raise ConfigError(f"unknown model_id {model_id!r}; expected one of {MODEL_IDS}")


def _encode_pm1(y) -> np.ndarray:
    return np.array([1.0 if label is Label.AD else -1.0 for label in y])


def _decode_pm1(values) -> list[Label]:
    return [Label.AD if v > 0 else Label.CONTROL for v in values]


def train_model(model_id: str, X: np.ndarray, y, hyperparam: float | None = None,
                feature_names: tuple[str, ...] | None = None) -> TrainedModel:
    """Train the requested classifier on Label-typed targets.

    `hyperparam` is lambda for ridge and C for svm; a None falls back to 1.0
    (the midpoint of the search grid). EMLM takes no hyperparameter.
    """
    _check_id(model_id)
    if model_id == "ridge":
        value = 1.0 if hyperparam is None else float(hyperparam)
        cfg = ridge.RidgeConfig(lam=value, solver="closed_form")
        inner = ridge.ridge_fit(X, _encode_pm1(y), cfg, feature_names=feature_names)
        return TrainedModel("ridge", inner, value)
    if model_id == "svm":
        value = 1.0 if hyperparam is None else float(hyperparam)
        inner = svm.svm_fit(X, _encode_pm1(y), svm.SvmConfig(C=value))
        return TrainedModel("svm", inner, value)
    class_order = tuple(label for label in (Label.CONTROL, Label.AD) if label in set(y))
    inner = emlm.emlm_fit(X, list(y), class_order=class_order)
    return TrainedModel("emlm", inner, None)


def predict_labels(model: TrainedModel, X: np.ndarray) -> list[Label]:
    if model.model_id == "ridge":
        _, labels = ridge.ridge_predict(model.inner, X)
        return _decode_pm1(labels)
    if model.model_id == "svm":
        return _decode_pm1(svm.svm_predict(model.inner, X))
    _, labels = emlm.emlm_predict_batch(model.inner, X)
    return list(labels)


def feature_importance(model: TrainedModel, X_train: np.ndarray | None = None) -> np.ndarray:
    """Per-feature importance vector. EMLM sensitivities are evaluated over
    X_train, which is therefore required for that model."""
    if model.model_id == "ridge":
        return ridge.ridge_importance(model.inner)
    if model.model_id == "svm":
        return svm.svm_importance(model.inner)
    if X_train is None:
        raise ConfigError("EMLM importances require the training matrix")
    return emlm.emlm_importance(model.inner, X_train)


def model_to_dict(model: TrainedModel) -> dict:
    if model.model_id == "ridge":
        payload = ridge.ridge_to_dict(model.inner)
    elif model.model_id == "svm":
        payload = svm.svm_to_dict(model.inner)
    else:
        payload = emlm.emlm_to_dict(model.inner)
    payload["model_id"] = model.model_id
    return payload
