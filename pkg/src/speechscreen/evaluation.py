"""Evaluation harnesses: LOSO cross-validation, holdout, grid search, sweeps.

AD is the positive class for the confusion matrix and F1. Every fold fits
min-max normalization on its own training rows only and records the
fingerprint of those rows, so normalization leakage is checkable after the
fact from the report alone.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataset import (
    LabeledDataset,
    Label,
    apply_minmax_arrays,
    fit_minmax_arrays,
)
from .errors import ConfigError, DataError, TrainingError
from .models import hyperparam_name, predict_labels, train_model
from .selection import ImportanceLedger, select_top_k

__all__ = [
    "ConfusionMatrix",
    "FoldRecord",
    "EvalReport",
    "GridSearchResult",
    "SweepPoint",
    "SweepResult",
    "confusion_from_labels",
    "make_grid",
    "grid_search",
    "loso",
    "holdout_eval",
    "default_sweep_schedule",
    "sweep_feature_counts",
    "report_to_dict",
    "sweep_to_dict",
    "sweep_write_csv",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.tn, self.fn) < 0:
            raise DataError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def accuracy(self) -> float:
        return (self.tp + self.tn) / self.total

    @property
    def f1(self) -> float:
        """F1 with AD as the positive class; 0 when the class never appears."""
        denom = 2 * self.tp + self.fp + self.fn
        return 2 * self.tp / denom if denom else 0.0

    @property
    def f1_control(self) -> float:
        denom = 2 * self.tn + self.fn + self.fp
        return 2 * self.tn / denom if denom else 0.0

    @property
    def macro_f1(self) -> float:
        return 0.5 * (self.f1 + self.f1_control)


def confusion_from_labels(true: Sequence[Label], predicted: Sequence[Label]) -> ConfusionMatrix:
    if len(true) != len(predicted):
        raise DataError("true/predicted label vectors differ in length")
    tp = fp = tn = fn = 0
    for t, p in zip(true, predicted):
        if t is Label.AD:
            if p is Label.AD:
                tp += 1
            else:
                fn += 1
        else:
            if p is Label.AD:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


@dataclass(frozen=True)
class FoldRecord:
    held_out_ids: tuple[str, ...]
    predicted: tuple[Label, ...]
    true: tuple[Label, ...]
    norm_fingerprint: str


@dataclass(frozen=True)
class EvalReport:
    model_id: str
    confusion: ConfusionMatrix
    accuracy: float
    f1: float
    macro_f1: float
    per_fold: tuple[FoldRecord, ...]
    feature_subset: tuple[int, ...] | None
    hyperparam: float | None


def _build_report(model_id, folds, feature_subset, hyperparam) -> EvalReport:
    true = [label for fold in folds for label in fold.true]
    pred = [label for fold in folds for label in fold.predicted]
    confusion = confusion_from_labels(true, pred)
    return EvalReport(
        model_id=model_id,
        confusion=confusion,
        accuracy=confusion.accuracy,
        f1=confusion.f1,
        macro_f1=confusion.macro_f1,
        per_fold=tuple(folds),
        feature_subset=tuple(int(i) for i in feature_subset) if feature_subset is not None else None,
        hyperparam=hyperparam,
    )


def make_grid() -> tuple[float, ...]:
    """13 log-spaced regularization candidates from 1e-3 to 1e+3 inclusive
    (half-decade steps)."""
    return tuple(float(10.0 ** e) for e in np.linspace(-3.0, 3.0, 13))


def _stratified_folds(y: Sequence[Label], n_folds: int, seed: int) -> list[np.ndarray]:
    """Seeded stratified folds: class indices are shuffled, then dealt
    round-robin so every fold keeps the class balance."""
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(n_folds)]
    for label in (Label.CONTROL, Label.AD):
        idx = np.array([i for i, lab in enumerate(y) if lab is label], dtype=int)
        if idx.size < n_folds:
            raise DataError(
                f"stratification impossible: class {label.value!r} has {idx.size} subjects, "
                f"needs at least {n_folds}"
            )
        idx = idx[rng.permutation(idx.size)]
        for pos, i in enumerate(idx):
            folds[pos % n_folds].append(int(i))
    return [np.array(sorted(f), dtype=int) for f in folds]


@dataclass(frozen=True)
class GridSearchResult:
    grid: tuple[float, ...]
    cv_scores: tuple[float, ...]
    chosen: float

    def __post_init__(self):
        if self.chosen not in self.grid:
            raise ConfigError("chosen value must come from the grid")


def grid_search(train: LabeledDataset, model_id: str, seed: int,
                grid: Sequence[float] | None = None, n_folds: int = 5) -> GridSearchResult:
    """Pick the regularization value with the best mean stratified-CV accuracy;
    ties break toward stronger regularization (larger lambda, smaller C)."""
    param = hyperparam_name(model_id)
    if param is None:
        raise ConfigError(f"{model_id} has no searched hyperparameter")
    candidates = tuple(float(v) for v in (grid if grid is not None else make_grid()))

    folds = _stratified_folds(train.y, n_folds, seed)
    prepared = []
    for f, val_idx in enumerate(folds):
        train_idx = np.concatenate([folds[g] for g in range(n_folds) if g != f])
        params = fit_minmax_arrays(train.X[train_idx], [train.subjects[i] for i in train_idx])
        prepared.append((
            apply_minmax_arrays(train.X[train_idx], params),
            [train.y[i] for i in train_idx],
            apply_minmax_arrays(train.X[val_idx], params),
            [train.y[i] for i in val_idx],
        ))

    scores = []
    for value in candidates:
        accs = []
        for X_tr, y_tr, X_val, y_val in prepared:
            model = train_model(model_id, X_tr, y_tr, value)
            preds = predict_labels(model, X_val)
            accs.append(np.mean([p is t for p, t in zip(preds, y_val)]))
        scores.append(float(np.mean(accs)))

    best = max(scores)
    tied = [v for v, s in zip(candidates, scores) if s == best]
    chosen = max(tied) if param == "lambda" else min(tied)
    return GridSearchResult(grid=candidates, cv_scores=tuple(scores), chosen=chosen)


def loso(ds: LabeledDataset, model_id: str, feature_subset: Sequence[int] | None = None,
         hyperparam: float | None = None) -> EvalReport:
    """Leave-one-subject-out: N folds, each trained on the other N-1 rows with
    fold-local normalization, predicting the single held-out subject."""
    if ds.n_subjects < 2:
        raise DataError("loso requires at least 2 subjects")
    cols = list(feature_subset) if feature_subset is not None else None
    X = ds.X[:, cols] if cols is not None else ds.X

    folds = []
    for i in range(ds.n_subjects):
        train_rows = [j for j in range(ds.n_subjects) if j != i]
        params = fit_minmax_arrays(X[train_rows], [ds.subjects[j] for j in train_rows])
        X_train = apply_minmax_arrays(X[train_rows], params)
        y_train = [ds.y[j] for j in train_rows]
        try:
            model = train_model(model_id, X_train, y_train, hyperparam)
        except TrainingError as exc:
            raise TrainingError(f"LOSO fold {i} (held out {ds.subjects[i]!r}): {exc}") from exc
        pred = predict_labels(model, apply_minmax_arrays(X[i : i + 1], params))[0]
        folds.append(FoldRecord(
            held_out_ids=(ds.subjects[i],),
            predicted=(pred,),
            true=(ds.y[i],),
            norm_fingerprint=params.fitted_on,
        ))
    return _build_report(model_id, folds, feature_subset, hyperparam)


def holdout_eval(train: LabeledDataset, test: LabeledDataset, model_id: str,
                 feature_subset: Sequence[int] | None = None,
                 hyperparam: float | None = None) -> EvalReport:
    """Train on the full training set, apply its normalization coefficients to
    the test set, and report test metrics."""
    if train.catalog.entries != test.catalog.entries:
        raise DataError("holdout_eval: train and test catalogs differ")
    cols = list(feature_subset) if feature_subset is not None else None
    X_train = train.X[:, cols] if cols is not None else train.X
    X_test = test.X[:, cols] if cols is not None else test.X

    params = fit_minmax_arrays(X_train, train.subjects)
    model = train_model(model_id, apply_minmax_arrays(X_train, params), list(train.y), hyperparam)
    preds = predict_labels(model, apply_minmax_arrays(X_test, params))
    fold = FoldRecord(
        held_out_ids=tuple(test.subjects),
        predicted=tuple(preds),
        true=tuple(test.y),
        norm_fingerprint=params.fitted_on,
    )
    return _build_report(model_id, [fold], feature_subset, hyperparam)


def default_sweep_schedule(k_max: int, dense_until: int = 200, step: int = 25) -> tuple[int, ...]:
    """1..dense_until one by one, then every `step` features up to k_max
    (k_max itself always included)."""
    if k_max < 1:
        raise ConfigError("k_max must be >= 1")
    ks = list(range(1, min(dense_until, k_max) + 1))
    k = dense_until + step
    while k <= k_max:
        ks.append(k)
        k += step
    if ks[-1] != k_max:
        ks.append(k_max)
    return tuple(ks)


@dataclass(frozen=True)
class SweepPoint:
    k: int
    loso_accuracy: float
    holdout_accuracy: float | None
    hyperparam: float | None


@dataclass(frozen=True)
class SweepResult:
    model_id: str
    points: tuple[SweepPoint, ...]

    @property
    def best(self) -> SweepPoint:
        """Highest LOSO accuracy; ties go to the smallest feature count."""
        return max(self.points, key=lambda p: (p.loso_accuracy, -p.k))


def sweep_feature_counts(train: LabeledDataset, model_id: str, ledger: ImportanceLedger,
                         k_max: int, test: LabeledDataset | None = None,
                         schedule: Sequence[int] | None = None, seed: int = 0,
                         hyperparam: float | None = None, grid_per_k: bool = True,
                         grid: Sequence[float] | None = None) -> SweepResult:
    """Accuracy-versus-feature-count curve over the ledger's importance ranking.

    For each k the top-k features are evaluated with LOSO (and on the holdout
    set when given). Unless a fixed hyperparameter is supplied, the
    regularization is grid-searched per k; `grid_per_k=False` searches once
    on the k_max-feature subset and reuses the value.
    """
    if k_max > ledger.n_features:
        raise ConfigError(f"k_max {k_max} exceeds {ledger.n_features} ranked features")
    ks = tuple(schedule) if schedule is not None else default_sweep_schedule(k_max)
    if any(k < 1 or k > k_max for k in ks):
        raise ConfigError("schedule entries must lie in [1, k_max]")

    searched = hyperparam is None and hyperparam_name(model_id) is not None
    fixed_value = hyperparam
    if searched and not grid_per_k:
        subset = select_top_k(ledger, k_max)
        fixed_value = grid_search(train.select_features(subset), model_id, seed, grid).chosen
        searched = False

    points = []
    for k in ks:
        subset = select_top_k(ledger, k)
        ds_k = train.select_features(subset)
        value = grid_search(ds_k, model_id, seed, grid).chosen if searched else fixed_value
        loso_acc = loso(ds_k, model_id, None, value).accuracy
        holdout_acc = None
        if test is not None:
            holdout_acc = holdout_eval(ds_k, test.select_features(subset), model_id,
                                       None, value).accuracy
        points.append(SweepPoint(k=k, loso_accuracy=loso_acc,
                                 holdout_accuracy=holdout_acc, hyperparam=value))
        logger.debug("sweep k=%d: loso=%.4f holdout=%s", k, loso_acc,
                     f"{holdout_acc:.4f}" if holdout_acc is not None else "-")
    return SweepResult(model_id=model_id, points=tuple(points))


def report_to_dict(report: EvalReport) -> dict:
    return {
        "schema_version": 1,
        "model_id": report.model_id,
        "confusion": {
            "tp": report.confusion.tp,
            "fp": report.confusion.fp,
            "tn": report.confusion.tn,
            "fn": report.confusion.fn,
        },
        "accuracy": report.accuracy,
        "f1": report.f1,
        "macro_f1": report.macro_f1,
        "hyperparam": report.hyperparam,
        "feature_subset": list(report.feature_subset) if report.feature_subset is not None else None,
        "per_fold": [
            {
                "held_out_ids": list(fold.held_out_ids),
                "predicted": [label.value for label in fold.predicted],
                "true": [label.value for label in fold.true],
                "norm_fingerprint": fold.norm_fingerprint,
            }
            for fold in report.per_fold
        ],
    }


def sweep_to_dict(sweep: SweepResult) -> dict:
    best = sweep.best
    return {
        "schema_version": 1,
        "model_id": sweep.model_id,
        "best": {"k": best.k, "loso_accuracy": best.loso_accuracy},
        "points": [
            {
                "k": p.k,
                "loso_accuracy": p.loso_accuracy,
                "holdout_accuracy": p.holdout_accuracy,
                "hyperparam": p.hyperparam,
            }
            for p in sweep.points
        ],
    }


def sweep_write_csv(sweep: SweepResult, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "loso_acc", "holdout_acc"])
        for p in sweep.points:
            writer.writerow([
                p.k,
                repr(p.loso_accuracy),
                repr(p.holdout_accuracy) if p.holdout_accuracy is not None else "",
            ])
