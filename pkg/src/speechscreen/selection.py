"""Permutation-testing feature selection.

The protocol estimates, for every feature, a paired sample of importance
values under true labels and under permuted labels: each of `n_repeats`
(default 100) repeats draws a seeded 5-fold split; within every fold the
training portion is min-max normalized, the model is trained and its
importances recorded, then retrained on the same rows with permuted labels;
the five per-fold vectors are reduced to per-feature medians, one median per
side per repeat. Features are ranked by the mean of their true medians and
the ranked list is walked with a two-sided Wilcoxon signed-rank test between
the paired medians; the first feature that fails to reject the null at the
given significance level truncates the selected set.

Everything is a pure function of (dataset, model_id, master_seed): repeat
seeds derive from the master seed, repeats may run in worker processes, and
per-repeat math runs under a single BLAS thread so serial and parallel
executions produce bit-identical ledgers.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import multiprocessing
import numpy as np
from threadpoolctl import threadpool_limits

from .dataset import LabeledDataset, apply_minmax_arrays, fit_minmax_arrays
from .errors import ConfigError, TrainingError
from .models import feature_importance, predict_labels, train_model
from .stats import permute_labels, wilcoxon_signed_rank

__all__ = [
    "ImportanceLedger",
    "SelectionResult",
    "run_protocol",
    "feature_ranking",
    "rank_and_cut",
    "select_top_k",
    "ledger_to_dict",
    "ledger_from_dict",
    "ledger_write_csv",
    "selection_to_dict",
    "selection_from_dict",
]

logger = logging.getLogger(__name__)

DEFAULT_REPEATS = 100
DEFAULT_FOLDS = 5


@dataclass(frozen=True)
class ImportanceLedger:
    """Paired per-feature importance samples: one true median and one
    permuted-label median per repeat, plus the informational per-fold
    validation accuracies (computed but unused by selection)."""

    model_id: str
    feature_names: tuple[str, ...]
    true_medians: np.ndarray       # n_features x n_repeats
    perm_medians: np.ndarray       # n_features x n_repeats
    seeds: tuple[int, ...]         # one derived seed per repeat
    validation_accuracy: np.ndarray  # n_repeats x n_folds

    def __post_init__(self):
        tm = np.array(self.true_medians, dtype=np.float64, copy=True)
        pm = np.array(self.perm_medians, dtype=np.float64, copy=True)
        va = np.array(self.validation_accuracy, dtype=np.float64, copy=True)
        n = len(self.feature_names)
        if tm.shape != pm.shape or tm.shape[0] != n:
            raise ConfigError(
                f"ledger shape mismatch: true {tm.shape}, perm {pm.shape}, {n} features"
            )
        if tm.shape[1] != len(self.seeds) or va.shape[0] != len(self.seeds):
            raise ConfigError("ledger repeat count inconsistent with seeds")
        for arr in (tm, pm, va):
            arr.setflags(write=False)
        object.__setattr__(self, "true_medians", tm)
        object.__setattr__(self, "perm_medians", pm)
        object.__setattr__(self, "validation_accuracy", va)

    @property
    def n_features(self) -> int:
        return self.true_medians.shape[0]

    @property
    def n_repeats(self) -> int:
        return self.true_medians.shape[1]


@dataclass(frozen=True)
class SelectionResult:
    """Importance ranking with per-feature p-values (in ranked order) and the
    first-failure cutoff. selected == ranked_features[:cutoff_index]."""

    ranked_features: tuple[int, ...]
    p_values: tuple[float, ...]
    cutoff_index: int
    significance: float

    def __post_init__(self):
        if not 0 <= self.cutoff_index <= len(self.ranked_features):
            raise ConfigError(f"cutoff_index {self.cutoff_index} out of range")
        if len(self.p_values) != len(self.ranked_features):
            raise ConfigError("p_values must align with ranked_features")

    @property
    def selected(self) -> tuple[int, ...]:
        return self.ranked_features[: self.cutoff_index]


def _repeat_seed(master_seed: int, repeat: int) -> int:
    return int(np.random.SeedSequence([master_seed, repeat]).generate_state(1, np.uint64)[0])


def _fold_perm_seed(master_seed: int, repeat: int, fold: int) -> int:
    return int(
        np.random.SeedSequence([master_seed, repeat, 1 + fold]).generate_state(1, np.uint64)[0]
    )


def _run_repeat(X, y, subjects, model_id, hyperparam, master_seed, n_folds, repeat):
    """One protocol repeat: seeded split, per-fold train/permute/importance,
    per-feature medians over folds. BLAS is pinned to one thread so results
    do not depend on where (or next to what) the repeat executes."""
    with threadpool_limits(limits=1):
        n_samples, n_features = X.shape
        split_rng = np.random.default_rng(np.random.SeedSequence([master_seed, repeat, 0]))
        folds = np.array_split(split_rng.permutation(n_samples), n_folds)

        true_imps = np.empty((n_folds, n_features))
        perm_imps = np.empty((n_folds, n_features))
        val_accs = np.empty(n_folds)
        for f, val_idx in enumerate(folds):
            train_idx = np.concatenate([folds[g] for g in range(n_folds) if g != f])
            X_train_raw = X[train_idx]
            params = fit_minmax_arrays(X_train_raw, [subjects[i] for i in train_idx])
            X_train = apply_minmax_arrays(X_train_raw, params)
            y_train = [y[i] for i in train_idx]

            try:
                model = train_model(model_id, X_train, y_train, hyperparam)
                true_imps[f] = feature_importance(model, X_train)
                y_perm = permute_labels(y_train, _fold_perm_seed(master_seed, repeat, f))
                perm_model = train_model(model_id, X_train, y_perm, hyperparam)
                perm_imps[f] = feature_importance(perm_model, X_train)
            except TrainingError as exc:
                raise TrainingError(f"repeat {repeat}, fold {f}: {exc}") from exc

            X_val = apply_minmax_arrays(X[val_idx], params)
            preds = predict_labels(model, X_val)
            val_accs[f] = float(np.mean([p is y[i] for p, i in zip(preds, val_idx)]))

        return (
            np.median(true_imps, axis=0),
            np.median(perm_imps, axis=0),
            val_accs,
            _repeat_seed(master_seed, repeat),
        )


_WORKER_CTX = None


def _init_worker(X, y, subjects, model_id, hyperparam, master_seed, n_folds):
    global _WORKER_CTX
    _WORKER_CTX = (X, y, subjects, model_id, hyperparam, master_seed, n_folds)


def _run_repeat_worker(repeat: int):
    return _run_repeat(*_WORKER_CTX, repeat)


def run_protocol(train: LabeledDataset, model_id: str, master_seed: int, *,
                 n_repeats: int = DEFAULT_REPEATS, n_folds: int = DEFAULT_FOLDS,
                 hyperparam: float | None = None, n_jobs: int | None = None) -> ImportanceLedger:
    """Build the importance ledger for one model over `n_repeats` seeded
    repeats of `n_folds`-fold cross-validation.

    Repeats are independent; `n_jobs` > 1 runs them in worker processes with
    results identical to the serial path.
    """
    if train.n_subjects < n_folds:
        raise ConfigError(f"need at least {n_folds} subjects for {n_folds}-fold splits")
    if n_repeats < 1:
        raise ConfigError("n_repeats must be >= 1")
    args = (train.X, train.y, train.subjects, model_id, hyperparam, master_seed, n_folds)

    if n_jobs is not None and n_jobs > 1:
        ctx = multiprocessing.get_context("fork" if "fork" in
                                          multiprocessing.get_all_start_methods() else None)
        with ProcessPoolExecutor(max_workers=n_jobs, mp_context=ctx,
                                 initializer=_init_worker, initargs=args) as pool:
            results = list(pool.map(_run_repeat_worker, range(n_repeats),
                                    chunksize=max(1, n_repeats // (4 * n_jobs))))
    else:
        results = [_run_repeat(*args, r) for r in range(n_repeats)]

    n_features = train.n_features
    true_medians = np.empty((n_features, n_repeats))
    perm_medians = np.empty((n_features, n_repeats))
    val_acc = np.empty((n_repeats, n_folds))
    seeds = []
    for r, (true_med, perm_med, accs, seed) in enumerate(results):
        true_medians[:, r] = true_med
        perm_medians[:, r] = perm_med
        val_acc[r] = accs
        seeds.append(seed)
        logger.debug("repeat %d: mean fold validation accuracy %.3f", r, accs.mean())

    return ImportanceLedger(
        model_id=model_id,
        feature_names=train.catalog.names,
        true_medians=true_medians,
        perm_medians=perm_medians,
        seeds=tuple(seeds),
        validation_accuracy=val_acc,
    )


def feature_ranking(ledger: ImportanceLedger) -> np.ndarray:
    """Feature indices sorted by descending mean true importance; ties keep
    catalog order (stable sort)."""
    means = ledger.true_medians.mean(axis=1)
    return np.argsort(-means, kind="stable")


def rank_and_cut(ledger: ImportanceLedger, significance: float = 0.05) -> SelectionResult:
    """Walk the ranked list and cut at the first feature whose paired true-vs-
    permuted medians fail the Wilcoxon test at `significance` (strict first
    failure: later features are not revisited)."""
    if not 0.0 < significance < 1.0:
        raise ConfigError(f"significance must be in (0,1), got {significance}")
    order = feature_ranking(ledger)
    p_values = []
    for f in order:
        p_values.append(
            wilcoxon_signed_rank(ledger.true_medians[f], ledger.perm_medians[f]).p_value
        )
    cutoff = len(order)
    for rank, p in enumerate(p_values):
        if p >= significance:
            cutoff = rank
            break
    return SelectionResult(
        ranked_features=tuple(int(i) for i in order),
        p_values=tuple(p_values),
        cutoff_index=cutoff,
        significance=significance,
    )


def select_top_k(ledger: ImportanceLedger, k: int) -> tuple[int, ...]:
    """First k features of the importance ranking."""
    if not 1 <= k <= ledger.n_features:
        raise ConfigError(f"k must be in [1, {ledger.n_features}], got {k}")
    return tuple(int(i) for i in feature_ranking(ledger)[:k])


def ledger_to_dict(ledger: ImportanceLedger) -> dict:
    return {
        "schema_version": 1,
        "model_id": ledger.model_id,
        "feature_names": list(ledger.feature_names),
        "seeds": list(ledger.seeds),
        "true_medians": [[float(v) for v in row] for row in ledger.true_medians],
        "perm_medians": [[float(v) for v in row] for row in ledger.perm_medians],
        "validation_accuracy": [[float(v) for v in row] for row in ledger.validation_accuracy],
    }


def ledger_from_dict(payload: dict) -> ImportanceLedger:
    return ImportanceLedger(
        model_id=payload["model_id"],
        feature_names=tuple(payload["feature_names"]),
        true_medians=np.array(payload["true_medians"], dtype=np.float64),
        perm_medians=np.array(payload["perm_medians"], dtype=np.float64),
        seeds=tuple(int(s) for s in payload["seeds"]),
        validation_accuracy=np.array(payload["validation_accuracy"], dtype=np.float64),
    )


def ledger_write_csv(ledger: ImportanceLedger, path) -> None:
    """Long-format export: one row per (feature, repeat) pair."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "repeat", "true_median", "perm_median"])
        for f, name in enumerate(ledger.feature_names):
            for r in range(ledger.n_repeats):
                writer.writerow([
                    name, r,
                    repr(float(ledger.true_medians[f, r])),
                    repr(float(ledger.perm_medians[f, r])),
                ])


def selection_to_dict(result: SelectionResult, feature_names: tuple[str, ...] | None = None) -> dict:
    payload = {
        "schema_version": 1,
        "significance": result.significance,
        "cutoff_index": result.cutoff_index,
        "ranked_features": list(result.ranked_features),
        "p_values": [float(p) for p in result.p_values],
        "selected": list(result.selected),
    }
    if feature_names is not None:
        payload["ranked_names"] = [feature_names[i] for i in result.ranked_features]
    return payload


def selection_from_dict(payload: dict) -> SelectionResult:
    return SelectionResult(
        ranked_features=tuple(int(i) for i in payload["ranked_features"]),
        p_values=tuple(float(p) for p in payload["p_values"]),
        cutoff_index=int(payload["cutoff_index"]),
        significance=float(payload["significance"]),
    )
