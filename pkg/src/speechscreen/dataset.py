"""Tabular acoustic feature data: loading, fusion, pruning, splitting, normalization.

A dataset is an immutable bundle of a subject list, an N x n feature matrix,
binary labels, and a feature catalog that owns column names and their source
feature set. All downstream modules consume these types and never re-derive
identifiers on their own.
"""

from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

__all__ = [
    "SourceSet",
    "Label",
    "FeatureCatalog",
    "LabeledDataset",
    "NormalizationParams",
    "CsvSchema",
    "PruneReport",
    "DEFAULT_SCHEMA",
    "dataset_fingerprint",
    "load_csv",
    "write_csv",
    "fuse",
    "prune",
    "fit_minmax",
    "fit_minmax_arrays",
    "apply_minmax",
    "apply_minmax_arrays",
]


class SourceSet(str, Enum):
    """Provenance of a feature column (which extractor feature set it came from)."""

    EGEMAPS = "eGeMAPS"
    EMOBASE = "EmoBase"
    COMPARE = "ComParE"
    OTHER = "other"


class Label(str, Enum):
    """Binary screening label. AD is the positive class throughout the package."""

    CONTROL = "control"
    AD = "ad"


def dataset_fingerprint(subject_ids: Iterable[str]) -> str:
    """SHA-256 over the sorted subject ids; identifies the set of rows a
    statistic was fitted on (order-insensitive)."""
    h = hashlib.sha256()
    for sid in sorted(subject_ids):
        h.update(sid.encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()


@dataclass(frozen=True)
class FeatureCatalog:
    """Ordered feature names plus their source sets; defines column order for
    every matrix in the pipeline. Names must be unique."""

    entries: tuple[tuple[str, SourceSet], ...]

    def __post_init__(self):
        names = [name for name, _ in self.entries]
        if len(set(names)) != len(names):
            seen = set()
            dup = next(n for n in names if n in seen or seen.add(n))
            raise DataError(f"duplicate feature name in catalog: {dup!r}")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def subset(self, indices: Sequence[int]) -> "FeatureCatalog":
        return FeatureCatalog(tuple(self.entries[i] for i in indices))


@dataclass(frozen=True)
class LabeledDataset:
    """Validated, immutable N x n feature table with subject ids and labels."""

    subjects: tuple[str, ...]
    X: np.ndarray
    y: tuple[Label, ...]
    catalog: FeatureCatalog
    split_tag: str | None = None  # "train" | "test" | None

    def __post_init__(self):
        X = np.array(self.X, dtype=np.float64, order="C", copy=True)
        if X.ndim != 2:
            raise DataError(f"feature matrix must be 2-D, got shape {X.shape}")
        if X.shape[0] != len(self.subjects) or X.shape[0] != len(self.y):
            raise DataError(
                f"row count mismatch: X has {X.shape[0]} rows, "
                f"{len(self.subjects)} subjects, {len(self.y)} labels"
            )
        if X.shape[1] != len(self.catalog):
            raise DataError(
                f"column count {X.shape[1]} does not match catalog length {len(self.catalog)}"
            )
        if not np.isfinite(X).all():
            raise DataError("feature matrix contains NaN/Inf values")
        if len(set(self.subjects)) != len(self.subjects):
            raise DataError("duplicate subject ids")
        if self.split_tag not in (None, "train", "test"):
            raise DataError(f"split_tag must be 'train', 'test' or None, got {self.split_tag!r}")
        X.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "subjects", tuple(self.subjects))
        object.__setattr__(self, "y", tuple(self.y))

    @property
    def n_subjects(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    @property
    def fingerprint(self) -> str:
        return dataset_fingerprint(self.subjects)

    def select_features(self, indices: Sequence[int]) -> "LabeledDataset":
        indices = list(indices)
        return LabeledDataset(
            subjects=self.subjects,
            X=self.X[:, indices],
            y=self.y,
            catalog=self.catalog.subset(indices),
            split_tag=self.split_tag,
        )

    def select_rows(self, indices: Sequence[int]) -> "LabeledDataset":
        indices = list(indices)
        return LabeledDataset(
            subjects=tuple(self.subjects[i] for i in indices),
            X=self.X[indices, :],
            y=tuple(self.y[i] for i in indices),
            catalog=self.catalog,
            split_tag=self.split_tag,
        )


@dataclass(frozen=True)
class NormalizationParams:
    """Per-feature min/max fitted on one set of rows, identified by fingerprint."""

    minimum: np.ndarray
    maximum: np.ndarray
    fitted_on: str

    def __post_init__(self):
        mn = np.asarray(self.minimum, dtype=np.float64)
        mx = np.asarray(self.maximum, dtype=np.float64)
        if mn.shape != mx.shape or mn.ndim != 1:
            raise DataError("normalization min/max must be 1-D vectors of equal length")
        if np.any(mn > mx):
            raise DataError("normalization params violate min <= max")
        mn.setflags(write=False)
        mx.setflags(write=False)
        object.__setattr__(self, "minimum", mn)
        object.__setattr__(self, "maximum", mx)

    def __len__(self) -> int:
        return self.minimum.shape[0]


@dataclass(frozen=True)
class CsvSchema:
    """Column-role mapping for ingestion: one id column, one label column,
    every other header is a numeric feature."""

    id_column: str
    label_column: str
    label_map: Mapping[str, Label]
    source_set: SourceSet = SourceSet.OTHER
    split_tag: str | None = None

    def label_to_text(self, label: Label) -> str:
        for text, lab in self.label_map.items():
            if lab is label:
                return text
        raise DataError(f"schema label_map has no text for label {label.value!r}")


DEFAULT_SCHEMA = CsvSchema(
    id_column="subject_id",
    label_column="label",
    label_map={"control": Label.CONTROL, "ad": Label.AD},
)


@dataclass(frozen=True)
class PruneReport:
    """What prune() removed and why. Reasons are 'low_variance' or
    'duplicate_of:<kept feature name>'."""

    dropped: tuple[tuple[str, str], ...]
    kept: int
    variance_floor: float

    @property
    def empty_result(self) -> bool:
        return self.kept == 0

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "variance_floor": self.variance_floor,
            "kept": self.kept,
            "empty_result": self.empty_result,
            "dropped": [{"feature": name, "reason": reason} for name, reason in self.dropped],
        }


def load_csv(path, schema: CsvSchema) -> LabeledDataset:
    """Parse a UTF-8, comma-separated feature export into a validated dataset.

    The header row defines feature order. Every malformed cell is reported
    with its file row number (header = row 1) and column name.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, missing header row") from None

        seen = set()
        for col in header:
            if col in seen:
                raise DataError(f"{path}: duplicate header name {col!r}")
            seen.add(col)
        for required in (schema.id_column, schema.label_column):
            if required not in header:
                raise DataError(f"{path}: missing required column {required!r}")

        id_pos = header.index(schema.id_column)
        label_pos = header.index(schema.label_column)
        feature_cols = [
            (pos, name)
            for pos, name in enumerate(header)
            if pos not in (id_pos, label_pos)
        ]

        subjects: list[str] = []
        labels: list[Label] = []
        rows: list[list[float]] = []
        seen_ids: set[str] = set()
        for line_no, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {line_no} has {len(row)} cells, expected {len(header)}"
                )
            sid = row[id_pos]
            if sid in seen_ids:
                raise DataError(f"{path}: row {line_no}: duplicate subject id {sid!r}")
            seen_ids.add(sid)

            label_text = row[label_pos]
            if label_text not in schema.label_map:
                raise DataError(
                    f"{path}: row {line_no}: unknown label {label_text!r} "
                    f"in column {schema.label_column!r}"
                )

            values = []
            for pos, name in feature_cols:
                cell = row[pos]
                try:
                    value = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {line_no}, column {name!r}: "
                        f"non-numeric feature cell {cell!r}"
                    ) from None
                if not math.isfinite(value):
                    raise DataError(
                        f"{path}: row {line_no}, column {name!r}: non-finite value {cell!r}"
                    )
                values.append(value)

            subjects.append(sid)
            labels.append(schema.label_map[label_text])
            rows.append(values)

    X = np.array(rows, dtype=np.float64).reshape(len(rows), len(feature_cols))
    catalog = FeatureCatalog(tuple((name, schema.source_set) for _, name in feature_cols))
    return LabeledDataset(
        subjects=tuple(subjects),
        X=X,
        y=tuple(labels),
        catalog=catalog,
        split_tag=schema.split_tag,
    )


def write_csv(ds: LabeledDataset, path, schema: CsvSchema = DEFAULT_SCHEMA) -> None:
    """Write the ingestion CSV format. Floats use shortest round-trip repr, so
    load_csv(write_csv(ds)) reproduces the matrix bit for bit."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([schema.id_column, schema.label_column, *ds.catalog.names])
        for i, sid in enumerate(ds.subjects):
            writer.writerow(
                [sid, schema.label_to_text(ds.y[i]), *[repr(float(v)) for v in ds.X[i]]]
            )


def fuse(sets: Sequence[LabeledDataset]) -> LabeledDataset:
    """Column-wise concatenation of feature sets over the same subjects.

    Inputs are aligned to the first set's subject order by id. Feature name
    collisions across inputs are disambiguated with a source-set suffix;
    value-level duplicates are left for prune() to remove.
    """
    if not sets:
        raise DataError("fuse requires at least one dataset")
    if len(sets) == 1:
        return sets[0]

    base = sets[0]
    base_ids = set(base.subjects)
    aligned: list[LabeledDataset] = [base]
    for k, ds in enumerate(sets[1:], start=1):
        ids = set(ds.subjects)
        if ids != base_ids:
            missing = sorted(base_ids - ids) + sorted(ids - base_ids)
            raise DataError(f"fuse: subject mismatch between set 0 and set {k}: {missing[:5]}")
        pos = {sid: i for i, sid in enumerate(ds.subjects)}
        order = [pos[sid] for sid in base.subjects]
        ds = ds.select_rows(order)
        for i, sid in enumerate(base.subjects):
            if ds.y[i] is not base.y[i]:
                raise DataError(f"fuse: label disagreement for subject {sid!r}")
        aligned.append(ds)

    name_counts: dict[str, int] = {}
    for ds in aligned:
        for name in ds.catalog.names:
            name_counts[name] = name_counts.get(name, 0) + 1

    entries: list[tuple[str, SourceSet]] = []
    used: set[str] = set()
    for ds in aligned:
        for name, source in ds.catalog.entries:
            new_name = name
            if name_counts[name] > 1:
                new_name = f"{name}__{source.value}"
            k = 2
            while new_name in used:
                new_name = f"{name}__{source.value}__{k}"
                k += 1
            used.add(new_name)
            entries.append((new_name, source))

    tags = {ds.split_tag for ds in aligned}
    return LabeledDataset(
        subjects=base.subjects,
        X=np.hstack([ds.X for ds in aligned]),
        y=base.y,
        catalog=FeatureCatalog(tuple(entries)),
        split_tag=tags.pop() if len(tags) == 1 else None,
    )


def prune(ds: LabeledDataset, variance_floor: float = 1e-12) -> tuple[LabeledDataset, PruneReport]:
    """Drop low-variance features, then exact-duplicate columns.

    Variance is the sample variance (ddof=1); duplicates are bitwise-equal
    value vectors among the columns that survive the variance pass, keeping
    the first occurrence in catalog order.
    """
    if ds.n_subjects < 2:
        raise DataError("prune requires at least 2 rows to estimate variance")

    names = ds.catalog.names
    variances = ds.X.var(axis=0, ddof=1)
    dropped: list[tuple[str, str]] = []
    survivors: list[int] = []
    for j in range(ds.n_features):
        if variances[j] < variance_floor:
            dropped.append((names[j], "low_variance"))
        else:
            survivors.append(j)

    kept: list[int] = []
    first_by_value: dict[bytes, str] = {}
    for j in survivors:
        key = ds.X[:, j].tobytes()
        if key in first_by_value:
            dropped.append((names[j], f"duplicate_of:{first_by_value[key]}"))
        else:
            first_by_value[key] = names[j]
            kept.append(j)

    report = PruneReport(dropped=tuple(dropped), kept=len(kept), variance_floor=variance_floor)
    return ds.select_features(kept), report


def fit_minmax_arrays(X: np.ndarray, subject_ids: Iterable[str]) -> NormalizationParams:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] < 1:
        raise DataError("fit_minmax requires at least one row")
    return NormalizationParams(
        minimum=X.min(axis=0),
        maximum=X.max(axis=0),
        fitted_on=dataset_fingerprint(subject_ids),
    )


def fit_minmax(ds: LabeledDataset) -> NormalizationParams:
    """Per-feature min and max over the dataset's rows, tagged with its fingerprint."""
    return fit_minmax_arrays(ds.X, ds.subjects)


def apply_minmax_arrays(X: np.ndarray, params: NormalizationParams) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != len(params):
        raise DataError(
            f"apply_minmax: {X.shape[-1]} columns vs {len(params)} normalization params"
        )
    span = params.maximum - params.minimum
    out = X - params.minimum
    # Constant features carry no information; map them to 0 to stay in [0,1].
    nonconst = span > 0
    out[..., nonconst] /= span[nonconst]
    out[..., ~nonconst] = 0.0
    return out


def apply_minmax(ds: LabeledDataset, params: NormalizationParams) -> LabeledDataset:
    """Rescale x' = (x - min) / (max - min). No clamping: values outside [0,1]
    are legitimate when the params were fitted on other rows."""
    return LabeledDataset(
        subjects=ds.subjects,
        X=apply_minmax_arrays(ds.X, params),
        y=ds.y,
        catalog=ds.catalog,
        split_tag=ds.split_tag,
    )
