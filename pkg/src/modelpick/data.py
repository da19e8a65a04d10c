"""Core data containers and CSV ingestion.

A prediction matrix holds the hard class predictions of m candidate models
on a pool of n examples.  Labels, when available, live in a separate vector
aligned by example id.  All downstream modules consume these two containers,
so every shape and range invariant is enforced here once.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError

CLASSES_COMMENT_PREFIX = "#classes="


@dataclass
class PredictionMatrix:
    """Hard predictions of m models on n pool examples.

    preds[i, j] is the class id model j assigns to example i.  Class ids are
    integers in [0, num_classes).  Model names are unique and keep the column
    order of the source file.
    """

    preds: np.ndarray
    num_classes: int
    model_names: list[str]
    example_ids: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.preds = np.asarray(self.preds)
        if self.preds.ndim != 2:
            raise DataError(f"prediction array must be 2-d, got shape {self.preds.shape}")
        if not np.issubdtype(self.preds.dtype, np.integer):
            raise DataError("predictions must be integers")
        self.preds = self.preds.astype(np.int64, copy=False)
        n, m = self.preds.shape
        if m < 2:
            raise DataError(f"m >= 2 required, got {m} model column(s)")
        if len(self.model_names) != m:
            raise DataError(f"{len(self.model_names)} model names for {m} columns")
        if len(set(self.model_names)) != m:
            dupes = sorted({nm for nm in self.model_names if self.model_names.count(nm) > 1})
            raise DataError(f"duplicate model names: {dupes}")
        if self.num_classes < 2:
            raise DataError(f"num_classes must be >= 2, got {self.num_classes}")
        if n > 0:
            lo = int(self.preds.min())
            hi = int(self.preds.max())
            if lo < 0 or hi >= self.num_classes:
                bad = np.argwhere((self.preds < 0) | (self.preds >= self.num_classes))[0]
                r, c = int(bad[0]), int(bad[1])
                raise DataError(
                    f"prediction {int(self.preds[r, c])} out of range [0, {self.num_classes})"
                    f" at row {r}, column {self.model_names[c]!r}"
                )
        if not self.example_ids:
            self.example_ids = [str(i) for i in range(n)]
        if len(self.example_ids) != n:
            raise DataError(f"{len(self.example_ids)} example ids for {n} rows")

    @property
    def n(self) -> int:
        return self.preds.shape[0]

    @property
    def m(self) -> int:
        return self.preds.shape[1]

    def subset(self, rows: np.ndarray) -> "PredictionMatrix":
        """Row-subset view used when sampling evaluation pools."""
        rows = np.asarray(rows)
        return PredictionMatrix(
            preds=self.preds[rows],
            num_classes=self.num_classes,
            model_names=list(self.model_names),
            example_ids=[self.example_ids[int(i)] for i in rows],
        )


@dataclass
class LabelVector:
    """Ground-truth class ids aligned with a PredictionMatrix by row."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 1:
            raise DataError(f"label array must be 1-d, got shape {self.labels.shape}")
        if not np.issubdtype(self.labels.dtype, np.integer):
            raise DataError("labels must be integers")
        self.labels = self.labels.astype(np.int64, copy=False)
        if self.labels.size > 0:
            lo = int(self.labels.min())
            hi = int(self.labels.max())
            if lo < 0 or hi >= self.num_classes:
                r = int(np.argwhere((self.labels < 0) | (self.labels >= self.num_classes))[0][0])
                raise DataError(
                    f"label {int(self.labels[r])} out of range [0, {self.num_classes}) at row {r}"
                )

    @property
    def n(self) -> int:
        return self.labels.shape[0]


def accuracies(matrix: PredictionMatrix, labels: LabelVector) -> np.ndarray:
    """Per-model accuracy against ground truth, shape (m,)."""
    if labels.n != matrix.n:
        raise DataError(f"label count {labels.n} does not match pool size {matrix.n}")
    if matrix.n == 0:
        return np.zeros(matrix.m)
    return (matrix.preds == labels.labels[:, None]).mean(axis=0)


def best_model_set(matrix: PredictionMatrix, labels: LabelVector) -> np.ndarray:
    """Indices of all models tied for the highest accuracy.

    Ties are decided on exact correct-answer counts, not floats, so two
    models with the same count always land in the same set.
    """
    if labels.n != matrix.n:
        raise DataError(f"label count {labels.n} does not match pool size {matrix.n}")
    counts = (matrix.preds == labels.labels[:, None]).sum(axis=0)
    return np.flatnonzero(counts == counts.max())


def _open_rows(path: str | os.PathLike) -> tuple[list[list[str]], int | None]:
    """Read CSV rows and the optional #classes= header comment."""
    declared: int | None = None
    try:
        with open(path, "r", newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    lines = text.splitlines()
    start = 0
    if lines and lines[0].startswith(CLASSES_COMMENT_PREFIX):
        raw = lines[0][len(CLASSES_COMMENT_PREFIX):].strip()
        try:
            declared = int(raw)
        except ValueError:
            raise DataError(f"malformed class-count comment {lines[0]!r} in {path}") from None
        if declared < 2:
            raise DataError(f"declared class count must be >= 2, got {declared} in {path}")
        start = 1
    reader = csv.reader(io.StringIO("\n".join(lines[start:])))
    rows = [row for row in reader if row]
    if not rows:
        raise DataError(f"{path} has no header row")
    return rows, declared


def load_predictions(path: str | os.PathLike) -> PredictionMatrix:
    """Load a prediction matrix from CSV.

    Expected layout: optional first line ``#classes=K``, then a header
    ``example_id,<model>,...`` followed by one row per example.  When the
    class count is not declared it is inferred as max(pred) + 1.
    """
    rows, declared = _open_rows(path)
    header = rows[0]
    if not header or header[0] != "example_id":
        raise DataError(f"first header column must be 'example_id' in {path}")
    model_names = [h.strip() for h in header[1:]]
    if len(model_names) < 2:
        raise DataError(f"m >= 2 required, got {len(model_names)} model column(s) in {path}")
    if len(set(model_names)) != len(model_names):
        dupes = sorted({nm for nm in model_names if model_names.count(nm) > 1})
        raise DataError(f"duplicate model names {dupes} in {path}")

    example_ids: list[str] = []
    seen: set[str] = set()
    preds = np.empty((len(rows) - 1, len(model_names)), dtype=np.int64)
    for r, row in enumerate(rows[1:]):
        if len(row) != len(model_names) + 1:
            raise DataError(
                f"row {r} of {path} has {len(row)} fields, expected {len(model_names) + 1}"
            )
        ex_id = row[0].strip()
        if ex_id in seen:
            raise DataError(f"duplicate example_id {ex_id!r} at row {r} of {path}")
        seen.add(ex_id)
        example_ids.append(ex_id)
        for c, cell in enumerate(row[1:]):
            try:
                preds[r, c] = int(cell)
            except ValueError:
                raise DataError(
                    f"ingestion error at row {r}, column {model_names[c]!r} of {path}:"
                    f" {cell!r} is not an integer class id"
                ) from None

    if preds.shape[0] == 0:
        raise DataError(f"{path} contains no prediction rows")
    inferred = int(preds.max()) + 1 if preds.size else 2
    num_classes = declared if declared is not None else max(inferred, 2)
    if preds.min() < 0 or preds.max() >= num_classes:
        bad = np.argwhere((preds < 0) | (preds >= num_classes))[0]
        r, c = int(bad[0]), int(bad[1])
        raise DataError(
            f"ingestion error at row {r}, column {model_names[c]!r} of {path}:"
            f" class id {int(preds[r, c])} outside [0, {num_classes})"
        )
    return PredictionMatrix(
        preds=preds,
        num_classes=num_classes,
        model_names=model_names,
        example_ids=example_ids,
    )


def load_labels(path: str | os.PathLike, matrix: PredictionMatrix) -> LabelVector:
    """Load ground-truth labels aligned against an existing matrix.

    The file must contain exactly matrix.n rows whose example_id column
    matches the matrix ordering, so a shuffled label file is rejected
    instead of silently mis-scoring every model.
    """
    rows, declared = _open_rows(path)
    header = rows[0]
    if header[:2] != ["example_id", "label"]:
        raise DataError(f"label header must be 'example_id,label' in {path}")
    body = rows[1:]
    if len(body) != matrix.n:
        raise DataError(
            f"{path} has {len(body)} label rows, expected {matrix.n} to match the pool"
        )
    num_classes = declared if declared is not None else matrix.num_classes
    labels = np.empty(matrix.n, dtype=np.int64)
    for r, row in enumerate(body):
        if len(row) != 2:
            raise DataError(f"row {r} of {path} has {len(row)} fields, expected 2")
        ex_id = row[0].strip()
        if ex_id != matrix.example_ids[r]:
            raise DataError(
                f"example_id mismatch at row {r} of {path}:"
                f" got {ex_id!r}, matrix has {matrix.example_ids[r]!r}"
            )
        try:
            labels[r] = int(row[1])
        except ValueError:
            raise DataError(
                f"ingestion error at row {r}, column 'label' of {path}:"
                f" {row[1]!r} is not an integer class id"
            ) from None
        if not (0 <= labels[r] < num_classes):
            raise DataError(
                f"ingestion error at row {r}, column 'label' of {path}:"
                f" class id {int(labels[r])} outside [0, {num_classes})"
            )
    return LabelVector(labels=labels, num_classes=matrix.num_classes)


def write_predictions(path: str | os.PathLike, matrix: PredictionMatrix) -> None:
    """Write a matrix in the same CSV layout load_predictions expects."""
    with open(path, "w", newline="") as fh:
        fh.write(f"{CLASSES_COMMENT_PREFIX}{matrix.num_classes}\n")
        writer = csv.writer(fh)
        writer.writerow(["example_id"] + matrix.model_names)
        for i in range(matrix.n):
            writer.writerow([matrix.example_ids[i]] + [int(v) for v in matrix.preds[i]])


def write_labels(path: str | os.PathLike, matrix: PredictionMatrix, labels: LabelVector) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"{CLASSES_COMMENT_PREFIX}{labels.num_classes}\n")
        writer = csv.writer(fh)
        writer.writerow(["example_id", "label"])
        for i in range(matrix.n):
            writer.writerow([matrix.example_ids[i], int(labels.labels[i])])
