"""CSV ingestion and file persistence for models, reports and datasets.

All floating-point values are written with 17 significant digits so a
save/load round trip reproduces the binary values exactly.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifiers import ReducedLDAModel, model_from_json, model_to_json
from .exceptions import ConfigError, InvalidInput, ParseError
from .linalg import LabeledDataset
from .model_selection import CVReport, report_from_json, report_to_json

FLOAT_FORMAT = "%.17g"


@dataclass
class CsvDataset:
    """A labeled dataset parsed from CSV, with the label mapping kept so
    predictions can be reported in the original label vocabulary."""

    dataset: LabeledDataset
    feature_names: list
    label_column: str
    label_names: list  # position k-1 holds the original name of class k


def _read_rows(path) -> tuple[list, list]:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"no such file: {path}")
    with open(path, newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        rows = list(reader)
    header = [name.strip() for name in header]
    for i, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
    return header, rows


def _parse_cell(value: str, path, row: int, column: str) -> float:
    value = value.strip()
    if value == "":
        raise ParseError(f"{path}: missing value at row {row}, column {column!r}")
    try:
        return float(value)
    except ValueError:
        raise ParseError(
            f"{path}: non-numeric value {value!r} at row {row}, column {column!r}"
        ) from None


def load_csv(path, label_column: str) -> CsvDataset:
    """Parse a delimited file with a header row into a labeled dataset.

    Features are every column except ``label_column``, in file order; label
    values (strings or integers) map to 1..K in first-appearance order.
    """
    header, rows = _read_rows(path)
    if label_column not in header:
        raise ConfigError(f"label column {label_column!r} not found in {path}")
    if not rows:
        raise ParseError(f"{path}: no data rows")
    label_pos = header.index(label_column)
    feature_names = [name for i, name in enumerate(header) if i != label_pos]
    label_names: list = []
    labels = np.empty(len(rows), dtype=np.int64)
    data = np.empty((len(rows), len(feature_names)))
    for i, row in enumerate(rows):
        j = 0
        for pos, cell in enumerate(row):
            if pos == label_pos:
                name = cell.strip()
                if name == "":
                    raise ParseError(f"{path}: missing value at row {i + 1}, column {label_column!r}")
                if name not in label_names:
                    label_names.append(name)
                labels[i] = label_names.index(name) + 1
            else:
                data[i, j] = _parse_cell(cell, path, i + 1, header[pos])
                j += 1
    if len(label_names) < 2:
        raise InvalidInput(f"{path}: need at least 2 classes, found {len(label_names)}")
    counts = np.bincount(labels, minlength=len(label_names) + 1)[1:]
    if (counts < 2).any():
        small = [label_names[k] for k in np.flatnonzero(counts < 2)]
        raise InvalidInput(f"{path}: classes with fewer than 2 rows: {small}")
    return CsvDataset(LabeledDataset(data, labels), feature_names, label_column, label_names)


def load_feature_matrix(path, drop_columns=()) -> tuple[np.ndarray, list]:
    """Numeric feature matrix from CSV, skipping the named columns."""
    header, rows = _read_rows(path)
    keep = [i for i, name in enumerate(header) if name not in set(drop_columns)]
    names = [header[i] for i in keep]
    data = np.empty((len(rows), len(keep)))
    for i, row in enumerate(rows):
        for j, pos in enumerate(keep):
            data[i, j] = _parse_cell(row[pos], path, i + 1, header[pos])
    return data, names


def save_dataset_csv(
    path,
    ds: LabeledDataset,
    feature_names=None,
    label_column: str = "class",
    label_names=None,
) -> None:
    if feature_names is None:
        feature_names = [f"f{j + 1}" for j in range(ds.p)]
    if label_names is None:
        label_names = [str(k) for k in range(1, ds.n_classes + 1)]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(list(feature_names) + [label_column])
        for row, label in zip(ds.data, ds.labels):
            writer.writerow([FLOAT_FORMAT % v for v in row] + [label_names[label - 1]])


def save_predictions_csv(path, labels, scores, label_names=None) -> None:
    """Predictions as (row index, label, one score column per class)."""
    k = scores.shape[1]
    if label_names is None:
        label_names = [str(i + 1) for i in range(k)]
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["index", "label"] + [f"score_{name}" for name in label_names])
        for i, (label, row) in enumerate(zip(labels, scores)):
            writer.writerow([i, label] + [FLOAT_FORMAT % v for v in row])


def save_model(path, model: ReducedLDAModel) -> None:
    Path(path).write_text(model_to_json(model) + "\n")


def load_model(path) -> ReducedLDAModel:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"no such file: {path}")
    try:
        return model_from_json(path.read_text())
    except (json.JSONDecodeError, KeyError) as exc:
        raise ParseError(f"{path}: not a valid model file ({exc})") from exc


def save_cv_report(path, report: CVReport) -> None:
    Path(path).write_text(report_to_json(report) + "\n")


def load_cv_report(path) -> CVReport:
    path = Path(path)
    if not path.exists():
        raise ParseError(f"no such file: {path}")
    try:
        return report_from_json(path.read_text())
    except (json.JSONDecodeError, KeyError) as exc:
        raise ParseError(f"{path}: not a valid report file ({exc})") from exc
