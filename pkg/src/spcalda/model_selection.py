"""Stratified k-fold cross-validation and (gamma, q) grid search."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .classifiers import (
    ReducedLDAModel,
    _discriminant_scores,
    _euclidean_parts,
    _gamma_doc,
    _gamma_from_doc,
    _log_priors,
    _whitened_parts,
    fit_pcalda,
    fit_spcalda,
    model_from_dict,
    model_to_dict,
)
from .exceptions import InvalidInput
from .linalg import GAMMA_INF, LabeledDataset, center_columns, top_principal_directions

REPORT_FORMAT_VERSION = 1

DEFAULT_GAMMA_GRID = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, GAMMA_INF)
MAX_DEFAULT_Q = 40


@dataclass
class CVGrid:
    """Candidate (gamma, q) values, fold count, and the shuffling seed."""

    gamma_grid: tuple
    q_grid: tuple
    folds: int = 5
    seed: int = 0

    def __post_init__(self):
        self.gamma_grid = tuple(float(g) for g in self.gamma_grid)
        self.q_grid = tuple(int(q) for q in self.q_grid)
        if not self.gamma_grid or not self.q_grid:
            raise InvalidInput("gamma and q grids must be nonempty")
        for g in self.gamma_grid:
            if not (g > 0):
                raise InvalidInput(f"gamma grid values must be positive, got {g}")
        for q in self.q_grid:
            if q < 1:
                raise InvalidInput(f"q grid values must be >= 1, got {q}")
        if self.folds < 2:
            raise InvalidInput("need at least 2 folds")

    @classmethod
    def default_for(cls, ds: LabeledDataset, folds: int = 5, seed: int = 0) -> "CVGrid":
        q_max = min(ds.n + ds.n_classes - 1, MAX_DEFAULT_Q, ds.p)
        return cls(DEFAULT_GAMMA_GRID, tuple(range(1, q_max + 1)), folds, seed)


@dataclass
class CVReport:
    """Fold-averaged error for every grid cell plus the selected pair.

    ``tie_trace`` lists every cell attaining the minimum, in tie-break
    order (smaller q first, then smaller gamma with infinity last); the
    selected pair is its head.  ``model`` is the refit on the full data.
    """

    method: str
    gamma_grid: tuple
    q_grid: tuple
    folds: int
    seed: int
    error_table: np.ndarray
    selected: tuple
    fold_assignments: np.ndarray
    tie_trace: list
    missing_class_folds: list
    model: ReducedLDAModel | None = None

    @property
    def selected_error(self) -> float:
        gi = self.gamma_grid.index(self.selected[0])
        qi = self.q_grid.index(self.selected[1])
        return float(self.error_table[gi, qi])


def stratified_kfold(y, k: int, seed: int) -> np.ndarray:
    """Fold assignment (values 0..k-1) with per-class balance.

    Within each class the indices are shuffled by a generator seeded with
    ``seed`` and dealt round-robin, so per-class fold counts differ by at
    most one and the assignment is a pure function of (y, k, seed).
    """
    y = np.asarray(y, dtype=np.int64)
    if k < 2:
        raise InvalidInput("need at least 2 folds")
    classes = np.unique(y)
    min_count = min(int((y == c).sum()) for c in classes)
    if k > min_count:
        raise InvalidInput(f"folds={k} exceeds the smallest class size {min_count}")
    rng = np.random.default_rng(seed)
    assignments = np.empty(len(y), dtype=np.int64)
    for c in classes:
        idx = np.flatnonzero(y == c)
        perm = rng.permutation(idx)
        assignments[perm] = np.arange(len(perm)) % k
    return assignments


def _tie_key(cell):
    gamma, q = cell
    return (q, math.isinf(gamma), gamma)


def _fold_errors(
    x_train: np.ndarray,
    y_train: np.ndarray,
    x_test: np.ndarray,
    y_test: np.ndarray,
    gamma_grid: tuple,
    q_grid: tuple,
    priors_mode: str,
) -> tuple[np.ndarray, bool]:
    """Error rate for every grid cell on one train/test split.

    Classes absent from the training split are dropped for fitting (their
    held-out members always count as errors); the flag reports whether that
    happened.  For each gamma the full-rank basis is computed once and the
    q loop reuses its leading columns, which matches fitting each cell
    separately because the decomposition does not depend on q.
    """
    present = np.unique(y_train)
    compact = np.searchsorted(present, y_train) + 1
    missing = len(present) < len(np.unique(np.concatenate([y_train, y_test])))
    centered, mean = center_columns(x_train)
    ds = LabeledDataset(centered, compact)
    counts = ds.class_counts
    log_priors = _log_priors(counts, priors_mode)
    q_cap = min(max(q_grid), ds.p, ds.n + ds.n_classes)
    test_centered = x_test - mean
    errors = np.empty((len(gamma_grid), len(q_grid)))
    for gi, gamma in enumerate(gamma_grid):
        basis = top_principal_directions(ds, gamma, q_cap)
        z_train = ds.data @ basis.directions
        z_test = test_centered @ basis.directions
        euclidean = gamma == GAMMA_INF
        for qi, q in enumerate(q_grid):
            qe = min(q, basis.q)
            zq_train = z_train[:, :qe]
            zq_test = z_test[:, :qe]
            if euclidean:
                centroids, factor = _euclidean_parts(zq_train, ds.labels, counts)
            else:
                centroids, factor, _ = _whitened_parts(zq_train, ds.labels, counts)
            scores = _discriminant_scores(zq_test, centroids, factor, log_priors)
            predicted = present[scores.argmax(axis=1)]
            errors[gi, qi] = float(np.mean(predicted != y_test))
    return errors, missing


def cv_select(
    ds: LabeledDataset,
    grid: CVGrid | None = None,
    method: str = "SPCALDA",
    priors_mode: str = "empirical",
) -> CVReport:
    """Grid search (gamma, q) by stratified k-fold cross-validation.

    Averages 0/1 error over held-out folds for every cell, selects the
    minimizer with ties broken toward smaller q, then smaller gamma with
    infinity last, and refits on the full data at the selected pair.  For
    PCALDA the gamma dimension is pinned to {1}.
    """
    if method not in ("SPCALDA", "PCALDA"):
        raise InvalidInput(f"method must be SPCALDA or PCALDA, got {method!r}")
    if grid is None:
        grid = CVGrid.default_for(ds)
    gamma_grid = (1.0,) if method == "PCALDA" else grid.gamma_grid
    limit = ds.n + ds.n_classes
    for q in grid.q_grid:
        if q > limit:
            raise InvalidInput(f"q={q} exceeds n + K = {limit}")
    assignments = stratified_kfold(ds.labels, grid.folds, grid.seed)
    total = np.zeros((len(gamma_grid), len(grid.q_grid)))
    missing_class_folds = []
    for fold in range(grid.folds):
        test_mask = assignments == fold
        fold_errors, missing = _fold_errors(
            ds.data[~test_mask],
            ds.labels[~test_mask],
            ds.data[test_mask],
            ds.labels[test_mask],
            gamma_grid,
            grid.q_grid,
            priors_mode,
        )
        total += fold_errors
        if missing:
            missing_class_folds.append(fold)
    error_table = total / grid.folds
    best = error_table.min()
    ties = [
        (gamma_grid[gi], grid.q_grid[qi])
        for gi in range(len(gamma_grid))
        for qi in range(len(grid.q_grid))
        if error_table[gi, qi] == best
    ]
    ties.sort(key=_tie_key)
    selected = ties[0]
    if method == "PCALDA":
        model = fit_pcalda(ds, selected[1], priors_mode)
    else:
        model = fit_spcalda(ds, selected[0], selected[1], priors_mode)
    return CVReport(
        method=method,
        gamma_grid=gamma_grid,
        q_grid=grid.q_grid,
        folds=grid.folds,
        seed=grid.seed,
        error_table=error_table,
        selected=selected,
        fold_assignments=assignments,
        tie_trace=ties,
        missing_class_folds=missing_class_folds,
        model=model,
    )


def recompute_selected_error(ds: LabeledDataset, report: CVReport, priors_mode: str = "empirical") -> float:
    """Re-evaluate the selected cell from the stored fold assignments."""
    gamma, q = report.selected
    errors = []
    for fold in range(report.folds):
        test_mask = report.fold_assignments == fold
        fold_errors, _ = _fold_errors(
            ds.data[~test_mask],
            ds.labels[~test_mask],
            ds.data[test_mask],
            ds.labels[test_mask],
            (gamma,),
            (q,),
            priors_mode,
        )
        errors.append(fold_errors[0, 0])
    return float(np.mean(errors))


def format_error_table(report: CVReport) -> str:
    """Aligned text rendering of the cross-validation error table."""
    header = ["gamma\\q"] + [str(q) for q in report.q_grid]
    rows = [header]
    for gi, gamma in enumerate(report.gamma_grid):
        label = "inf" if math.isinf(gamma) else f"{gamma:g}"
        rows.append([label] + [f"{report.error_table[gi, qi]:.4f}" for qi in range(len(report.q_grid))])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(widths[i]) for i, cell in enumerate(row)) for row in rows]
    sel_gamma = "inf" if math.isinf(report.selected[0]) else f"{report.selected[0]:g}"
    lines.append(
        f"selected: gamma={sel_gamma} q={report.selected[1]} "
        f"(cv error {report.selected_error:.4f})"
    )
    return "\n".join(lines)


def report_to_dict(report: CVReport) -> dict:
    return {
        "format_version": REPORT_FORMAT_VERSION,
        "method": report.method,
        "gamma_grid": [_gamma_doc(g) for g in report.gamma_grid],
        "q_grid": list(report.q_grid),
        "folds": report.folds,
        "seed": report.seed,
        "error_table": [list(map(float, row)) for row in report.error_table],
        "selected": [_gamma_doc(report.selected[0]), report.selected[1]],
        "fold_assignments": report.fold_assignments.tolist(),
        "tie_trace": [[_gamma_doc(g), q] for g, q in report.tie_trace],
        "missing_class_folds": list(report.missing_class_folds),
        "model": model_to_dict(report.model) if report.model is not None else None,
    }


def report_from_dict(doc: dict) -> CVReport:
    if doc.get("format_version") != REPORT_FORMAT_VERSION:
        raise InvalidInput(f"unsupported report format version {doc.get('format_version')!r}")
    return CVReport(
        method=doc["method"],
        gamma_grid=tuple(_gamma_from_doc(g) for g in doc["gamma_grid"]),
        q_grid=tuple(doc["q_grid"]),
        folds=doc["folds"],
        seed=doc["seed"],
        error_table=np.array(doc["error_table"], dtype=np.float64),
        selected=(_gamma_from_doc(doc["selected"][0]), doc["selected"][1]),
        fold_assignments=np.array(doc["fold_assignments"], dtype=np.int64),
        tie_trace=[(_gamma_from_doc(g), q) for g, q in doc["tie_trace"]],
        missing_class_folds=list(doc["missing_class_folds"]),
        model=model_from_dict(doc["model"]) if doc["model"] is not None else None,
    )


def report_to_json(report: CVReport) -> str:
    return json.dumps(report_to_dict(report), sort_keys=True)


def report_from_json(text: str) -> CVReport:
    return report_from_dict(json.loads(text))
