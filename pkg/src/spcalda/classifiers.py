"""Reduced-rank LDA classifiers and their high-dimensional baselines.

The main fit is a two-step pipeline: project onto the top principal
directions of the weighted total scatter ``W + gamma * B``, then run
standard LDA in the reduced space.  The classical baselines fall out as
special cases: ``gamma = 1`` is LDA after ordinary PCA, ``gamma = inf`` is
the simple reduced-rank LDA on the centroid span, and the independence rule
replaces the pooled within-class covariance by its diagonal.  A Bayes
oracle on known population parameters is provided for simulations.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .exceptions import (
    DegenerateModelWarning,
    DimensionMismatch,
    InvalidInput,
    RankDeficiencyWarning,
    SingularWithinEstimate,
)
from .linalg import (
    GAMMA_INF,
    LabeledDataset,
    ProjectionBasis,
    center_columns,
    class_statistics,
    scatter_matrices,
    top_principal_directions,
    _fix_signs,
)

MODEL_FORMAT_VERSION = 1

#: Relative ridge applied to a numerically singular reduced within-covariance.
RIDGE_SCALE = 1e-8
#: lambda_min below this fraction of lambda_max counts as singular.
SINGULAR_RATIO = 1e-10
#: Absolute ridge fallback when the reduced within-covariance is exactly zero.
RIDGE_FLOOR = 1e-8
#: Floor for zero diagonal entries of W, as a fraction of the largest entry.
DIAGONAL_FLOOR_SCALE = 1e-12


@dataclass
class ReducedLDAModel:
    """A fitted classifier: center, project, then score by Gaussian
    discriminants in the reduced space.

    ``basis is None`` marks a full-space model (standard or diagonal LDA).
    ``reduced_within_factor`` is either a q x q lower-triangular Cholesky
    factor of the (possibly ridged) reduced within-class covariance, or a
    length-q vector of per-coordinate scale factors (diagonal metric; all
    ones for the Euclidean metric of the centroid-span methods).
    """

    method_tag: str
    centering: np.ndarray
    basis: ProjectionBasis | None
    reduced_centroids: np.ndarray
    reduced_within_factor: np.ndarray
    log_priors: np.ndarray
    ridge_used: float = 0.0
    class_labels: np.ndarray = None  # original integer labels, row-aligned with centroids
    label_names: list | None = None
    label_column: str | None = None
    degenerate: bool = False

    def __post_init__(self):
        if self.class_labels is None:
            self.class_labels = np.arange(1, self.reduced_centroids.shape[0] + 1)
        self.class_labels = np.asarray(self.class_labels, dtype=np.int64)

    @property
    def n_classes(self) -> int:
        return self.reduced_centroids.shape[0]

    @property
    def n_features(self) -> int:
        return self.centering.shape[0]


@dataclass
class FisherDirections:
    """Discriminant directions maximizing between-class spread subject to a
    within-class normalization ``v' @ What @ v = 1``."""

    directions: np.ndarray
    within_estimate_tag: str
    r: int
    eigenvalues: np.ndarray


# --------------------------------------------------------------------------
# Population within-class covariance forms with closed-form inverses.


@dataclass
class IdentityWithin:
    """Sigma_w = I."""

    def apply_inverse(self, v: np.ndarray) -> np.ndarray:
        return v

    def apply(self, v: np.ndarray) -> np.ndarray:
        return v

    def matrix(self, p: int) -> np.ndarray:
        return np.eye(p)


@dataclass
class CompoundSymmetryWithin:
    """Sigma_w with unit diagonal and constant off-diagonal correlation rho;
    the inverse follows from the Sherman-Morrison identity."""

    rho: float

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise InvalidInput(f"rho must lie in [0, 1), got {self.rho}")

    def apply_inverse(self, v: np.ndarray) -> np.ndarray:
        p = v.shape[0]
        rho = self.rho
        col_sums = v.sum(axis=0, keepdims=True)
        return v / (1.0 - rho) - (rho / ((1.0 - rho) * (1.0 - rho + p * rho))) * col_sums

    def apply(self, v: np.ndarray) -> np.ndarray:
        return (1.0 - self.rho) * v + self.rho * v.sum(axis=0, keepdims=True)

    def matrix(self, p: int) -> np.ndarray:
        return (1.0 - self.rho) * np.eye(p) + self.rho * np.ones((p, p))


@dataclass
class SpikedWithin:
    """Sigma_w = base * I + sum_i (values_i - base) * xi_i xi_i'; the inverse
    expands along the same rank-s term."""

    base: float
    values: np.ndarray
    directions: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        self.directions = np.asarray(self.directions, dtype=np.float64)
        if self.base <= 0 or (self.values <= 0).any():
            raise InvalidInput("spiked covariance requires positive eigenvalues")

    def apply_inverse(self, v: np.ndarray) -> np.ndarray:
        if self.values.size == 0:
            return v / self.base
        coef = (self.values - self.base) / (self.base * self.values)
        return v / self.base - self.directions @ (coef[:, None] * (self.directions.T @ v))

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.values.size == 0:
            return self.base * v
        coef = self.values - self.base
        return self.base * v + self.directions @ (coef[:, None] * (self.directions.T @ v))

    def matrix(self, p: int) -> np.ndarray:
        m = self.base * np.eye(p)
        for lam, xi in zip(self.values, self.directions.T):
            m += (lam - self.base) * np.outer(xi, xi)
        return m


@dataclass
class ExplicitWithin:
    """Sigma_w given as a dense symmetric positive definite matrix."""

    sigma: np.ndarray
    _cho: tuple = field(init=False, repr=False)

    def __post_init__(self):
        self.sigma = np.asarray(self.sigma, dtype=np.float64)
        try:
            self._cho = cho_factor(self.sigma, lower=True)
        except np.linalg.LinAlgError as exc:
            raise InvalidInput("within covariance must be positive definite") from exc

    def apply_inverse(self, v: np.ndarray) -> np.ndarray:
        return cho_solve(self._cho, v)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.sigma @ v

    def matrix(self, p: int) -> np.ndarray:
        return self.sigma


def as_within_covariance(within):
    """Coerce a matrix or descriptor into a within-covariance object."""
    if isinstance(within, (IdentityWithin, CompoundSymmetryWithin, SpikedWithin, ExplicitWithin)):
        return within
    return ExplicitWithin(np.asarray(within, dtype=np.float64))


@dataclass
class OracleSpec:
    """Population centroids and within-class covariance for the Bayes rule."""

    centroids: np.ndarray
    within: object
    priors: np.ndarray | None = None

    def __post_init__(self):
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        if self.centroids.ndim != 2 or self.centroids.shape[0] < 2:
            raise InvalidInput("oracle needs at least 2 class centroids")
        self.within = as_within_covariance(self.within)
        if self.priors is not None:
            self.priors = np.asarray(self.priors, dtype=np.float64)


# --------------------------------------------------------------------------
# Fitting


def _log_priors(counts: np.ndarray, priors_mode: str) -> np.ndarray:
    if priors_mode == "empirical":
        return np.log(counts / counts.sum())
    if priors_mode == "equal":
        return np.full(len(counts), -np.log(len(counts)))
    raise InvalidInput(f"priors_mode must be 'empirical' or 'equal', got {priors_mode!r}")


def _whitened_parts(z: np.ndarray, labels: np.ndarray, counts: np.ndarray):
    """Reduced centroids, Cholesky factor of the (ridged) within covariance,
    and the ridge actually applied."""
    n, q = z.shape
    k = len(counts)
    centroids = np.empty((k, q))
    for i in range(k):
        centroids[i] = z[labels == i + 1].mean(axis=0)
    resid = z - centroids[labels - 1]
    s = resid.T @ resid / n
    s = 0.5 * (s + s.T)
    ridge = 0.0
    if q:
        evals = np.linalg.eigvalsh(s)
        if evals[0] <= SINGULAR_RATIO * max(evals[-1], 0.0):
            trace = float(np.trace(s))
            ridge = RIDGE_SCALE * trace / q if trace > 0 else RIDGE_FLOOR
            s = s + ridge * np.eye(q)
    factor = np.linalg.cholesky(s) if q else np.zeros((0, 0))
    return centroids, factor, ridge


def _euclidean_parts(z: np.ndarray, labels: np.ndarray, counts: np.ndarray):
    k = len(counts)
    centroids = np.empty((k, z.shape[1]))
    for i in range(k):
        centroids[i] = z[labels == i + 1].mean(axis=0)
    return centroids, np.ones(z.shape[1])


def fit_reduced_lda(
    z, y, priors_mode: str = "empirical", method_tag: str = "LDA"
) -> ReducedLDAModel:
    """Standard LDA on (already projected) data ``z`` with labels 1..K.

    The within-class covariance of ``z`` is ridged by
    ``1e-8 * trace(S) / q`` whenever its smallest eigenvalue falls below
    ``1e-10`` of the largest, so the fit never fails for q > n - K.
    """
    ds = LabeledDataset(z, y)
    if ds.n_classes < 2:
        raise InvalidInput("need at least 2 classes")
    centroids, factor, ridge = _whitened_parts(ds.data, ds.labels, ds.class_counts)
    return ReducedLDAModel(
        method_tag=method_tag,
        centering=np.zeros(ds.p),
        basis=None,
        reduced_centroids=centroids,
        reduced_within_factor=factor,
        log_priors=_log_priors(ds.class_counts, priors_mode),
        ridge_used=ridge,
    )


def fit_lda(ds: LabeledDataset, priors_mode: str = "empirical") -> ReducedLDAModel:
    """Full-space standard LDA (pooled within-covariance metric)."""
    centered, mean = center_columns(ds.data)
    centroids, factor, ridge = _whitened_parts(centered, ds.labels, ds.class_counts)
    return ReducedLDAModel(
        method_tag="LDA",
        centering=mean,
        basis=None,
        reduced_centroids=centroids,
        reduced_within_factor=factor,
        log_priors=_log_priors(ds.class_counts, priors_mode),
        ridge_used=ridge,
    )


def fit_spcalda(
    ds: LabeledDataset, gamma: float, q: int, priors_mode: str = "empirical"
) -> ReducedLDAModel:
    """Project onto the top-q principal directions of ``W + gamma * B`` and
    apply standard LDA to the projected data.

    ``gamma = GAMMA_INF`` realizes the centroid-span limit exactly: the
    projection spans the class centroids and the reduced metric is
    Euclidean, so with ``q = K - 1`` the fit coincides with
    :func:`fit_srrlda`.  If q exceeds the numerical rank the basis is
    truncated and a :class:`RankDeficiencyWarning` is emitted.
    """
    if ds.n_classes < 2:
        raise InvalidInput("need at least 2 classes")
    centered, mean = center_columns(ds.data)
    cds = LabeledDataset(centered, ds.labels)
    basis = top_principal_directions(cds, gamma, q)
    if basis.rank_deficient:
        warnings.warn(
            f"requested q={q} exceeds numerical rank; using q={basis.q}",
            RankDeficiencyWarning,
            stacklevel=2,
        )
    return _model_from_basis(cds, basis, mean, priors_mode, "SPCALDA")


def _model_from_basis(
    cds: LabeledDataset,
    basis: ProjectionBasis,
    mean: np.ndarray,
    priors_mode: str,
    method_tag: str,
) -> ReducedLDAModel:
    """Assemble a model from a centered dataset and a fixed projection."""
    z = cds.data @ basis.directions
    ridge = 0.0
    if basis.gamma == GAMMA_INF or method_tag == "SRRLDA":
        centroids, factor = _euclidean_parts(z, cds.labels, cds.class_counts)
    else:
        centroids, factor, ridge = _whitened_parts(z, cds.labels, cds.class_counts)
    degenerate = basis.q == 0
    if degenerate:
        warnings.warn(
            "no discriminative directions survive; predictions fall back to priors",
            DegenerateModelWarning,
            stacklevel=3,
        )
    return ReducedLDAModel(
        method_tag=method_tag,
        centering=mean,
        basis=basis,
        reduced_centroids=centroids,
        reduced_within_factor=factor,
        log_priors=_log_priors(cds.class_counts, priors_mode),
        ridge_used=ridge,
        degenerate=degenerate,
    )


def fit_pcalda(ds: LabeledDataset, q: int, priors_mode: str = "empirical") -> ReducedLDAModel:
    """LDA after ordinary PCA: the ``gamma = 1`` special case."""
    model = fit_spcalda(ds, 1.0, q, priors_mode)
    model.method_tag = "PCALDA"
    return model


def fit_srrlda(ds: LabeledDataset, priors_mode: str = "empirical") -> ReducedLDAModel:
    """Simple reduced-rank LDA: nearest centroid (Euclidean) in the span of
    the class centroids."""
    if ds.n_classes < 2:
        raise InvalidInput("need at least 2 classes")
    centered, mean = center_columns(ds.data)
    cds = LabeledDataset(centered, ds.labels)
    q = max(1, min(ds.n_classes - 1, ds.p))
    basis = top_principal_directions(cds, GAMMA_INF, q)
    return _model_from_basis(cds, basis, mean, priors_mode, "SRRLDA")


def fit_diagonal_lda(ds: LabeledDataset, priors_mode: str = "empirical") -> ReducedLDAModel:
    """Independence rule: full-space LDA using only diag(W).

    Zero within-class variances are floored at ``1e-12`` of the largest
    entry so constant features cannot produce infinite scores.
    """
    if ds.n_classes < 2:
        raise InvalidInput("need at least 2 classes")
    centered, mean = center_columns(ds.data)
    cds = LabeledDataset(centered, ds.labels)
    centroids, _ = class_statistics(cds)
    resid = centered - centroids[cds.labels - 1]
    diag_w = np.einsum("ij,ij->j", resid, resid) / cds.n
    floor = DIAGONAL_FLOOR_SCALE * max(diag_w.max(), 1.0) if diag_w.size else 0.0
    ridge = 0.0
    if (diag_w < floor).any():
        warnings.warn(
            "within-class variance floored for constant features",
            RankDeficiencyWarning,
            stacklevel=2,
        )
        diag_w = np.maximum(diag_w, floor)
        ridge = floor
    return ReducedLDAModel(
        method_tag="IR",
        centering=mean,
        basis=None,
        reduced_centroids=centroids,
        reduced_within_factor=np.sqrt(diag_w),
        log_priors=_log_priors(cds.class_counts, priors_mode),
        ridge_used=ridge,
    )


def within_estimate_matrix(ds: LabeledDataset, within_estimate="pooled-W"):
    """Resolve a within-class covariance estimate for Fisher-style solvers.

    Accepts ``"pooled-W"``, ``"diagonal-Dw"`` (diagonal of W with zero
    entries floored), or an explicit matrix; returns (matrix, tag).
    """
    w, _, _ = scatter_matrices(ds, 1.0)
    if isinstance(within_estimate, str):
        if within_estimate == "pooled-W":
            return w, "pooled-W"
        if within_estimate == "diagonal-Dw":
            d = np.diag(w).copy()
            floor = DIAGONAL_FLOOR_SCALE * max(d.max(), 1.0)
            return np.diag(np.maximum(d, floor)), "diagonal-Dw"
        raise InvalidInput(f"unknown within_estimate {within_estimate!r}")
    return np.asarray(within_estimate, dtype=np.float64), "custom"


def fisher_directions(ds: LabeledDataset, within_estimate="pooled-W") -> FisherDirections:
    """Solve the generalized eigenproblem B v = lambda * What v.

    ``within_estimate`` is ``"pooled-W"``, ``"diagonal-Dw"``, or an explicit
    symmetric positive definite matrix.  Returns the rank(B) leading
    directions, What-orthonormalized.  Intended for small p; the pooled
    estimate requires n - K >= p to be nonsingular.
    """
    centered, _ = center_columns(ds.data)
    cds = LabeledDataset(centered, ds.labels)
    _, b, _ = scatter_matrices(cds, 1.0)
    what, tag = within_estimate_matrix(cds, within_estimate)
    evals_w = np.linalg.eigvalsh(what)
    if evals_w[0] <= ds.p * np.finfo(np.float64).eps * max(evals_w[-1], 0.0):
        raise SingularWithinEstimate("within-class estimate is numerically singular")
    ell = np.linalg.cholesky(what)
    m = solve_triangular(ell, b, lower=True)
    m = solve_triangular(ell, m.T, lower=True)
    m = 0.5 * (m + m.T)
    evals, vecs = np.linalg.eigh(m)
    evals = evals[::-1]
    vecs = vecs[:, ::-1]
    tol = ds.p * np.finfo(np.float64).eps * max(evals[0], 0.0)
    r = int(np.count_nonzero(evals > tol))
    directions = solve_triangular(ell.T, vecs[:, :r], lower=False)
    _fix_signs(directions)
    return FisherDirections(directions=directions, within_estimate_tag=tag, r=r, eigenvalues=evals[:r])


# --------------------------------------------------------------------------
# Prediction


def _discriminant_scores(
    z: np.ndarray,
    centroids: np.ndarray,
    factor: np.ndarray,
    log_priors: np.ndarray,
) -> np.ndarray:
    k = centroids.shape[0]
    scores = np.empty((z.shape[0], k))
    for i in range(k):
        diff = z - centroids[i]
        if factor.ndim == 1:
            white = diff / factor if factor.size else diff
            scores[:, i] = -0.5 * np.einsum("ij,ij->i", white, white) + log_priors[i]
        else:
            white = solve_triangular(factor, diff.T, lower=True)
            scores[:, i] = -0.5 * np.einsum("ji,ji->i", white, white) + log_priors[i]
    return scores


def predict(model: ReducedLDAModel, x) -> tuple[np.ndarray, np.ndarray]:
    """Labels and per-class discriminant scores for the rows of ``x``.

    Ties in the score argmax go to the smallest class index; the whole path
    is deterministic.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise DimensionMismatch(
            f"expected {model.n_features} feature columns, got {x.shape[1] if x.ndim == 2 else x.shape}"
        )
    if x.shape[0] == 0:
        return np.zeros(0, dtype=np.int64), np.zeros((0, model.n_classes))
    z = x - model.centering
    if model.basis is not None:
        z = z @ model.basis.directions
    scores = _discriminant_scores(
        z, model.reduced_centroids, model.reduced_within_factor, model.log_priors
    )
    labels = model.class_labels[scores.argmax(axis=1)]
    return labels, scores


def bayes_oracle_predict(spec: OracleSpec, x) -> np.ndarray:
    """Nearest centroid in Mahalanobis distance under the true covariance."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(1, -1)
    if not np.isfinite(x).all():
        raise InvalidInput("oracle input must be finite")
    if x.shape[1] != spec.centroids.shape[1]:
        raise DimensionMismatch(
            f"expected {spec.centroids.shape[1]} columns, got {x.shape[1]}"
        )
    k = spec.centroids.shape[0]
    scores = np.empty((x.shape[0], k))
    for i in range(k):
        diff = x - spec.centroids[i]
        scores[:, i] = -0.5 * np.einsum(
            "ij,ji->i", diff, spec.within.apply_inverse(diff.T)
        )
        if spec.priors is not None:
            scores[:, i] += math.log(spec.priors[i])
    return (scores.argmax(axis=1) + 1).astype(np.int64)


# --------------------------------------------------------------------------
# Serialization


def _array_doc(a: np.ndarray) -> dict:
    return {"shape": list(a.shape), "data": np.asarray(a, dtype=np.float64).ravel().tolist()}


def _array_from_doc(doc: dict) -> np.ndarray:
    return np.array(doc["data"], dtype=np.float64).reshape(doc["shape"])


def _gamma_doc(gamma: float):
    return "inf" if gamma == GAMMA_INF else gamma


def _gamma_from_doc(doc) -> float:
    return GAMMA_INF if doc == "inf" else float(doc)


def model_to_dict(model: ReducedLDAModel) -> dict:
    basis_doc = None
    if model.basis is not None:
        basis_doc = {
            "directions": _array_doc(model.basis.directions),
            "eigenvalues": _array_doc(model.basis.eigenvalues),
            "gamma": _gamma_doc(model.basis.gamma),
            "rank_deficient": model.basis.rank_deficient,
        }
    factor = model.reduced_within_factor
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "method_tag": model.method_tag,
        "centering": _array_doc(model.centering),
        "basis": basis_doc,
        "reduced_centroids": _array_doc(model.reduced_centroids),
        "reduced_within_factor": {
            "kind": "diagonal" if factor.ndim == 1 else "cholesky",
            **_array_doc(factor),
        },
        "log_priors": _array_doc(model.log_priors),
        "ridge_used": model.ridge_used,
        "class_labels": model.class_labels.tolist(),
        "label_names": model.label_names,
        "label_column": model.label_column,
        "degenerate": model.degenerate,
    }


def model_from_dict(doc: dict) -> ReducedLDAModel:
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise InvalidInput(f"unsupported model format version {doc.get('format_version')!r}")
    basis = None
    if doc["basis"] is not None:
        basis = ProjectionBasis(
            directions=_array_from_doc(doc["basis"]["directions"]),
            eigenvalues=_array_from_doc(doc["basis"]["eigenvalues"]),
            gamma=_gamma_from_doc(doc["basis"]["gamma"]),
            rank_deficient=doc["basis"]["rank_deficient"],
        )
    return ReducedLDAModel(
        method_tag=doc["method_tag"],
        centering=_array_from_doc(doc["centering"]),
        basis=basis,
        reduced_centroids=_array_from_doc(doc["reduced_centroids"]),
        reduced_within_factor=_array_from_doc(doc["reduced_within_factor"]),
        log_priors=_array_from_doc(doc["log_priors"]),
        ridge_used=doc["ridge_used"],
        class_labels=np.array(doc["class_labels"], dtype=np.int64),
        label_names=doc.get("label_names"),
        label_column=doc.get("label_column"),
        degenerate=doc.get("degenerate", False),
    )


def model_to_json(model: ReducedLDAModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True)


def model_from_json(text: str) -> ReducedLDAModel:
    return model_from_dict(json.loads(text))
