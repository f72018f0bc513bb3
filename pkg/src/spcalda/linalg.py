"""Dense kernels for reduced-rank discriminant analysis.

Centering, per-class statistics, within/between scatter matrices, and the
small-side eigendecomposition that recovers the top principal directions of
the weighted total scatter ``W + gamma * B`` in O(n^2 p) instead of O(p^3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .exceptions import DimensionGuard, InvalidInput

#: Sentinel for the infinite between-class weight (centroid-span limit).
GAMMA_INF = math.inf

#: Largest p for which dense p x p scatter matrices are materialized.
MATERIALIZE_GUARD = 2000


def _as_float_matrix(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise InvalidInput(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


@dataclass
class LabeledDataset:
    """An n x p observation matrix with integer class labels 1..K.

    Every label in 1..K must occur at least once; class index sets and
    counts are derived on construction.  Instances are treated as
    immutable: fit/predict never modify them.
    """

    data: np.ndarray
    labels: np.ndarray
    class_indices: tuple = field(init=False, repr=False)
    class_counts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.data = _as_float_matrix(self.data)
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.shape[0] != self.data.shape[0]:
            raise InvalidInput("labels must be a vector with one entry per data row")
        if self.data.shape[0] == 0:
            raise InvalidInput("dataset must contain at least one observation")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            as_int = labels.astype(np.int64)
            if not np.array_equal(as_int, labels):
                raise InvalidInput("labels must be integers")
            labels = as_int
        self.labels = labels.astype(np.int64)
        if self.labels.min() < 1:
            raise InvalidInput("labels must take values in 1..K")
        n_classes = int(self.labels.max())
        indices = tuple(np.flatnonzero(self.labels == k) for k in range(1, n_classes + 1))
        counts = np.array([len(ix) for ix in indices], dtype=np.int64)
        if (counts == 0).any():
            missing = [k + 1 for k in np.flatnonzero(counts == 0)]
            raise InvalidInput(f"classes with zero members: {missing}")
        self.class_indices = indices
        self.class_counts = counts

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_indices)


@dataclass
class ProjectionBasis:
    """Column-orthonormal directions with their scatter eigenvalues.

    ``directions`` is p x q with orthonormal columns; ``eigenvalues`` is the
    matching nonincreasing vector of eigenvalues of the weighted total
    scatter (for ``gamma == GAMMA_INF``, of the between-class scatter).
    ``rank_deficient`` is set when fewer directions than requested survived
    the numerical-rank cutoff.
    """

    directions: np.ndarray
    eigenvalues: np.ndarray
    gamma: float
    rank_deficient: bool = False

    @property
    def q(self) -> int:
        return self.directions.shape[1]


@dataclass
class ScatterModel:
    """Centered-data summary: overall mean, per-class centroids and counts,
    plus the stacked deviation matrix whose Gram gives the weighted scatter
    (only materialized for finite gamma)."""

    overall_mean: np.ndarray
    centered_data: np.ndarray
    centroids: np.ndarray
    counts: np.ndarray
    gamma: float
    deviation_rows: np.ndarray | None

    @classmethod
    def from_dataset(cls, ds: LabeledDataset, gamma: float) -> "ScatterModel":
        _check_gamma(gamma, allow_inf=True)
        centered, mean = center_columns(ds.data)
        cds = LabeledDataset(centered, ds.labels)
        centroids, counts = class_statistics(cds)
        stack = deviation_stack(cds, gamma) if math.isfinite(gamma) else None
        return cls(mean, centered, centroids, counts, gamma, stack)


def _check_gamma(gamma: float, allow_inf: bool = False) -> None:
    if allow_inf and gamma == GAMMA_INF:
        return
    if not (isinstance(gamma, (int, float)) and math.isfinite(gamma) and gamma > 0):
        raise InvalidInput(f"gamma must be a finite positive number, got {gamma!r}")


def center_columns(raw) -> tuple[np.ndarray, np.ndarray]:
    """Subtract column means; returns (centered, mean)."""
    raw = _as_float_matrix(raw)
    if raw.size == 0:
        raise InvalidInput("cannot center an empty matrix")
    mean = raw.mean(axis=0)
    return raw - mean, mean


def class_statistics(ds: LabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-class centroids (K x p) and counts of a (centered) dataset."""
    centroids = np.empty((ds.n_classes, ds.p))
    for k, idx in enumerate(ds.class_indices):
        centroids[k] = ds.data[idx].mean(axis=0)
    return centroids, ds.class_counts.copy()


def _deviations_and_centroid_rows(ds: LabeledDataset) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Within-class deviations (n x p) and centroid offsets (K x p).

    The overall mean is subtracted from the centroids so the Gram identity
    below holds whether or not the caller pre-centered the data.
    """
    centroids, counts = class_statistics(ds)
    deviations = ds.data - centroids[ds.labels - 1]
    overall = counts @ centroids / ds.n
    return deviations, centroids - overall, counts


def scatter_matrices(
    ds: LabeledDataset, gamma: float, max_materialize: int = MATERIALIZE_GUARD
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Within (W), between (B) and weighted total (W + gamma*B) scatter.

    Materializes dense p x p matrices, so it is guarded to small p; use
    :func:`top_principal_directions` for the large-p path.
    """
    _check_gamma(gamma)
    if ds.p > max_materialize:
        raise DimensionGuard(
            f"p={ds.p} exceeds the materialization guard ({max_materialize})"
        )
    deviations, offsets, counts = _deviations_and_centroid_rows(ds)
    w = deviations.T @ deviations / ds.n
    b = (offsets * counts[:, None]).T @ offsets / ds.n
    w = 0.5 * (w + w.T)
    b = 0.5 * (b + b.T)
    return w, b, w + gamma * b


def deviation_stack(ds: LabeledDataset, gamma: float) -> np.ndarray:
    """The (n+K) x p stack of within-class deviations and weighted centroid
    offsets; its Gram matrix over n equals the weighted total scatter."""
    _check_gamma(gamma)
    deviations, offsets, counts = _deviations_and_centroid_rows(ds)
    weighted = np.sqrt(gamma * counts)[:, None] * offsets
    return np.vstack([deviations, weighted])


def _rank_tolerance(largest: float, *dims: int) -> float:
    return max(dims) * np.finfo(np.float64).eps * max(largest, 0.0)


def _fix_signs(u: np.ndarray) -> np.ndarray:
    """Make each column's largest-magnitude entry positive (in place)."""
    if u.shape[1]:
        lead = np.abs(u).argmax(axis=0)
        flip = u[lead, np.arange(u.shape[1])] < 0
        u[:, flip] *= -1.0
    return u


def _basis_from_small_side(rows: np.ndarray, divisor: float, p: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Eigendecompose rows @ rows.T / divisor and map eigenvectors back to
    feature space, discarding directions below the numerical-rank cutoff.

    Returns (directions p x r, eigenvalues length r, rank r)."""
    m = rows.shape[0]
    gram = rows @ rows.T / divisor
    gram = 0.5 * (gram + gram.T)
    evals, vecs = np.linalg.eigh(gram)
    evals = evals[::-1]
    vecs = vecs[:, ::-1]
    tol = _rank_tolerance(evals[0] if m else 0.0, m, p)
    rank = int(np.count_nonzero(evals > tol))
    directions = rows.T @ vecs[:, :rank]
    norms = np.linalg.norm(directions, axis=0)
    directions /= norms
    _fix_signs(directions)
    return directions, evals[:rank], rank


def top_principal_directions(ds: LabeledDataset, gamma: float, q: int) -> ProjectionBasis:
    """Leading q eigenvectors of the weighted total scatter via the small side.

    For finite gamma the (n+K) x (n+K) Gram of the deviation stack is
    eigendecomposed and its eigenvectors are mapped back through the stack
    and column-normalized, which costs O(n^2 p).  For ``gamma == GAMMA_INF``
    the basis spans the class centroids, ordered by between-class
    eigenvalue, realizing the infinite-weight limit exactly.

    If q exceeds the numerical rank, the basis is truncated to the rank and
    flagged ``rank_deficient`` rather than padded with arbitrary directions.
    """
    _check_gamma(gamma, allow_inf=True)
    limit = min(ds.p, ds.n + ds.n_classes)
    if not (1 <= q <= limit):
        raise InvalidInput(f"q must satisfy 1 <= q <= min(p, n+K) = {limit}, got {q}")
    if gamma == GAMMA_INF:
        _, offsets, counts = _deviations_and_centroid_rows(ds)
        rows = np.sqrt(counts / ds.n)[:, None] * offsets
        directions, evals, rank = _basis_from_small_side(rows, 1.0, ds.p)
    else:
        stack = deviation_stack(ds, gamma)
        directions, evals, rank = _basis_from_small_side(stack, float(ds.n), ds.p)
    keep = min(q, rank)
    return ProjectionBasis(
        directions=directions[:, :keep],
        eigenvalues=evals[:keep],
        gamma=gamma,
        rank_deficient=rank < q,
    )


def principal_angles(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Canonical angles (radians, nondecreasing) between the column spans.

    Delegates to the SVD-based routine with the small-angle (sine)
    refinement, so angles below 1e-8 are resolved accurately.
    """
    if u.shape[1] == 0 or v.shape[1] == 0:
        return np.zeros(0)
    return scipy.linalg.subspace_angles(u, v)[::-1]


def orthonormal_columns(a: np.ndarray, tol_scale: float = 1.0) -> np.ndarray:
    """Orthonormal basis of the column span of ``a`` (rank-truncated SVD)."""
    if a.size == 0:
        return a.reshape(a.shape[0], 0)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0:
        return u[:, :0]
    tol = tol_scale * max(a.shape) * np.finfo(np.float64).eps * s[0]
    return u[:, : int(np.count_nonzero(s > tol))]
