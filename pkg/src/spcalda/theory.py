"""Numerical verifiers for the structural identities behind the method.

Each verifier evaluates an algebraic identity that should hold exactly
(violation at floating-point noise level) on instances with the right
structure, and visibly fails on documented counterexamples, so the checks
have power.  They double as the backbone of the property-test suite and as
the CLI ``verify`` battery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .classifiers import (
    SpikedWithin,
    as_within_covariance,
    fisher_directions,
    within_estimate_matrix,
)
from .exceptions import (
    GapTooSmall,
    InvalidInput,
    PreconditionViolated,
    VerificationError,
)
from .linalg import (
    LabeledDataset,
    MATERIALIZE_GUARD,
    _rank_tolerance,
    center_columns,
    orthonormal_columns,
    principal_angles,
    scatter_matrices,
    top_principal_directions,
)

#: Violation threshold for algebraic identities on instances with p <= 200.
IDENTITY_TOL = 1e-8
#: Subspace agreement threshold (largest principal angle, radians).
ANGLE_TOL = 1e-6
#: Violation that counterexample (negative-control) instances must exceed.
NEGATIVE_CONTROL_LEVEL = 1e-3
#: Eigen-gap below which the leading/trailing split is ill-defined.
GAP_TOL = 1e-10


@dataclass
class SpikedModel:
    """Population model with a spiked within-class covariance.

    ``Sigma_w = base * I + sum_i (spike_values_i - base) xi_i xi_i'`` with
    orthonormal spike directions and ``spike_values > base > 0``.  Class
    centroids satisfy the centering convention sum_k priors_k mu_k = 0.
    Optionally each class is a mixture over prototypes; then
    ``prototype_priors`` carries the joint weight of each prototype and the
    class centroid is the prototype average.
    """

    base: float
    spike_values: np.ndarray
    spike_directions: np.ndarray
    centroids: np.ndarray
    priors: np.ndarray
    prototype_means: np.ndarray | None = None
    prototype_priors: np.ndarray | None = None
    prototype_class: np.ndarray | None = None

    def __post_init__(self):
        self.spike_values = np.asarray(self.spike_values, dtype=np.float64)
        self.spike_directions = np.asarray(self.spike_directions, dtype=np.float64)
        self.centroids = np.asarray(self.centroids, dtype=np.float64)
        self.priors = np.asarray(self.priors, dtype=np.float64)
        if self.base <= 0:
            raise InvalidInput("base eigenvalue must be positive")
        if self.spike_values.size and (
            (np.diff(self.spike_values) > 0).any() or self.spike_values.min() <= self.base
        ):
            raise InvalidInput("spike values must be nonincreasing and exceed the base")
        gram = self.spike_directions.T @ self.spike_directions
        if np.abs(gram - np.eye(self.s)).max() > 1e-10:
            raise InvalidInput("spike directions must be orthonormal")
        if self.n_classes < 2:
            raise InvalidInput("need at least 2 classes")
        if abs(self.priors.sum() - 1.0) > 1e-10 or (self.priors <= 0).any():
            raise InvalidInput("priors must be positive and sum to one")
        scale = max(1.0, np.abs(self.centroids).max())
        if np.abs(self.priors @ self.centroids).max() > 1e-10 * scale:
            raise InvalidInput("weighted centroid sum must vanish")
        if self.prototype_means is not None:
            self.prototype_means = np.asarray(self.prototype_means, dtype=np.float64)
            self.prototype_priors = np.asarray(self.prototype_priors, dtype=np.float64)
            self.prototype_class = np.asarray(self.prototype_class, dtype=np.int64)
            if abs(self.prototype_priors.sum() - 1.0) > 1e-10:
                raise InvalidInput("prototype priors must sum to one")
            for k in range(1, self.n_classes + 1):
                mask = self.prototype_class == k
                mean_k = self.prototype_priors[mask] @ self.prototype_means[mask]
                mean_k /= self.priors[k - 1]
                if np.abs(mean_k - self.centroids[k - 1]).max() > 1e-8 * scale:
                    raise InvalidInput(f"class {k} centroid does not match its prototypes")

    @property
    def p(self) -> int:
        return self.centroids.shape[1]

    @property
    def s(self) -> int:
        return self.spike_values.size

    @property
    def n_classes(self) -> int:
        return self.centroids.shape[0]

    @property
    def r_total(self) -> int:
        if self.prototype_means is None:
            return self.n_classes
        return self.prototype_means.shape[0]

    def within(self) -> SpikedWithin:
        return SpikedWithin(self.base, self.spike_values, self.spike_directions)

    def within_matrix(self) -> np.ndarray:
        return self.within().matrix(self.p)


def random_orthonormal(rng: np.random.Generator, p: int, s: int) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((p, max(s, 1))))
    return q[:, :s]


def random_spiked_model(
    rng: np.random.Generator,
    p: int,
    s: int,
    n_classes: int,
    base: float = 1.0,
    spike_low: float = 3.0,
    spike_high: float = 10.0,
    mean_scale: float = 1.0,
    prototypes_per_class: tuple | None = None,
) -> SpikedModel:
    """Draw a valid random instance (used by tests and the CLI battery)."""
    values = np.sort(rng.uniform(spike_low, spike_high, size=s))[::-1]
    directions = random_orthonormal(rng, p, s)
    priors = rng.uniform(0.5, 1.5, size=n_classes)
    priors /= priors.sum()
    if prototypes_per_class is None:
        centroids = mean_scale * rng.standard_normal((n_classes, p))
        centroids -= priors @ centroids
        return SpikedModel(base, values, directions, centroids, priors)
    proto_means, proto_priors, proto_class = [], [], []
    for k, r_k in enumerate(prototypes_per_class, start=1):
        weights = rng.uniform(0.5, 1.5, size=r_k)
        weights /= weights.sum()
        for t in range(r_k):
            proto_means.append(mean_scale * rng.standard_normal(p))
            proto_priors.append(priors[k - 1] * weights[t])
            proto_class.append(k)
    proto_means = np.array(proto_means)
    proto_priors = np.array(proto_priors)
    proto_class = np.array(proto_class)
    proto_means -= proto_priors @ proto_means
    centroids = np.array(
        [
            proto_priors[proto_class == k] @ proto_means[proto_class == k] / priors[k - 1]
            for k in range(1, n_classes + 1)
        ]
    )
    return SpikedModel(
        base, values, directions, centroids, priors, proto_means, proto_priors, proto_class
    )


def _pair_differences(means: np.ndarray) -> np.ndarray:
    """Columns mu_k - mu_l over all pairs k < l."""
    k = means.shape[0]
    cols = [means[a] - means[b] for a in range(k) for b in range(a + 1, k)]
    return np.array(cols).T


def trailing_orthogonality_violation(
    within: np.ndarray,
    means: np.ndarray,
    weights: np.ndarray,
    split: int,
    gamma: float | None = None,
    rho=None,
) -> float:
    """Core check: after eigendecomposing the mean-augmented covariance, are
    the trailing (p - split) eigenvectors orthogonal to the whitened mean
    differences?

    The augmented matrix is ``within + gamma * sum_k weights_k mu_k mu_k'``
    or, with a rho vector, ``within + sum_k rho_k mu_k mu_k'``.  Each
    whitened difference is normalized to unit length so the returned
    violation is scale invariant.  Raises :class:`GapTooSmall` when the
    spectrum does not separate at the split.
    """
    within = np.asarray(within, dtype=np.float64)
    p = within.shape[0]
    if not 0 < split < p:
        raise InvalidInput(f"split must lie strictly inside 0..p, got {split}")
    if (gamma is None) == (rho is None):
        raise InvalidInput("provide exactly one of gamma or rho")
    if gamma is not None:
        scaled = gamma * weights
    else:
        scaled = np.asarray(rho, dtype=np.float64)
        if scaled.shape != (means.shape[0],) or (scaled <= 0).any():
            raise InvalidInput("rho must be a positive vector, one entry per mean")
    augmented = within + (means.T * scaled) @ means
    augmented = 0.5 * (augmented + augmented.T)
    evals, vecs = np.linalg.eigh(augmented)
    evals = evals[::-1]
    vecs = vecs[:, ::-1]
    if evals[split - 1] - evals[split] < GAP_TOL:
        raise GapTooSmall(
            f"eigen-gap at split {split} is {evals[split - 1] - evals[split]:.3e}"
        )
    trailing = vecs[:, split:]
    diffs = _pair_differences(means)
    beta = cho_solve(cho_factor(within, lower=True), diffs)
    beta /= np.linalg.norm(beta, axis=0)
    return float(np.abs(trailing.T @ beta).max())


def verify_trailing_orthogonality(
    model: SpikedModel,
    gamma: float | None = None,
    rho=None,
    within_override: np.ndarray | None = None,
    split: int | None = None,
) -> float:
    """Spiked-covariance check on class centroids: the trailing
    ``p - (s + K - 1)`` eigenvectors of the weighted covariance carry no
    discriminant information.

    ``within_override`` substitutes a (possibly non-spiked) covariance while
    keeping the model's split, which is how the negative control exercises
    the check's power.
    """
    if split is None:
        split = model.s + model.n_classes - 1
    within = model.within_matrix() if within_override is None else within_override
    return trailing_orthogonality_violation(
        within, model.centroids, model.priors, split, gamma=gamma, rho=rho
    )


def verify_trailing_orthogonality_mixture(
    model: SpikedModel, gamma: float, split: int | None = None
) -> float:
    """Mixture variant: prototypes play the role of classes, so the split
    moves to ``s + R - 1`` with R the total prototype count."""
    if model.prototype_means is None:
        raise InvalidInput("model has no mixture layout")
    if split is None:
        split = model.s + model.r_total - 1
    return trailing_orthogonality_violation(
        model.within_matrix(),
        model.prototype_means,
        model.prototype_priors,
        split,
        gamma=gamma,
    )


def nonspiked_perturbation(model: SpikedModel, rng: np.random.Generator, magnitude: float = 0.5):
    """A rank-one bump along a direction outside span{spikes, centroids},
    which breaks the spiked structure the orthogonality check relies on."""
    span = np.hstack([model.spike_directions, model.centroids.T])
    basis = orthonormal_columns(span)
    e = rng.standard_normal(model.p)
    e -= basis @ (basis.T @ e)
    e /= np.linalg.norm(e)
    return model.within_matrix() + magnitude * np.outer(e, e)


def verify_small_side_equivalence(
    ds: LabeledDataset, gamma: float, max_materialize: int = MATERIALIZE_GUARD
) -> tuple[float, float]:
    """Compare the O(n^2 p) small-side eigendecomposition of the weighted
    total scatter against the dense p x p path.

    Returns (max relative eigenvalue discrepancy, largest principal angle
    between the top-rank subspaces).
    """
    if ds.p > max_materialize:
        raise InvalidInput(f"p={ds.p} exceeds the materialization guard")
    centered, _ = center_columns(ds.data)
    cds = LabeledDataset(centered, ds.labels)
    _, _, total = scatter_matrices(cds, gamma, max_materialize)
    evals, vecs = np.linalg.eigh(total)
    evals = evals[::-1]
    vecs = vecs[:, ::-1]
    tol = _rank_tolerance(evals[0], ds.p, ds.n + ds.n_classes)
    rank_direct = int(np.count_nonzero(evals > tol))
    basis = top_principal_directions(cds, gamma, min(ds.p, ds.n + ds.n_classes))
    q = min(rank_direct, basis.q)
    direct = evals[:q]
    small = basis.eigenvalues[:q]
    eig_gap = float(np.abs(direct - small).max() / max(evals[0], np.finfo(float).tiny))
    angle = float(principal_angles(vecs[:, :q], basis.directions[:, :q]).max()) if q else 0.0
    return eig_gap, angle


def verify_projection_preserves_boundary(within, centroids, h: np.ndarray) -> float:
    """Check that solving the discriminant problem inside a subspace that
    contains every whitened mean difference reproduces those differences:
    ``(H' Sigma H)^{-1} H' (mu_k - mu_l) = H' Sigma^{-1} (mu_k - mu_l)``.

    ``h`` is p x q with orthonormal columns.  Raises
    :class:`PreconditionViolated` when some whitened difference has a
    component outside span(h).
    """
    within = as_within_covariance(within)
    centroids = np.asarray(centroids, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if np.abs(h.T @ h - np.eye(h.shape[1])).max() > 1e-8:
        raise InvalidInput("h must have orthonormal columns")
    diffs = _pair_differences(centroids)
    beta = within.apply_inverse(diffs)
    residual = beta - h @ (h.T @ beta)
    norms = np.linalg.norm(beta, axis=0)
    if (np.linalg.norm(residual, axis=0) > 1e-8 * norms).any():
        raise PreconditionViolated("subspace does not contain all whitened differences")
    projected_within = h.T @ within.apply(h)
    projected_within = 0.5 * (projected_within + projected_within.T)
    lhs = np.linalg.solve(projected_within, h.T @ diffs)
    return float(np.abs(lhs - h.T @ beta).max())


def verify_fisher_span(ds: LabeledDataset, within_estimate="pooled-W") -> np.ndarray:
    """Check that the Fisher directions span the whitened centroid space.

    Returns the principal angles between span{v_1..v_r} and
    ``What^{-1} span{centroid differences}``; raises
    :class:`VerificationError` if the dimensions disagree with rank(B).
    """
    centered, _ = center_columns(ds.data)
    cds = LabeledDataset(centered, ds.labels)
    fd = fisher_directions(cds, within_estimate)
    what, _ = within_estimate_matrix(cds, within_estimate)
    _, b, _ = scatter_matrices(cds, 1.0)
    evals_b = np.linalg.eigvalsh(b)
    rank_b = int(np.count_nonzero(evals_b > _rank_tolerance(float(evals_b[-1]), ds.p)))
    centroids = np.array([cds.data[idx].mean(axis=0) for idx in cds.class_indices])
    diffs = _pair_differences(centroids)
    target = orthonormal_columns(np.linalg.solve(what, diffs))
    span = orthonormal_columns(fd.directions)
    if fd.r != rank_b or target.shape[1] != rank_b or span.shape[1] != rank_b:
        raise VerificationError(
            f"dimension mismatch: fisher r={fd.r}, rank(B)={rank_b}, "
            f"whitened span dim={target.shape[1]}"
        )
    return principal_angles(span, target)


# --------------------------------------------------------------------------
# Built-in battery for the CLI


@dataclass
class CheckResult:
    name: str
    value: float
    threshold: float
    comparison: str  # "<" or ">"

    @property
    def passed(self) -> bool:
        return self.value < self.threshold if self.comparison == "<" else self.value > self.threshold


def builtin_battery(seed: int = 20240601) -> list:
    """Run every verifier on fixed constructed instances, including the
    negative controls, and report measured violations."""
    rng = np.random.default_rng(seed)
    results = []

    model = random_spiked_model(rng, p=24, s=3, n_classes=4)
    results.append(CheckResult(
        "trailing orthogonality (weighted)",
        verify_trailing_orthogonality(model, gamma=2.0),
        IDENTITY_TOL, "<",
    ))
    rho = rng.uniform(0.5, 2.0, size=model.n_classes)
    results.append(CheckResult(
        "trailing orthogonality (per-class weights)",
        verify_trailing_orthogonality(model, rho=rho),
        IDENTITY_TOL, "<",
    ))
    scalar_model = random_spiked_model(rng, p=18, s=0, n_classes=3)
    results.append(CheckResult(
        "trailing orthogonality (scalar within)",
        verify_trailing_orthogonality(scalar_model, gamma=1.5),
        IDENTITY_TOL, "<",
    ))
    mixture = random_spiked_model(rng, p=20, s=2, n_classes=2, prototypes_per_class=(2, 1))
    results.append(CheckResult(
        "trailing orthogonality (mixture prototypes)",
        verify_trailing_orthogonality_mixture(mixture, gamma=2.0),
        IDENTITY_TOL, "<",
    ))
    perturbed = nonspiked_perturbation(model, rng)
    results.append(CheckResult(
        "negative control: non-spiked perturbation",
        verify_trailing_orthogonality(model, gamma=2.0, within_override=perturbed),
        NEGATIVE_CONTROL_LEVEL, ">",
    ))
    results.append(CheckResult(
        "negative control: mixture split too early",
        verify_trailing_orthogonality_mixture(
            mixture, gamma=2.0, split=mixture.s + mixture.n_classes - 1
        ),
        NEGATIVE_CONTROL_LEVEL, ">",
    ))

    data = rng.standard_normal((30, 100))
    labels = rng.integers(1, 4, size=30)
    labels[:3] = [1, 2, 3]
    ds = LabeledDataset(data, labels)
    eig_gap, angle = verify_small_side_equivalence(ds, 0.5)
    results.append(CheckResult("small-side eigenvalue agreement", eig_gap, IDENTITY_TOL, "<"))
    results.append(CheckResult("small-side subspace agreement", angle, ANGLE_TOL, "<"))

    within = model.within()
    diffs = _pair_differences(model.centroids)
    beta = within.apply_inverse(diffs)
    h_min = orthonormal_columns(beta)
    results.append(CheckResult(
        "projected boundary (minimal subspace)",
        verify_projection_preserves_boundary(within, model.centroids, h_min),
        IDENTITY_TOL, "<",
    ))
    extra = rng.standard_normal((model.p, 3))
    h_big = orthonormal_columns(np.hstack([h_min, extra]))
    results.append(CheckResult(
        "projected boundary (enlarged subspace)",
        verify_projection_preserves_boundary(within, model.centroids, h_big),
        IDENTITY_TOL, "<",
    ))

    fisher_data = rng.standard_normal((80, 6)) + rng.standard_normal((80, 1))
    fisher_labels = np.repeat([1, 2, 3, 4], 20)
    fisher_data[fisher_labels == 2] += 1.0
    fisher_data[fisher_labels == 3, :3] -= 1.5
    fisher_data[fisher_labels == 4, 2:] += 0.8
    fds = LabeledDataset(fisher_data, fisher_labels)
    results.append(CheckResult(
        "fisher span (pooled within)",
        float(verify_fisher_span(fds, "pooled-W").max()),
        ANGLE_TOL, "<",
    ))
    results.append(CheckResult(
        "fisher span (diagonal within)",
        float(verify_fisher_span(fds, "diagonal-Dw").max()),
        ANGLE_TOL, "<",
    ))
    return results


def format_battery(results) -> str:
    lines = []
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(
            f"{status}  {r.name.ljust(width)}  measured={r.value:.3e}  "
            f"required {r.comparison} {r.threshold:.0e}"
        )
    total = sum(r.passed for r in results)
    lines.append(f"{total}/{len(results)} checks passed")
    return "\n".join(lines)
