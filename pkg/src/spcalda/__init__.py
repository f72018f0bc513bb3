"""Supervised-PCA reduced-rank LDA for high-dimensional multi-class data.

Fit a classifier by projecting onto the top principal directions of the
weighted total scatter ``W + gamma * B`` and running standard LDA in the
reduced space; tune (gamma, q) by stratified cross-validation.  The classic
baselines (PCA+LDA, centroid-span LDA, the independence rule, the Bayes
oracle) and six Monte-Carlo benchmark scenarios are included, along with
numerical verifiers for the structural identities the method relies on.
"""

from .classifiers import (
    CompoundSymmetryWithin,
    ExplicitWithin,
    FisherDirections,
    IdentityWithin,
    OracleSpec,
    ReducedLDAModel,
    SpikedWithin,
    bayes_oracle_predict,
    fisher_directions,
    fit_diagonal_lda,
    fit_lda,
    fit_pcalda,
    fit_reduced_lda,
    fit_spcalda,
    fit_srrlda,
    model_from_json,
    model_to_json,
    predict,
)
from .exceptions import (
    ConfigError,
    DegenerateModelWarning,
    DimensionGuard,
    DimensionMismatch,
    GapTooSmall,
    InvalidInput,
    ParseError,
    PreconditionViolated,
    RankDeficiencyWarning,
    SingularWithinEstimate,
    SpcaldaError,
    VerificationError,
)
from .linalg import (
    GAMMA_INF,
    LabeledDataset,
    ProjectionBasis,
    ScatterModel,
    center_columns,
    class_statistics,
    deviation_stack,
    principal_angles,
    scatter_matrices,
    top_principal_directions,
)
from .model_selection import (
    CVGrid,
    CVReport,
    cv_select,
    format_error_table,
    report_from_json,
    report_to_json,
    stratified_kfold,
)
from .scenarios import (
    BenchmarkReport,
    ScenarioSpec,
    default_specs,
    generate_scenario,
    run_benchmark,
    sample_compound_symmetry,
    scenario_means,
)
from .theory import (
    SpikedModel,
    builtin_battery,
    random_spiked_model,
    verify_fisher_span,
    verify_projection_preserves_boundary,
    verify_small_side_equivalence,
    verify_trailing_orthogonality,
    verify_trailing_orthogonality_mixture,
)

__version__ = "0.1.0"
