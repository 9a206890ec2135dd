"""Quadratic minimization over Stiefel manifolds with quality certificates.

Core pieces: a sequential subspace solver that targets "qualified" critical
points of 1/2 tr(X^T A X C) - tr(B^T X) on St(n, r), reference gradient and
Newton baselines with a closed-form sphere oracle, and a graph pipeline that
casts semi-supervised classification into the same quadratic form.
"""

from .baselines import (
    BaselineOptions,
    multistart_oracle,
    projected_gradient_solve,
    riemannian_gd_solve,
    riemannian_newton_step,
    sphere_trs_oracle,
)
from .bench import BenchRow, run_bench, write_plot_csv, write_rows_csv
from .datasets import gen_circles
from .estimator import SsmGraphClassifier
from .exceptions import (
    CardinalityError,
    ConductanceUndefinedError,
    ConvergenceFailureError,
    DegenerateInstanceError,
    DuplicatePointsError,
    FormatError,
    IndefiniteOperatorError,
    NormBoundError,
    NotCriticalError,
    NotDegenerateError,
    OrthoquadError,
    RankDeficiencyError,
    SymmetryError,
)
from .graphs import (
    WeightedGraph,
    component_count,
    conductance,
    knn_gaussian_graph,
    laplacian,
)
from .linalg import (
    EigPairs,
    SparseSymOperator,
    cg_solve,
    dense_sym_eig,
    nuclear_norm,
    smallest_eigenpairs,
    thin_qr,
)
from .model import (
    GroundSpectrum,
    QuadraticProblem,
    QualifiedCertificate,
    SurrogateModel,
    degenerate_solution,
    euclidean_grad,
    ground_spectrum,
    hessian_apply,
    lift,
    lower_bound,
    multiplier,
    objective,
    problem_from_arrays,
    qualified_certificate,
    riemannian_grad,
    safeguard,
    second_order_margin,
    sigma_nondegeneracy,
    surrogate,
)
from .semisup import (
    ClassificationResult,
    SemiSupInstance,
    assemble,
    assemble_graph,
    balanced_cardinality,
    classify,
    embedding_energy,
    rank_reduce,
)
from .solver import (
    IterationRecord,
    SolveReport,
    SsmOptions,
    build_subspace,
    initialize,
    newton_direction_subspace,
    reduce_model,
    sqp_direction,
    ssm_solve,
    subproblem_solve,
)
from .stiefel import (
    orthonormal_complement,
    polar_project,
    random_point,
    retract,
    tangent_project,
    test_curve,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # linalg
    "EigPairs",
    "SparseSymOperator",
    "dense_sym_eig",
    "smallest_eigenpairs",
    "cg_solve",
    "thin_qr",
    "nuclear_norm",
    # manifold
    "polar_project",
    "tangent_project",
    "retract",
    "random_point",
    "test_curve",
    "orthonormal_complement",
    # model
    "GroundSpectrum",
    "QuadraticProblem",
    "SurrogateModel",
    "QualifiedCertificate",
    "ground_spectrum",
    "problem_from_arrays",
    "objective",
    "euclidean_grad",
    "riemannian_grad",
    "multiplier",
    "hessian_apply",
    "lift",
    "surrogate",
    "sigma_nondegeneracy",
    "qualified_certificate",
    "safeguard",
    "lower_bound",
    "degenerate_solution",
    "second_order_margin",
    # solver
    "SsmOptions",
    "IterationRecord",
    "SolveReport",
    "initialize",
    "sqp_direction",
    "build_subspace",
    "reduce_model",
    "newton_direction_subspace",
    "subproblem_solve",
    "ssm_solve",
    # baselines
    "BaselineOptions",
    "projected_gradient_solve",
    "riemannian_gd_solve",
    "riemannian_newton_step",
    "sphere_trs_oracle",
    "multistart_oracle",
    # graphs and pipeline
    "WeightedGraph",
    "knn_gaussian_graph",
    "laplacian",
    "conductance",
    "component_count",
    "SemiSupInstance",
    "ClassificationResult",
    "balanced_cardinality",
    "assemble",
    "assemble_graph",
    "rank_reduce",
    "classify",
    "embedding_energy",
    "SsmGraphClassifier",
    "gen_circles",
    # bench
    "BenchRow",
    "run_bench",
    "write_rows_csv",
    "write_plot_csv",
    # exceptions
    "OrthoquadError",
    "SymmetryError",
    "RankDeficiencyError",
    "ConvergenceFailureError",
    "IndefiniteOperatorError",
    "DegenerateInstanceError",
    "NotDegenerateError",
    "NormBoundError",
    "NotCriticalError",
    "CardinalityError",
    "DuplicatePointsError",
    "ConductanceUndefinedError",
    "FormatError",
]
