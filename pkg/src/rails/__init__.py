"""RAILS: residual approximation based iterative Lyapunov solver.

Computes low-rank factorizations C = V T V' of stationary covariance
matrices defined by large, sparse generalized Lyapunov equations

    A C M' + M C A' + B B' = 0,

including pencils with singular mass matrices (differential-algebraic
structure), and provides the analysis and verification tooling around
them: dominant-direction extraction, degenerate Gaussian densities,
brute-force dense oracles and a stochastic simulation cross-check.
"""

from .analysis import EofSet, eofs, gaussian_logpdf, sample_stationary
from .dae import (
    DaeSystem,
    SchurOperator,
    partition,
    recover_full_covariance,
    schur_apply,
)
from .dense_lyap import ProjectedSystem, solve_projected, solve_standard_dense
from .errors import (
    ForcingOnConstraintError,
    GenerationError,
    InvalidCovarianceError,
    NoUniqueSolutionError,
    OracleSizeError,
    RailsError,
    ReductionImpossibleError,
    SimulationBlowupError,
    SingularMatrixError,
    StabilityError,
)
from .lowrank import LowRankSolution
from .matrices import (
    LanczosOptions,
    LanczosResult,
    SymmetricOperator,
    lanczos_topk,
    matrix_operator,
    orthonormalize,
    sparse_apply,
    sparse_from_triplets,
)
from .mmio import (
    load_dense,
    load_solution,
    load_sparse,
    save_dense,
    save_solution,
    save_sparse,
)
from .oracles import (
    SimulationConfig,
    empirical_covariance,
    euler_maruyama_covariance,
    kron_solve,
    kron_solve_dae,
    residual_matrix,
)
from .solver import (
    LyapunovProblem,
    ResidualEstimate,
    SolveReport,
    SolverOptions,
    residual_norm_and_vectors,
    restart,
    solve,
    solve_dae,
)
from .testproblems import ForcingMatrix, gen_dae, gen_diffusion, gen_forcing

__version__ = "0.1.0"

__all__ = [
    "EofSet",
    "eofs",
    "gaussian_logpdf",
    "sample_stationary",
    "DaeSystem",
    "SchurOperator",
    "partition",
    "recover_full_covariance",
    "schur_apply",
    "ProjectedSystem",
    "solve_projected",
    "solve_standard_dense",
    "RailsError",
    "StabilityError",
    "SingularMatrixError",
    "ReductionImpossibleError",
    "ForcingOnConstraintError",
    "NoUniqueSolutionError",
    "OracleSizeError",
    "SimulationBlowupError",
    "InvalidCovarianceError",
    "GenerationError",
    "LowRankSolution",
    "LanczosOptions",
    "LanczosResult",
    "SymmetricOperator",
    "lanczos_topk",
    "matrix_operator",
    "orthonormalize",
    "sparse_apply",
    "sparse_from_triplets",
    "load_dense",
    "load_solution",
    "load_sparse",
    "save_dense",
    "save_solution",
    "save_sparse",
    "SimulationConfig",
    "empirical_covariance",
    "euler_maruyama_covariance",
    "kron_solve",
    "kron_solve_dae",
    "residual_matrix",
    "LyapunovProblem",
    "ResidualEstimate",
    "SolveReport",
    "SolverOptions",
    "residual_norm_and_vectors",
    "restart",
    "solve",
    "solve_dae",
    "ForcingMatrix",
    "gen_dae",
    "gen_diffusion",
    "gen_forcing",
]
