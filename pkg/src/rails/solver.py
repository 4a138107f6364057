"""Residual-driven low-rank solver for large generalized Lyapunov equations.

Given actions of A and M and a tall noise factor B, the solver maintains an
orthonormal search space V and the projected small equation

    (V'AV) T (V'MV)' + (V'MV) T (V'AV)' + (V'B)(V'B)' = 0,

solved densely each sweep. The residual

    R = A C M' + M C A' + B B',  C = V T V',

is never formed: its dominant eigenpairs come from Lanczos on the implicit
action R x = (AV) T (MV)'x + (MV) T (AV)'x + B (B'x), using cached products
AV and MV. The space grows by the top residual eigenvectors (or their
inverse images under A for the inverse variant) until the relative spectral
norm ||R||_2 / ||BB'||_2 drops below the tolerance twice, with a
rank-trimming restart in between; periodic restarts every ``restart_period``
sweeps keep the space from growing without bound on hard problems.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .dae import SchurOperator, partition, recover_full_covariance
from .dense_lyap import ProjectedSystem, solve_projected
from .errors import SingularMatrixError
from .lowrank import LowRankSolution
from .matrices import (
    LanczosOptions,
    SymmetricOperator,
    as_matrix,
    check_sparse,
    imvp_total,
    lanczos_topk,
    mvp_total,
    orthonormalize,
    reset_counters,
    sparse_apply,
)

__all__ = [
    "LyapunovProblem",
    "SolverOptions",
    "SolveReport",
    "ResidualEstimate",
    "solve",
    "solve_dae",
    "residual_norm_and_vectors",
    "restart",
]

_DROP_TOL = 1e-8
# Residual-norm estimation inside the solve loop. Tighter than the
# lanczos_topk defaults: the convergence certificate leans on it.
_RESIDUAL_LANCZOS_STEPS = 30
_RESIDUAL_LANCZOS_TOL = 1e-6


class LyapunovProblem:
    """A C M' + M C A' + B B' = 0 described through operator actions.

    Parameters
    ----------
    a : sparse matrix or SchurOperator
        The stiffness action. A sparse matrix gains inverse products
        (for the inverse variant) through a lazily computed LU.
    m : sparse matrix or None
        Mass action; None means identity (applications are free and not
        counted as MVPs).
    b : ndarray (n, s), s >= 1.
    """

    def __init__(self, a, m, b):
        if isinstance(a, SchurOperator):
            self._a_op = a
            self._a_mat = None
            n = a.dim
        else:
            self._a_mat = check_sparse(a)
            self._a_op = None
            n = self._a_mat.shape[0]
            if self._a_mat.shape != (n, n):
                raise ValueError("A must be square")
        if m is None:
            self._m_mat = None
        else:
            self._m_mat = check_sparse(m)
            if self._m_mat.shape != (n, n):
                raise ValueError("M must match A in size")
        self.b = as_matrix(b)
        if self.b.shape[0] != n:
            raise ValueError(f"B has {self.b.shape[0]} rows, expected {n}")
        if self.b.shape[1] < 1:
            raise ValueError("B must have at least one column")
        self.dimension = n
        self._a_lu = None

    def apply_a(self, x, transpose=False):
        if self._a_op is not None:
            return self._a_op.apply(x, transpose=transpose)
        return sparse_apply(self._a_mat, x, transpose=transpose)

    def apply_m(self, x, transpose=False):
        if self._m_mat is None:
            return np.array(x, dtype=np.float64, copy=True)
        return sparse_apply(self._m_mat, x, transpose=transpose)

    def apply_a_inverse(self, x):
        """A^{-1} x, available for sparse A and Schur operators."""
        if self._a_op is not None:
            return self._a_op.solve(x)
        if self._a_lu is None:
            try:
                self._a_lu = spla.splu(self._a_mat.tocsc())
            except RuntimeError as exc:
                raise SingularMatrixError(
                    f"A is singular, inverse products unavailable: {exc}"
                ) from exc
        from .matrices import add_imvps

        x = np.asarray(x, dtype=np.float64)
        vec_in = x.ndim == 1
        if vec_in:
            x = x.reshape(-1, 1)
        add_imvps(x.shape[1])
        y = self._a_lu.solve(x)
        return y[:, 0] if vec_in else y


@dataclass
class SolverOptions:
    """Tuning knobs. The defaults are the always-expand-by-3 configuration
    with a loose 1e-2 relative residual target and lossless restarts every
    50 sweeps."""

    expand_m: int = 3
    max_iters: int = 1000
    tol: float = 1e-2
    restart_period: int = 50
    restart_tol: float = 0.0
    restart_tol_growth: float = 1.0
    variant: str = "standard"  # or "inverse"
    initial_space: str = "random"  # random | given | columns_of_b | inverse_applied_to_b
    initial_rank: int | None = None
    initial_v: np.ndarray | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.expand_m < 1:
            raise ValueError("expand_m must be >= 1")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.restart_period < 1:
            raise ValueError("restart_period must be >= 1")
        if self.restart_tol < 0:
            raise ValueError("restart_tol must be >= 0")
        if self.restart_tol_growth < 1:
            raise ValueError("restart_tol_growth must be >= 1")
        if self.variant not in ("standard", "inverse"):
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.initial_space not in (
            "random",
            "given",
            "columns_of_b",
            "inverse_applied_to_b",
        ):
            raise ValueError(f"unknown initial space {self.initial_space!r}")
        if self.initial_space == "given" and self.initial_v is None:
            raise ValueError("initial_space='given' requires initial_v")


@dataclass
class SolveReport:
    iterations: int = 0
    mvp_count: int = 0
    imvp_count: int = 0
    residual_history: list = field(default_factory=list)  # [iteration, rho] pairs
    max_space_dim: int = 0
    final_rank: int = 0
    converged: bool = False
    termination_reason: str = ""

    def to_json_dict(self):
        """The on-disk report schema (field names are frozen)."""
        return {
            "iterations": self.iterations,
            "mvps": self.mvp_count,
            "imvps": self.imvp_count,
            "max_space_dim": self.max_space_dim,
            "final_rank": self.final_rank,
            "converged": self.converged,
            "termination_reason": self.termination_reason,
            "residual_history": [[int(i), float(r)] for i, r in self.residual_history],
        }


@dataclass
class ResidualEstimate:
    norm2: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    lanczos_converged: bool


def _residual_operator(av, mv, t, b):
    """Implicit symmetric action of R = A C M' + M C A' + B B'."""
    n = b.shape[0]

    def matvec(x):
        y = b @ (b.T @ x)
        if t.shape[0]:
            y = y + av @ (t @ (mv.T @ x))
            y = y + mv @ (t @ (av.T @ x))
        return y

    return SymmetricOperator(n, matvec)


def _estimate_residual(av, mv, t, b, m, lanczos_opts):
    op = _residual_operator(av, mv, t, b)
    k = min(m, op.dim)
    res = lanczos_topk(
        op,
        k,
        max_steps=lanczos_opts.max_steps,
        tol=lanczos_opts.tol,
        rng_seed=lanczos_opts.rng_seed,
    )
    norm2 = float(np.abs(res.eigenvalues).max()) if res.eigenvalues.size else 0.0
    return ResidualEstimate(norm2, res.eigenvalues, res.eigenvectors, res.converged)


def residual_norm_and_vectors(problem, sol, m, lanczos_opts=None):
    """Estimate ||R||_2 and the top-|lambda| residual eigenpairs.

    Forms A V and M V once (2 d applications), then runs Lanczos on the
    implicit residual action, which costs no further sparse products.
    Non-convergence of the Lanczos sweep is flagged on the estimate, not
    raised.
    """
    if lanczos_opts is None:
        lanczos_opts = LanczosOptions(
            max_steps=_RESIDUAL_LANCZOS_STEPS, tol=_RESIDUAL_LANCZOS_TOL
        )
    if sol.dimension != problem.dimension:
        raise ValueError("solution and problem dimensions differ")
    if sol.rank:
        av = problem.apply_a(sol.v)
        mv = problem.apply_m(sol.v)
    else:
        av = np.zeros((problem.dimension, 0))
        mv = np.zeros((problem.dimension, 0))
    return _estimate_residual(av, mv, sol.t, problem.b, m, lanczos_opts)


def restart(sol, restart_tol):
    """Trim a low-rank solution to the eigenmodes above ``restart_tol``.

    The core is eigendecomposed, modes with eigenvalue > restart_tol are
    kept and the basis is rotated onto them, so the result has a diagonal
    positive core. Discarding changes C by at most the sum of dropped
    eigenvalue magnitudes; with restart_tol = 0 only nonpositive modes go.
    An empty result (everything discarded) is returned with a warning.
    """
    if sol.rank == 0:
        return sol
    lam, u = np.linalg.eigh(sol.t)
    keep = lam > restart_tol
    if not np.any(keep):
        warnings.warn(
            f"restart with tolerance {restart_tol:.3e} discarded every mode; "
            f"the solution is now empty",
            RuntimeWarning,
            stacklevel=2,
        )
    lam = lam[keep][::-1]
    u = u[:, keep][:, ::-1]
    return LowRankSolution(sol.v @ u, np.diag(lam))


class _State:
    """Search space with cached A V / M V and incrementally grown
    projections. Keeping AV and MV current costs memory but makes both
    the projection updates and every residual Lanczos sweep free of
    sparse products."""

    def __init__(self, problem):
        n = problem.dimension
        s = problem.b.shape[1]
        self.problem = problem
        self.v = np.zeros((n, 0))
        self.av = np.zeros((n, 0))
        self.mv = np.zeros((n, 0))
        self.at = np.zeros((0, 0))
        self.mt = np.zeros((0, 0))
        self.bt = np.zeros((0, s))

    @property
    def dim(self):
        return self.v.shape[1]

    def extend(self, q):
        """Append orthonormal columns and grow the projections by their
        new blocks only."""
        if q.shape[1] == 0:
            return
        p = self.problem
        aq = p.apply_a(q)
        mq = p.apply_m(q)
        d0 = self.dim
        k = q.shape[1]
        at = np.empty((d0 + k, d0 + k))
        mt = np.empty((d0 + k, d0 + k))
        at[:d0, :d0] = self.at
        mt[:d0, :d0] = self.mt
        at[:d0, d0:] = self.v.T @ aq
        mt[:d0, d0:] = self.v.T @ mq
        v_new = np.concatenate([self.v, q], axis=1)
        av_new = np.concatenate([self.av, aq], axis=1)
        mv_new = np.concatenate([self.mv, mq], axis=1)
        at[d0:, :] = q.T @ av_new
        mt[d0:, :] = q.T @ mv_new
        self.v, self.av, self.mv = v_new, av_new, mv_new
        self.at, self.mt = at, mt
        self.bt = np.concatenate([self.bt, q.T @ p.b], axis=0)

    def truncate(self, t, restart_tol):
        """Keep the eigenmodes of ``t`` above restart_tol; rotate the basis
        and congruence-update the projections instead of recomputing them.
        Returns the core diag(kept eigenvalues) matching the new basis."""
        lam, u = np.linalg.eigh(t)
        keep = lam > restart_tol
        lam_kept = lam[keep][::-1]
        u = u[:, keep][:, ::-1]
        self.v = self.v @ u
        self.av = self.av @ u
        self.mv = self.mv @ u
        self.at = u.T @ self.at @ u
        self.mt = u.T @ self.mt @ u
        self.bt = u.T @ self.bt
        return np.diag(lam_kept)


def _initial_space(problem, opts):
    n = problem.dimension
    kind = opts.initial_space
    if kind == "random":
        r = opts.initial_rank if opts.initial_rank else opts.expand_m
        rng = np.random.default_rng(opts.rng_seed)
        w = rng.standard_normal((n, min(r, n)))
    elif kind == "given":
        w = as_matrix(opts.initial_v)
        if w.shape[0] != n:
            raise ValueError(
                f"initial space has {w.shape[0]} rows, problem has {n}"
            )
    elif kind == "columns_of_b":
        w = problem.b
    else:  # inverse_applied_to_b
        w = problem.apply_a_inverse(problem.b)
    q, kept = orthonormalize(w, drop_tol=_DROP_TOL)
    if kept == 0 and kind != "given":
        raise ValueError(f"initial space {kind!r} produced no independent columns")
    return q


def _bb_norm(problem, opts):
    """||BB'||_2, exact up to Lanczos termination (the operator has the
    rank of B, so few steps suffice)."""
    b = problem.b
    op = SymmetricOperator(b.shape[0], lambda x: b @ (b.T @ x))
    steps = min(b.shape[0], b.shape[1] + 20)
    res = lanczos_topk(op, 1, max_steps=max(steps, 5), tol=1e-12,
                       rng_seed=opts.rng_seed + 104729)
    return float(np.abs(res.eigenvalues).max())


def solve(problem, opts=None, callback=None):
    """Run the iteration until the relative residual passes ``opts.tol``
    twice (with a rank-trimming restart between the two passes), the sweep
    budget runs out, or the space stagnates.

    Parameters
    ----------
    problem : LyapunovProblem
    opts : SolverOptions
    callback : callable, optional
        Invoked as callback(iteration, rho, space_dim) after each sweep,
        on the solver's thread.

    Returns
    -------
    (LowRankSolution, SolveReport). The returned core is positive
    definite on its range: nonpositive modes are trimmed on exit.
    ``converged`` is True when the final residual estimate met the
    tolerance, even if the budget ended the run before the confirming
    second pass.
    """
    if opts is None:
        opts = SolverOptions()
    reset_counters()
    report = SolveReport()
    state = _State(problem)
    state.extend(_initial_space(problem, opts))
    report.max_space_dim = state.dim

    bb = _bb_norm(problem, opts)
    bb_floor = max(bb, np.finfo(float).tiny)
    restart_tol = opts.restart_tol
    converged_once = False
    t = np.zeros((0, 0))
    rho = np.inf
    termination = "max_iters"
    conv_now = False

    for it in range(1, opts.max_iters + 1):
        t = solve_projected(ProjectedSystem(state.at, state.mt, state.bt))
        lanczos_opts = LanczosOptions(
            max_steps=_RESIDUAL_LANCZOS_STEPS,
            tol=_RESIDUAL_LANCZOS_TOL,
            rng_seed=opts.rng_seed + 7919 * it,
        )
        est = _estimate_residual(
            state.av, state.mv, t, problem.b, opts.expand_m, lanczos_opts
        )
        rho = est.norm2 / bb_floor
        report.residual_history.append((it, rho))
        report.iterations = it
        if callback is not None:
            callback(it, rho, state.dim)

        conv_now = rho < opts.tol
        if conv_now and converged_once:
            termination = "converged"
            break
        if it == opts.max_iters:
            termination = "max_iters"
            break

        if conv_now or it % opts.restart_period == 0:
            t = state.truncate(t, restart_tol)
            if conv_now:
                converged_once = True

        vecs = est.eigenvectors
        if opts.variant == "inverse":
            vecs = problem.apply_a_inverse(vecs)
        q, kept = orthonormalize(vecs, against=state.v, drop_tol=_DROP_TOL)
        if kept == 0 and not conv_now:
            if opts.restart_tol_growth > 1.0:
                # grow the retention tolerance from the core's own scale so
                # the next trim actually removes something
                scale = float(np.abs(t).max()) if t.size else 0.0
                floor = np.finfo(float).eps * max(scale, np.finfo(float).tiny)
                restart_tol = opts.restart_tol_growth * max(restart_tol, floor)
                t = state.truncate(t, restart_tol)
                report.max_space_dim = max(report.max_space_dim, state.dim)
                continue
            termination = "stagnated"
            break
        state.extend(q)
        report.max_space_dim = max(report.max_space_dim, state.dim)

    # trim nonpositive modes so the returned core is PD on its range;
    # at working precision this perturbs C at rounding level only
    sol = LowRankSolution(state.v, t)
    if sol.rank:
        lam = np.linalg.eigh(sol.t)[0]
        if lam.size and lam.min() <= 0:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                sol = restart(sol, 0.0)

    report.converged = bool(conv_now)
    report.termination_reason = termination
    report.final_rank = sol.rank
    report.mvp_count = mvp_total()
    report.imvp_count = imvp_total()
    return sol, report


def solve_dae(a, m, b, opts=None, callback=None):
    """Partition a DAE pencil, solve the reduced problem, lift the result.

    With no algebraic rows this is exactly ``solve`` on (A, M, B). The
    report counts the recovery solves too.
    """
    sys = partition(a, m, b)
    if sys.is_pass_through():
        mass = check_sparse(m)
        if (mass != sparse.identity(sys.dimension, format="csr")).nnz == 0:
            mass = None
        problem = LyapunovProblem(check_sparse(a), mass, b)
        return solve(problem, opts, callback=callback)
    mass = sys.m22
    ident = sparse.identity(sys.n_differential, format="csr")
    if (mass != ident).nnz == 0:
        mass = None
    problem = LyapunovProblem(SchurOperator(sys), mass, sys.b2)
    sol, report = solve(problem, opts, callback=callback)
    full = recover_full_covariance(sys, sol)
    report.final_rank = full.rank
    report.mvp_count = mvp_total()
    report.imvp_count = imvp_total()
    return full, report
