"""Reduction of linear constant-coefficient DAE pencils to their dynamic part.

A pencil (A, M) whose mass matrix has zero rows mixes differential and
algebraic variables. ``partition`` classifies the rows, blocks the system
as

    A = [A11 A12]   M = [0  0 ]   B = [0 ]
        [A21 A22]       [0 M22]       [B2]

(in a permuted ordering; the original ordering is retained for recovery)
and factorizes A11 once. The covariance problem then lives on the
differential block with the Schur complement S = A22 - A21 A11^{-1} A12
acting implicitly through ``schur_apply``. ``recover_full_covariance``
maps a low-rank solution of the reduced problem back to the full space.
"""

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .errors import (
    ForcingOnConstraintError,
    ReductionImpossibleError,
    SingularMatrixError,
)
from .lowrank import LowRankSolution
from .matrices import add_imvps, as_matrix, check_sparse, sparse_apply

__all__ = ["DaeSystem", "SchurOperator", "partition", "schur_apply", "recover_full_covariance"]


class DaeSystem:
    """Partitioned DAE data with reusable factorizations.

    Attributes of interest: ``algebraic_rows`` / ``differential_rows``
    (index arrays into the original ordering), the four A blocks, ``m22``,
    ``b2``, and ``a11_lu`` (sparse LU of A11, None in pass-through mode).
    """

    def __init__(self, a, m, b, algebraic_rows, differential_rows):
        self.a_full = a
        self.m_full = m
        self.algebraic_rows = algebraic_rows
        self.differential_rows = differential_rows
        alg, diff = algebraic_rows, differential_rows
        self.a11 = a[alg][:, alg].tocsr()
        self.a12 = a[alg][:, diff].tocsr()
        self.a21 = a[diff][:, alg].tocsr()
        self.a22 = a[diff][:, diff].tocsr()
        self.m22 = m[diff][:, diff].tocsr()
        self.b2 = as_matrix(b[diff, :])
        self.a11_lu = None
        if alg.size:
            try:
                self.a11_lu = spla.splu(self.a11.tocsc())
            except RuntimeError as exc:
                raise ReductionImpossibleError(
                    f"constraint block A11 ({alg.size} x {alg.size}) could not be "
                    f"factorized: {exc}"
                ) from exc
        try:
            self.m22_lu = spla.splu(self.m22.tocsc()) if diff.size else None
        except RuntimeError as exc:
            raise SingularMatrixError(
                f"differential mass block M22 is singular: {exc}"
            ) from exc
        self._a_full_lu = None

    @property
    def n_algebraic(self):
        return self.algebraic_rows.size

    @property
    def n_differential(self):
        return self.differential_rows.size

    @property
    def dimension(self):
        return self.n_algebraic + self.n_differential

    def is_pass_through(self):
        return self.n_algebraic == 0

    def solve_a11(self, x, transpose=False):
        """A11^{-1} x (or A11^{-T} x), counted as IMVPs."""
        x = np.asarray(x, dtype=np.float64)
        vec_in = x.ndim == 1
        if vec_in:
            x = x.reshape(-1, 1)
        add_imvps(x.shape[1])
        y = self.a11_lu.solve(x, trans="T" if transpose else "N")
        return y[:, 0] if vec_in else y

    def solve_full(self, rhs):
        """A^{-1} rhs on the full space, counted as IMVPs.

        Used by the inverse iteration variant: the Schur complement solve
        S^{-1} x is realized as a bordered solve with the whole A.
        """
        if self._a_full_lu is None:
            try:
                self._a_full_lu = spla.splu(self.a_full.tocsc())
            except RuntimeError as exc:
                raise SingularMatrixError(
                    f"full operator A is singular, inverse products unavailable: {exc}"
                ) from exc
        rhs = np.asarray(rhs, dtype=np.float64)
        vec_in = rhs.ndim == 1
        if vec_in:
            rhs = rhs.reshape(-1, 1)
        add_imvps(rhs.shape[1])
        y = self._a_full_lu.solve(rhs)
        return y[:, 0] if vec_in else y


def partition(a, m, b, zero_tol=0.0, relative=False):
    """Split (A, M, B) into algebraic and differential parts.

    Rows of M whose largest entry magnitude is <= ``zero_tol`` (times
    max|M| when ``relative``) are algebraic. B must vanish on those rows:
    white noise cannot force a constraint. With no algebraic rows the
    returned system is a pass-through and no factorization happens.
    """
    a = check_sparse(a)
    m = check_sparse(m)
    b = as_matrix(b)
    n = a.shape[0]
    if a.shape != (n, n) or m.shape != (n, n):
        raise ValueError("A and M must be square matrices of the same size")
    if b.shape[0] != n:
        raise ValueError(f"B has {b.shape[0]} rows, expected {n}")
    tol = zero_tol * (np.abs(m.data).max() if relative and m.nnz else 1.0)
    row_max = np.zeros(n)
    mco = m.tocoo()
    if mco.nnz:
        np.maximum.at(row_max, mco.row, np.abs(mco.data))
    algebraic = np.flatnonzero(row_max <= tol)
    differential = np.flatnonzero(row_max > tol)
    if algebraic.size:
        bad = np.abs(b[algebraic, :]).max(initial=0.0)
        if bad > tol:
            rows = algebraic[np.abs(b[algebraic, :]).max(axis=1) > tol]
            raise ForcingOnConstraintError(
                f"B has entries of magnitude up to {bad:.3e} on algebraic "
                f"rows {rows[:5].tolist()}; noise cannot act on constraints"
            )
    return DaeSystem(a, m, b, algebraic, differential)


def schur_apply(sys, x, transpose=False):
    """Apply S = A22 - A21 A11^{-1} A12 (or S') to the columns of x.

    One multiply each with A22, A12 (A21' if transposed) and A21, plus one
    sparse solve with A11, per call. In pass-through mode S is just A.
    """
    if sys.is_pass_through():
        return sparse_apply(sys.a22, x, transpose=transpose)
    if not transpose:
        y = sparse_apply(sys.a22, x)
        z = sys.solve_a11(sparse_apply(sys.a12, x))
        return y - sparse_apply(sys.a21, z)
    y = sparse_apply(sys.a22, x, transpose=True)
    z = sys.solve_a11(sparse_apply(sys.a21, x, transpose=True), transpose=True)
    return y - sparse_apply(sys.a12, z, transpose=True)


class SchurOperator:
    """The reduced operator S exposed with the action interface the solver
    expects (apply / apply transpose / inverse apply)."""

    def __init__(self, sys):
        self.sys = sys
        self.dim = sys.n_differential

    def apply(self, x, transpose=False):
        return schur_apply(self.sys, x, transpose=transpose)

    def solve(self, x):
        """S^{-1} x through a bordered solve with the full A."""
        if self.sys.is_pass_through():
            return self.sys.solve_full(x)
        x = np.asarray(x, dtype=np.float64)
        vec_in = x.ndim == 1
        if vec_in:
            x = x.reshape(-1, 1)
        rhs = np.zeros((self.sys.dimension, x.shape[1]))
        rhs[self.sys.differential_rows, :] = x
        y = self.sys.solve_full(rhs)
        out = y[self.sys.differential_rows, :]
        return out[:, 0] if vec_in else out


def recover_full_covariance(sys, sol):
    """Lift a reduced low-rank solution back to the full variable set.

    The algebraic block of every basis vector is -A11^{-1} A12 v, after
    which the stacked factor W is re-orthonormalized by a QR so the result
    keeps the orthonormal-basis form: with W = Q R, the core becomes
    R T R'. Pass-through systems are returned unchanged.
    """
    if sys.is_pass_through():
        return sol
    if sol.rank == 0:
        return LowRankSolution(
            np.zeros((sys.dimension, 0)), np.zeros((0, 0))
        )
    v = sol.v
    if v.shape[0] != sys.n_differential:
        raise ValueError(
            f"solution lives on {v.shape[0]} rows, expected the "
            f"{sys.n_differential} differential rows"
        )
    top = -sys.solve_a11(sparse_apply(sys.a12, v))
    w = np.zeros((sys.dimension, sol.rank))
    w[sys.algebraic_rows, :] = top
    w[sys.differential_rows, :] = v
    q, r = np.linalg.qr(w)
    t = r @ sol.t @ r.T
    return LowRankSolution(q, 0.5 * (t + t.T))
