"""Low-rank symmetric factorizations C = V T V'."""

import numpy as np

from .matrices import as_matrix

__all__ = ["LowRankSolution"]


class LowRankSolution:
    """Holds an orthonormal basis ``v`` (n x d) and a small symmetric core
    ``t`` (d x d) representing C = v @ t @ v.T without ever forming C.

    The basis columns are expected orthonormal and ``t`` symmetric; both
    are cheap invariants that the constructor checks up to roundoff.
    """

    def __init__(self, v, t):
        v = as_matrix(v)
        t = as_matrix(t)
        if t.shape[0] != t.shape[1]:
            raise ValueError(f"core must be square, got {t.shape}")
        if v.shape[1] != t.shape[0]:
            raise ValueError(
                f"basis has {v.shape[1]} columns but core is {t.shape[0]} x {t.shape[0]}"
            )
        if t.size and not np.allclose(t, t.T, atol=1e-8 * max(1.0, np.abs(t).max())):
            raise ValueError("core matrix must be symmetric")
        self.v = v
        self.t = 0.5 * (t + t.T) if t.size else t

    @property
    def dimension(self):
        return self.v.shape[0]

    @property
    def rank(self):
        return self.v.shape[1]

    def to_dense(self):
        """Materialize C (only sensible at small n)."""
        if self.rank == 0:
            return np.zeros((self.dimension, self.dimension))
        c = self.v @ self.t @ self.v.T
        return 0.5 * (c + c.T)

    def apply(self, x):
        """C @ x without forming C."""
        x = np.asarray(x, dtype=np.float64)
        if self.rank == 0:
            return np.zeros_like(x)
        return self.v @ (self.t @ (self.v.T @ x))
