import numpy as np
import pytest

from conftest import random_hurwitz, random_spd
from rails.dense_lyap import (
    DIMENSION_CAP,
    ProjectedSystem,
    solve_projected,
    solve_standard_dense,
)
from rails.errors import SingularMatrixError, StabilityError
from rails.oracles import kron_solve, residual_matrix


class TestStandardForm:
    def test_zero_forcing(self):
        f = np.diag([-1.0, -2.0])
        c = solve_standard_dense(f, np.zeros((2, 2)))
        assert np.array_equal(c, np.zeros((2, 2)))

    def test_diagonal(self):
        # f c + c f + q = 0 with f = -I: c = q / 2.
        q = np.diag([4.0, 2.0])
        c = solve_standard_dense(-np.eye(2), q)
        assert np.allclose(c, q / 2.0, atol=1e-14)

    def test_hand_solved_pair(self):
        a = np.array([[-2.0, 1.0], [0.0, -1.0]])
        b = np.array([[1.0], [1.0]])
        c = solve_standard_dense(a, b @ b.T)
        assert np.allclose(c, 0.5 * np.ones((2, 2)), atol=1e-13)

    def test_matches_kron_oracle(self):
        rng = np.random.default_rng(17)
        for trial in range(6):
            n = 12
            f = random_hurwitz(rng, n)
            b = rng.standard_normal((n, 4))
            q = b @ b.T
            c = solve_standard_dense(f, q)
            ref = kron_solve(f, np.eye(n), b)
            assert np.allclose(c, ref, atol=1e-9 * np.linalg.norm(q))

    def test_complex_spectrum(self):
        # Spiral sink: a 2x2 Schur block exercises the quasi-triangular
        # path inside the back substitution.
        f = np.array([[-0.5, 4.0], [-4.0, -0.5]])
        q = np.eye(2)
        c = solve_standard_dense(f, q)
        r = f @ c + c @ f.T + q
        assert np.abs(r).max() < 1e-12

    def test_unstable_rejected(self):
        with pytest.raises(StabilityError):
            solve_standard_dense(np.diag([-1.0, 0.5]), np.eye(2))

    def test_marginal_rejected(self):
        # Pure rotation sits on the imaginary axis.
        f = np.array([[0.0, 1.0], [-1.0, 0.0]])
        with pytest.raises(StabilityError):
            solve_standard_dense(f, np.eye(2))

    def test_symmetry_exact(self):
        rng = np.random.default_rng(5)
        f = random_hurwitz(rng, 15)
        b = rng.standard_normal((15, 3))
        c = solve_standard_dense(f, b @ b.T)
        assert np.array_equal(c, c.T)


class TestProjectedSolve:
    def test_hand_solved_with_mass(self):
        # (-I) T (2I) + (2I) T (-I) + 2 e1 e1' = 0 gives T = e1 e1' / 2.
        a = -np.eye(2)
        m = 2.0 * np.eye(2)
        b = np.array([[np.sqrt(2.0)], [0.0]])
        t = solve_projected(ProjectedSystem(a, m, b))
        assert np.allclose(t, np.diag([0.5, 0.0]), atol=1e-14)

    def test_empty_system(self):
        t = solve_projected(ProjectedSystem(
            np.zeros((0, 0)), np.zeros((0, 0)), np.zeros((0, 0))
        ))
        assert t.shape == (0, 0)

    def test_matches_kron_with_general_mass(self):
        rng = np.random.default_rng(23)
        for trial in range(5):
            n = 10
            m = random_spd(rng, n, floor=1.0)
            # A = -m-spd product keeps the pencil stable.
            a = -random_spd(rng, n, floor=0.5)
            b = rng.standard_normal((n, 2))
            t = solve_projected(ProjectedSystem(a, m, b))
            ref = kron_solve(a, m, b)
            scale = np.linalg.norm(b @ b.T)
            assert np.linalg.norm(t - ref) <= 1e-9 * max(scale, 1.0)

    def test_residual_property(self):
        rng = np.random.default_rng(31)
        for n in (5, 20, 60):
            m = random_spd(rng, n, floor=1.0)
            a = -random_spd(rng, n, floor=0.5)
            b = rng.standard_normal((n, 3))
            t = solve_projected(ProjectedSystem(a, m, b))
            r = residual_matrix(a, m, b, t)
            assert np.linalg.norm(r) <= 1e-10 * np.linalg.norm(b @ b.T)

    def test_singular_mass_rejected(self):
        a = -np.eye(2)
        m = np.diag([1.0, 0.0])
        with pytest.raises(SingularMatrixError):
            solve_projected(ProjectedSystem(a, m, np.eye(2)))

    def test_unstable_pencil_rejected(self):
        with pytest.raises(StabilityError):
            solve_projected(ProjectedSystem(np.eye(2), np.eye(2), np.eye(2)))

    def test_dimension_cap(self):
        n = DIMENSION_CAP + 1
        sys = ProjectedSystem(-np.eye(n), np.eye(n), np.ones((n, 1)))
        with pytest.raises(ValueError):
            solve_projected(sys)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            ProjectedSystem(np.eye(2), np.eye(3), np.ones((2, 1)))
        with pytest.raises(ValueError):
            ProjectedSystem(np.eye(2), np.eye(2), np.ones((3, 1)))
        with pytest.raises(ValueError):
            ProjectedSystem(np.ones((2, 3)), np.eye(2), np.ones((2, 1)))

    def test_deterministic(self):
        rng = np.random.default_rng(2)
        a = random_hurwitz(rng, 14)
        b = rng.standard_normal((14, 2))
        sys = ProjectedSystem(a, np.eye(14), b)
        t1 = solve_projected(sys)
        t2 = solve_projected(sys)
        assert np.array_equal(t1, t2)
