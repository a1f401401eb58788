import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ssreg.errors import NotPositiveDefinite
from ssreg.linalg import (
    Factorization,
    cholesky_solve,
    default_rank_tol,
    pseudo_inverse,
    solve_normal,
    sym_eigen,
    symmetrize,
)

SINGULAR = np.array([[5.0, 5.0], [5.0, 5.0]])


def penrose_residuals(A, P):
    return [
        np.abs(A @ P @ A - A).max(),
        np.abs(P @ A @ P - P).max(),
        np.abs((A @ P).T - A @ P).max(),
        np.abs((P @ A).T - P @ A).max(),
    ]


def test_symmetrize_mirrors_upper():
    A = symmetrize([[1.0, 2.0], [99.0, 3.0]])
    assert A[1, 0] == A[0, 1] == 2.0


class TestSymEigen:
    def test_identity(self):
        w, V = sym_eigen(np.eye(2))
        np.testing.assert_array_equal(w, [1.0, 1.0])
        np.testing.assert_allclose(V.T @ V, np.eye(2), atol=1e-15)

    def test_diagonal_sorted_descending(self):
        w, _ = sym_eigen([[2.0, 0.0], [0.0, 3.0]])
        np.testing.assert_array_equal(w, [3.0, 2.0])

    def test_rank_one(self):
        w, V = sym_eigen(SINGULAR)
        np.testing.assert_allclose(w, [10.0, 0.0], atol=1e-14)
        v = V[:, 0] * np.sign(V[0, 0])
        np.testing.assert_allclose(v, [2 ** -0.5, 2 ** -0.5], atol=1e-15)
        # reconstruction oracle
        np.testing.assert_allclose(V @ np.diag(w) @ V.T, SINGULAR, atol=1e-13)

    def test_zero_matrix(self):
        w, V = sym_eigen(np.zeros((3, 3)))
        np.testing.assert_array_equal(w, np.zeros(3))

    @given(st.integers(1, 12), st.integers(0, 2**32 - 1))
    def test_reconstruction_and_orthonormality(self, p, seed):
        rng = np.random.default_rng(seed)
        M = rng.normal(size=(p, p))
        A = M + M.T
        w, V = sym_eigen(A)
        scale = np.linalg.norm(A)
        assert np.all(np.diff(w) <= 0)
        assert np.abs(V @ np.diag(w) @ V.T - A).max() <= 1e-10 * scale
        assert np.abs(V.T @ V - np.eye(p)).max() <= 1e-10
        # independent reference spectrum
        np.testing.assert_allclose(w, np.linalg.eigvalsh(A)[::-1], atol=1e-10 * scale)


class TestCholeskySolve:
    def test_identity(self):
        np.testing.assert_array_equal(cholesky_solve(np.eye(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_two_by_two(self):
        A = np.array([[2.0, 1.0], [1.0, 1.0]])
        x = cholesky_solve(A, [4.0, 3.0])
        np.testing.assert_allclose(x, [1.0, 2.0], rtol=1e-14)
        # dense oracle
        np.testing.assert_allclose(x, np.linalg.solve(A, [4.0, 3.0]), rtol=1e-14)

    def test_singular_raises(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky_solve(SINGULAR, [1.0, 1.0])

    def test_zero_raises(self):
        with pytest.raises(NotPositiveDefinite):
            cholesky_solve(np.zeros((2, 2)), [0.0, 0.0])

    @given(st.integers(1, 25), st.integers(0, 2**32 - 1))
    def test_spd_residual(self, p, seed):
        rng = np.random.default_rng(seed)
        M = rng.normal(size=(p, p))
        A = M.T @ M + np.eye(p)
        b = rng.normal(size=p)
        x = cholesky_solve(A, b)
        assert np.linalg.norm(A @ x - b) / np.linalg.norm(b) < 1e-10
        assert np.linalg.norm(A @ x - b) <= 1e-10 * (np.linalg.norm(A) * np.linalg.norm(x) + np.linalg.norm(b))


class TestPseudoInverse:
    def test_identity(self):
        np.testing.assert_allclose(pseudo_inverse(np.eye(2)), np.eye(2), atol=1e-15)

    def test_rank_one(self):
        P = pseudo_inverse(SINGULAR)
        np.testing.assert_allclose(P, np.full((2, 2), 0.05), atol=1e-15)
        assert max(penrose_residuals(SINGULAR, P)) <= 1e-8 * np.linalg.norm(SINGULAR)

    def test_zero(self):
        np.testing.assert_array_equal(pseudo_inverse(np.zeros((2, 2))), np.zeros((2, 2)))

    @given(st.integers(2, 10), st.data())
    def test_penrose_conditions_rank_deficient(self, p, data):
        r = data.draw(st.integers(1, p - 1))
        seed = data.draw(st.integers(0, 2**32 - 1))
        rng = np.random.default_rng(seed)
        B = rng.normal(size=(p, r))
        signs = rng.choice([-1.0, 1.0], size=r)
        A = (B * signs) @ B.T
        P = pseudo_inverse(A)
        assert max(penrose_residuals(A, P)) <= 1e-8 * np.linalg.norm(A)
        # agrees with the LAPACK SVD-based pseudo-inverse
        np.testing.assert_allclose(P, np.linalg.pinv(A, hermitian=True), atol=1e-8 * np.linalg.norm(P))


class TestSolveNormal:
    def test_identity(self):
        x, gen = solve_normal(np.eye(2), [7.0, 9.0])
        np.testing.assert_array_equal(x, [7.0, 9.0])
        assert gen is False

    def test_pd(self):
        x, gen = solve_normal([[2.0, 1.0], [1.0, 1.0]], [4.0, 3.0])
        np.testing.assert_allclose(x, [1.0, 2.0], rtol=1e-14)
        assert not gen

    def test_singular_uses_generalized(self):
        x, gen = solve_normal(SINGULAR, [10.0, 10.0])
        np.testing.assert_allclose(x, [1.0, 1.0], rtol=1e-14)
        assert gen

    @given(st.integers(1, 15), st.integers(0, 2**32 - 1))
    def test_branches_agree_on_spd(self, p, seed):
        rng = np.random.default_rng(seed)
        M = rng.normal(size=(p + 3, p))
        A = M.T @ M + 0.1 * np.eye(p)
        b = rng.normal(size=p)
        x_chol, gen = solve_normal(A, b)
        assert not gen
        x_pinv = pseudo_inverse(A) @ b
        assert np.linalg.norm(x_chol - x_pinv) <= 1e-8 * np.linalg.norm(x_pinv)

    def test_matrix_rhs_and_inverse(self):
        A = np.array([[4.0, 1.0], [1.0, 3.0]])
        f = Factorization(A)
        B = np.array([[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(f.solve(B), np.linalg.inv(A), rtol=1e-14)
        np.testing.assert_allclose(f.inverse(), np.linalg.inv(A), rtol=1e-14)


def test_default_rank_tol_scales_with_dimension():
    assert default_rank_tol(100) == pytest.approx(1e-10)
