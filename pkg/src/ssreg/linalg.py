"""Symmetric linear algebra for normal equations.

Positive-definite systems go through a Cholesky factorization; anything
else falls back to the Moore-Penrose pseudo-inverse built from a cyclic
Jacobi eigendecomposition.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, EigenNonConvergence, NotPositiveDefinite

MAX_SWEEPS = 100


def default_rank_tol(p: int) -> float:
    return 1e-12 * p


def symmetrize(A) -> np.ndarray:
    """Return a copy of ``A`` whose lower triangle mirrors its upper triangle."""
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {A.shape}")
    upper = np.triu(A)
    return upper + np.triu(A, 1).T


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray   # descending
    eigenvectors: np.ndarray  # columns


def sym_eigen(A, max_sweeps: int = MAX_SWEEPS) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Sweeps run over every off-diagonal pair in row order until the
    off-diagonal Frobenius mass falls below machine precision relative to
    the whole matrix.
    """
    A = symmetrize(A)
    p = A.shape[0]
    V = np.eye(p)
    total = np.linalg.norm(A)
    if p == 1 or total == 0.0:
        return _sorted(np.diag(A).copy(), V)

    eps = np.finfo(float).eps
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= eps * total:
            return _sorted(np.diag(A).copy(), V)
        for i in range(p - 1):
            for j in range(i + 1, p):
                aij = A[i, j]
                if abs(aij) <= eps * 1e-3 * total:
                    continue
                tau = (A[j, j] - A[i, i]) / (2.0 * aij)
                if tau >= 0:
                    t = 1.0 / (tau + np.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                ci = A[:, i].copy()
                cj = A[:, j]
                A[:, i] = c * ci - s * cj
                A[:, j] = s * ci + c * cj
                ri = A[i, :].copy()
                rj = A[j, :]
                A[i, :] = c * ri - s * rj
                A[j, :] = s * ri + c * rj
                A[i, j] = A[j, i] = 0.0
                vi = V[:, i].copy()
                vj = V[:, j]
                V[:, i] = c * vi - s * vj
                V[:, j] = s * vi + c * vj
    raise EigenNonConvergence(f"Jacobi iteration did not converge in {max_sweeps} sweeps (p={p})")


def _sorted(w, V) -> EigenDecomposition:
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], V[:, order])


def cholesky(A, rank_tol: float | None = None) -> np.ndarray:
    """Lower Cholesky factor.

    Raises NotPositiveDefinite as soon as a pivot drops to
    ``rank_tol * max(diag(A))`` or below.
    """
    A = symmetrize(A)
    p = A.shape[0]
    if rank_tol is None:
        rank_tol = default_rank_tol(p)
    threshold = rank_tol * max(float(np.max(np.diag(A))), 0.0)
    L = np.zeros_like(A)
    for j in range(p):
        row = L[j, :j]
        d = A[j, j] - row @ row
        if not d > threshold:
            raise NotPositiveDefinite(j, d)
        ljj = np.sqrt(d)
        L[j, j] = ljj
        if j + 1 < p:
            L[j + 1:, j] = (A[j + 1:, j] - L[j + 1:, :j] @ row) / ljj
    return L


def cholesky_solve(A, b, rank_tol: float | None = None) -> np.ndarray:
    L = cholesky(A, rank_tol)
    return _cho_apply(L, _check_rhs(L, b))


def _cho_apply(L, b):
    z = solve_triangular(L, b, lower=True, check_finite=False)
    return solve_triangular(L.T, z, lower=False, check_finite=False)


def _check_rhs(A, b) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    if b.shape[:1] != (A.shape[0],):
        raise DimensionMismatch(f"right-hand side has shape {b.shape}, matrix is {A.shape}")
    return b


def pseudo_inverse(A, rank_tol: float | None = None) -> np.ndarray:
    A = symmetrize(A)
    if rank_tol is None:
        rank_tol = default_rank_tol(A.shape[0])
    w, V = sym_eigen(A)
    cutoff = rank_tol * np.max(np.abs(w))
    keep = np.abs(w) > cutoff
    w_inv = np.zeros_like(w)
    w_inv[keep] = 1.0 / w[keep]
    return symmetrize((V * w_inv) @ V.T)


class Factorization:
    """A reusable solver for one symmetric matrix.

    Tries Cholesky first and keeps the pseudo-inverse otherwise, so many
    right-hand sides (a Box-Cox grid, say) share a single factorization.
    """

    def __init__(self, A, rank_tol: float | None = None):
        self.A = symmetrize(A)
        self.p = self.A.shape[0]
        self.rank_tol = default_rank_tol(self.p) if rank_tol is None else rank_tol
        self._L = None
        self._pinv = None
        try:
            self._L = cholesky(self.A, self.rank_tol)
        except NotPositiveDefinite:
            self._pinv = pseudo_inverse(self.A, self.rank_tol)

    @property
    def used_generalized(self) -> bool:
        return self._pinv is not None

    def solve(self, b) -> np.ndarray:
        b = _check_rhs(self.A, b)
        if self._pinv is not None:
            return self._pinv @ b
        return _cho_apply(self._L, b)

    def inverse(self) -> np.ndarray:
        if self._pinv is not None:
            return self._pinv.copy()
        return symmetrize(_cho_apply(self._L, np.eye(self.p)))


def solve_normal(A, b, rank_tol: float | None = None) -> tuple[np.ndarray, bool]:
    f = Factorization(A, rank_tol)
    return f.solve(b), f.used_generalized
