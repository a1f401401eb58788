"""Dense in-memory reference fits.

Everything here works on the full design matrix and residual vectors and
shares no code with the accumulator/estimator path: inverses come from
the adjugate (p <= 3) or LAPACK ``eigh``, variances from explicit
residuals. Test scale only.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import NegativeLambda, NonPositiveResponse
from .estimators import RIDGE, FitResult

RANK_RTOL = 1e-12
DEGENERATE_RTOL = 1e-12


def _adjugate_inverse(A):
    p = A.shape[0]
    if p == 1:
        return np.array([[1.0 / A[0, 0]]])
    if p == 2:
        (a, b), (c, d) = A
        det = a * d - b * c
        return np.array([[d, -b], [-c, a]]) / det
    cof = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(A, i, 0), j, 1)
            cof[i, j] = (-1) ** (i + j) * (minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0])
    det = A[0] @ cof[0]
    return cof.T / det


def inverse(A) -> tuple[np.ndarray, bool]:
    """(inverse or pseudo-inverse, singular flag) of a symmetric matrix."""
    A = np.asarray(A, dtype=np.float64)
    A = 0.5 * (A + A.T)
    p = A.shape[0]
    w, V = np.linalg.eigh(A)
    scale = np.max(np.abs(w)) if w.size else 0.0
    keep = np.abs(w) > RANK_RTOL * p * scale
    singular = not np.all(keep) or scale == 0.0
    if singular:
        winv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
        return (V * winv) @ V.T, True
    if p <= 3:
        return _adjugate_inverse(A), False
    return (V / w) @ V.T, False


def _loglik(n, rss, sigma2):
    return -0.5 * n * math.log(2 * math.pi * sigma2) - rss / (2 * sigma2)


def _core(X, y, w=None, shift=0.0):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if w is None:
        XtWX = X.T @ X
        XtWy = X.T @ y
    else:
        XtWX = X.T @ (w[:, None] * X)
        XtWy = X.T @ (w * y)
    A = XtWX + shift * np.eye(X.shape[1])
    A_inv, singular = inverse(A)
    beta = A_inv @ XtWy
    r = y - X @ beta
    rss = float(r @ r) if w is None else float(r @ (w * r))
    yy = float(y @ y) if w is None else float(y @ (w * y))
    return X, y, XtWX, A_inv, singular, beta, rss, yy


def _degenerate(sigma2, yy, n):
    return sigma2 <= DEGENERATE_RTOL * yy / n


def dense_ols(X, y) -> FitResult:
    X, y, _, inv, singular, beta, rss, yy = _core(X, y)
    n, p = X.shape
    sigma2 = rss / n
    degenerate = _degenerate(sigma2, yy, n)
    if degenerate:
        sigma2 = 0.0
    score = math.inf if degenerate else _loglik(n, rss, sigma2)
    return FitResult("linear", beta, sigma2, sigma2 * inv, n, p, score, singular, degenerate=degenerate)


def dense_weighted(X, y, w) -> FitResult:
    w = np.asarray(w, dtype=np.float64)
    X, y, _, inv, singular, beta, rss, yy = _core(X, y, w)
    n, p = X.shape
    sigma2 = rss / n
    degenerate = _degenerate(sigma2, yy, n)
    if degenerate:
        sigma2 = 0.0
    return FitResult("weighted", beta, sigma2, sigma2 * inv, n, p, rss, singular, degenerate=degenerate)


def transform(y, c):
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise NonPositiveResponse("responses must be positive")
    return np.log(y) if c == 0 else (np.power(y, c) - 1.0) / c


def dense_boxcox(X, y, grid) -> list[tuple[float, FitResult, float]]:
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0):
        raise NonPositiveResponse("responses must be positive")
    log_sum = float(np.sum(np.log(y)))
    out = []
    for c in grid:
        c = float(c)
        Xa, yc, _, inv, singular, beta, rss, yy = _core(X, transform(y, c))
        n, p = Xa.shape
        sigma2 = rss / n
        degenerate = _degenerate(sigma2, yy, n)
        if degenerate:
            sigma2 = 0.0
            prof = math.inf
        else:
            prof = _loglik(n, rss, sigma2) + (c - 1.0) * log_sum
        fit = FitResult("boxcox", beta, sigma2, sigma2 * inv, n, p, prof, singular, {"c": c}, degenerate)
        out.append((c, fit, prof))
    return out


def dense_ridge(X, y, lam) -> FitResult:
    """Ridge reference.

    The reported variance is (||y - X b||^2 + lam ||b||^2) / n, the raw-data
    value of s_yy - s_xy' (S_xx + lam I)^-1 s_xy over n.
    """
    lam = float(lam)
    if lam < 0:
        raise NegativeLambda("lambda must be non-negative")
    X, y, XtX, A_inv, singular, beta, rss, yy = _core(X, y, shift=lam)
    n, p = X.shape
    bb = float(beta @ beta)
    sigma2 = (rss + lam * bb) / n
    degenerate = _degenerate(sigma2, yy, n)
    if degenerate:
        sigma2 = 0.0
    cov = sigma2 * (A_inv @ XtX @ A_inv)
    sse = rss + n * lam * bb
    return FitResult(RIDGE, beta, sigma2, cov, n, p, sse, singular, {"lambda": lam}, degenerate)
