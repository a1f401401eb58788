"""Closed-form fits computed from sufficient statistics alone.

No function here touches raw data: every estimator, variance, covariance
and score is a function of the accumulator fields.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyAccumulator,
    InverseTransformDomain,
    NegativeLambda,
    NonPositiveVariance,
)
from .linalg import Factorization, symmetrize
from .suffstats import BOXCOX, LINEAR, WEIGHTED, BoxCoxSS, LinRegSS, WeightedSS

RIDGE = "ridge"
DEGENERATE_RTOL = 1e-12
DEFAULT_TAU = 0.01


class RidgeNotStabilized(UserWarning):
    pass


@dataclass
class FitResult:
    model_kind: str
    beta: np.ndarray
    sigma2: float
    cov: np.ndarray
    n: int
    p: int
    score: float
    used_generalized_inverse: bool = False
    params: dict = field(default_factory=dict)
    degenerate: bool = False
    column_names: list | None = None
    intercept: bool = False

    @property
    def std_errors(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.cov), 0.0, None))


def _clamp_sigma2(raw: float, s_yy: float, n: int) -> tuple[float, bool]:
    """MLE variance with the degenerate-fit clamp; returns (sigma2, degenerate)."""
    if raw <= DEGENERATE_RTOL * s_yy / n:
        return 0.0, True
    return raw, False


def _quad_sse(s_yy: float, s_xy: np.ndarray, S: np.ndarray, beta: np.ndarray) -> float:
    return float(s_yy - 2.0 * s_xy @ beta + beta @ S @ beta)


def _require_rows(ss) -> None:
    if ss.n < 1:
        raise EmptyAccumulator("accumulator holds no observations")


def _gaussian_loglik(n: int, sse: float, sigma2: float) -> float:
    if not sigma2 > 0:
        raise NonPositiveVariance(f"variance must be positive, got {sigma2}")
    return -0.5 * n * math.log(2.0 * math.pi * sigma2) - sse / (2.0 * sigma2)


def loglik_linear(ss: LinRegSS, beta, sigma2: float) -> float:
    """Gaussian loglikelihood of (beta, sigma2) evaluated from the statistics."""
    beta = np.asarray(beta, dtype=np.float64)
    return _gaussian_loglik(ss.n, _quad_sse(ss.s_yy, ss.s_xy, ss.S_xx, beta), sigma2)


def sse_weighted(ss: WeightedSS, beta) -> float:
    return _quad_sse(ss.s_wyy, ss.s_wxy, ss.S_xx, np.asarray(beta, dtype=np.float64))


def sse_ridge(ss: LinRegSS, lam: float, beta) -> float:
    beta = np.asarray(beta, dtype=np.float64)
    return _quad_sse(ss.s_yy, ss.s_xy, ss.S_xx, beta) + ss.n * lam * float(beta @ beta)


def _ols_from(s_yy, s_xy, fact: Factorization, n: int):
    beta = fact.solve(s_xy)
    sigma2, degenerate = _clamp_sigma2((s_yy - float(s_xy @ beta)) / n, s_yy, n)
    return beta, sigma2, degenerate


def fit_linear(ss: LinRegSS) -> FitResult:
    _require_rows(ss)
    S = ss.S_xx
    fact = Factorization(S)
    beta, sigma2, degenerate = _ols_from(ss.s_yy, ss.s_xy, fact, ss.n)
    score = math.inf if degenerate else loglik_linear(ss, beta, sigma2)
    return FitResult(
        model_kind=LINEAR,
        beta=beta,
        sigma2=sigma2,
        cov=sigma2 * fact.inverse(),
        n=ss.n,
        p=ss.p,
        score=score,
        used_generalized_inverse=fact.used_generalized,
        degenerate=degenerate,
    )


def fit_weighted(ss: WeightedSS) -> FitResult:
    """Weighted least squares; the score is the weighted SSE, not a likelihood."""
    _require_rows(ss)
    fact = Factorization(ss.S_xx)
    beta, sigma2, degenerate = _ols_from(ss.s_wyy, ss.s_wxy, fact, ss.n)
    return FitResult(
        model_kind=WEIGHTED,
        beta=beta,
        sigma2=sigma2,
        cov=sigma2 * fact.inverse(),
        n=ss.n,
        p=ss.p,
        score=sse_weighted(ss, beta),
        used_generalized_inverse=fact.used_generalized,
        degenerate=degenerate,
    )


@dataclass
class BoxCoxEntry:
    c: float
    fit: FitResult
    profile_loglik: float


def fit_boxcox_all(ss: BoxCoxSS) -> list[BoxCoxEntry]:
    """Fit every power in the grid against one shared factorization."""
    _require_rows(ss)
    S = ss.S_xx
    fact = Factorization(S)
    inv = fact.inverse()
    betas = fact.solve(ss.s_cxy)
    n = ss.n
    out = []
    for j, c in enumerate(ss.grid):
        s_cyy = float(ss.s_cyy[j])
        s_cxy = ss.s_cxy[:, j]
        beta = betas[:, j]
        sigma2, degenerate = _clamp_sigma2((s_cyy - float(s_cxy @ beta)) / n, s_cyy, n)
        if degenerate:
            prof = math.inf
        else:
            sse = _quad_sse(s_cyy, s_cxy, S, beta)
            prof = _gaussian_loglik(n, sse, sigma2) + (c - 1.0) * ss.s_logy
        fit = FitResult(
            model_kind=BOXCOX,
            beta=beta.copy(),
            sigma2=sigma2,
            cov=sigma2 * inv,
            n=n,
            p=ss.p,
            score=prof,
            used_generalized_inverse=fact.used_generalized,
            params={"c": c},
            degenerate=degenerate,
        )
        out.append(BoxCoxEntry(c, fit, prof))
    return out


def select_boxcox(results: list[BoxCoxEntry]) -> BoxCoxEntry:
    """Highest profile loglikelihood; ties go to smaller |c|, then smaller c."""
    if not results:
        raise ValueError("no Box-Cox fits to select from")
    return min(results, key=lambda e: (-e.profile_loglik, abs(e.c), e.c))


def fit_ridge(ss: LinRegSS, lam: float) -> FitResult:
    """Ridge fit with solve matrix S_xx + lam*I and a sandwich covariance.

    The score is the penalized SSE with an ``n * lam`` penalty weight, while
    the estimator uses the plain ``lam`` shift; both are kept as defined.
    """
    lam = float(lam)
    if not lam >= 0:
        raise NegativeLambda(f"ridge parameter must be non-negative, got {lam}")
    _require_rows(ss)
    S = ss.S_xx
    A = S + lam * np.eye(ss.p) if lam > 0 else S
    fact = Factorization(A)
    beta, sigma2, degenerate = _ols_from(ss.s_yy, ss.s_xy, fact, ss.n)
    A_inv = fact.inverse()
    cov = symmetrize(sigma2 * (A_inv @ S @ A_inv))
    return FitResult(
        model_kind=RIDGE,
        beta=beta,
        sigma2=sigma2,
        cov=cov,
        n=ss.n,
        p=ss.p,
        score=sse_ridge(ss, lam, beta),
        used_generalized_inverse=fact.used_generalized,
        params={"lambda": lam},
        degenerate=degenerate,
    )


@dataclass
class RidgeTrace:
    lambdas: list
    fits: list
    selected_lambda: float
    selection_rule_id: str
    tau: float
    warning: str | None = None

    @property
    def selected(self) -> FitResult:
        return self.fits[self.lambdas.index(self.selected_lambda)]

    def rows(self):
        for lam, fit in zip(self.lambdas, self.fits):
            yield lam, fit.beta, fit.sigma2, fit.score


def ridge_trace(ss: LinRegSS, grid, tau: float = DEFAULT_TAU) -> RidgeTrace:
    """Fit every lambda and pick the first one after which the path settles.

    A lambda qualifies when the step to the next grid value moves every
    coefficient by less than ``tau``, relative to max(1, |beta_j|).
    """
    grid = [float(v) for v in grid]
    if not grid:
        raise ValueError("ridge grid is empty")
    if any(v < 0 for v in grid):
        raise NegativeLambda("ridge grid values must be non-negative")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("ridge grid must be strictly increasing")
    fits = [fit_ridge(ss, lam) for lam in grid]
    selected = None
    for k in range(len(grid) - 1):
        b0, b1 = fits[k].beta, fits[k + 1].beta
        change = np.max(np.abs(b1 - b0) / np.maximum(1.0, np.abs(b0)))
        if change < tau:
            selected = grid[k]
            break
    message = None
    if selected is None:
        selected = grid[-1]
        message = f"ridge trace did not stabilize within tau={tau}; using largest lambda {selected}"
        warnings.warn(message, RidgeNotStabilized, stacklevel=2)
    return RidgeTrace(grid, fits, selected, "max-relative-step<tau", tau, message)


def predict(fit: FitResult, X, inverse_transform: bool = False):
    """Linear predictor; Box-Cox fits can be mapped back to the response scale.

    Accepts a single row or a 2-D batch.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != fit.p or X.ndim not in (1, 2):
        raise DimensionMismatch(f"input has shape {X.shape}, model expects p={fit.p}")
    yhat = X @ fit.beta
    if not (inverse_transform and fit.model_kind == BOXCOX):
        return float(yhat) if X.ndim == 1 else yhat
    c = float(fit.params["c"])
    yhat = np.asarray(yhat)
    if c == 0:
        out = np.exp(yhat)
    else:
        base = c * yhat + 1.0
        if np.any(base <= 0):
            raise InverseTransformDomain("c*yhat + 1 must be positive to invert the Box-Cox transform")
        out = np.exp(np.log(base) / c)
    return float(out) if X.ndim == 1 else out


def mse(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise DimensionMismatch(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise ValueError("mse of an empty sample is undefined")
    r = y_true - y_pred
    return float(r @ r) / y_true.size


def fit(ss, model_kind: str | None = None, **params):
    """Dispatch on accumulator type (``lam=`` selects ridge for a LinRegSS)."""
    if isinstance(ss, WeightedSS):
        return fit_weighted(ss)
    if isinstance(ss, BoxCoxSS):
        return select_boxcox(fit_boxcox_all(ss)).fit
    if model_kind == RIDGE or "lam" in params:
        return fit_ridge(ss, params.get("lam", 0.0))
    return fit_linear(ss)
