"""Single-pass regression from sufficient statistics."""
from .estimators import (
    FitResult,
    RidgeTrace,
    fit_boxcox_all,
    fit_linear,
    fit_ridge,
    fit_weighted,
    loglik_linear,
    mse,
    predict,
    ridge_trace,
    select_boxcox,
)
from .ingest import DatasetSchema, PassCounter, generate_synthetic, read_ss, stream_batches, write_ss
from .linalg import cholesky_solve, pseudo_inverse, solve_normal, sym_eigen
from .suffstats import BoxCoxSS, LinRegSS, RidgeSS, WeightedSS, boxcox_transform, merge, subtract

__version__ = "0.1.0"
