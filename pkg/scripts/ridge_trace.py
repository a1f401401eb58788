"""Print a ridge trace on collinear synthetic data.

    python scripts/ridge_trace.py --grid 0:1.9:0.1
"""
import argparse
import warnings

import numpy as np

from ssreg.cli import parse_grid
from ssreg.estimators import RidgeNotStabilized, ridge_trace
from ssreg.suffstats import LinRegSS


def collinear(n: int, rho: float, seed: int):
    rng = np.random.default_rng(seed)
    z = rng.uniform(-1, 1, size=(n, 2))
    x3 = rho * z[:, 0] + np.sqrt(1 - rho**2) * rng.uniform(-1, 1, size=n)
    X = np.column_stack([np.ones(n), z, x3])
    y = X @ np.array([0.5, 1.0, -2.0, 1.0]) + rng.normal(size=n)
    return X, y


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=500)
    ap.add_argument("--rho", type=float, default=0.999)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--grid", default="0:1.9:0.1")
    ap.add_argument("--tau", type=float, default=0.01)
    args = ap.parse_args()
    X, y = collinear(args.n, args.rho, args.seed)
    ss = LinRegSS(X.shape[1]).update_batch(X, y)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RidgeNotStabilized)
        trace = ridge_trace(ss, parse_grid(args.grid), args.tau)
    for lam, beta, sigma2, sse in trace.rows():
        mark = " <" if lam == trace.selected_lambda else ""
        print(f"{lam:6.2f}  " + " ".join(f"{b:9.4f}" for b in beta) + f"  sigma2={sigma2:.4f} sse={sse:.2f}{mark}")
    for w in caught:
        print(f"warning: {w.message}")


if __name__ == "__main__":
    main()
