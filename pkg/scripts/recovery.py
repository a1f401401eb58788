"""Coverage of 3-standard-error intervals over many simulated datasets.

    python scripts/recovery.py --seeds 100 --n 10000 --p 5
"""
import argparse
import tempfile
from pathlib import Path

import numpy as np

from ssreg.estimators import fit_linear
from ssreg.ingest import DatasetSchema, accumulate_file, generate_synthetic


def coverage(seeds: int, n: int, p: int, sigma: float, k: float) -> tuple[np.ndarray, np.ndarray]:
    hits = np.zeros(p + 1)
    z = []
    schema = DatasetSchema(response="y", intercept=True)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "sim.bin"
        for seed in range(seeds):
            beta = generate_synthetic(path, n, p, sigma=sigma, seed=seed, binary=True)
            fit = fit_linear(accumulate_file(path, schema, "linear"))
            zs = (fit.beta - beta) / fit.std_errors
            hits += np.abs(zs) <= k
            z.append(zs)
    return hits / seeds, np.array(z)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=100)
    ap.add_argument("--n", type=int, default=10_000)
    ap.add_argument("--p", type=int, default=5)
    ap.add_argument("--sigma", type=float, default=1.0)
    ap.add_argument("--k", type=float, default=3.0, help="interval half-width in standard errors")
    args = ap.parse_args()
    frac, z = coverage(args.seeds, args.n, args.p, args.sigma, args.k)
    names = ["(intercept)"] + [f"x{j}" for j in range(1, args.p + 1)]
    print(f"{'coef':>12} {'coverage':>9} {'mean z':>8} {'sd z':>6}")
    for j, name in enumerate(names):
        print(f"{name:>12} {frac[j]:9.3f} {z[:, j].mean():8.3f} {z[:, j].std():6.3f}")


if __name__ == "__main__":
    main()
