"""Wall-clock of one-pass grid fits against refitting each model from scratch.

    python scripts/bench_grid.py --n 1000000 --p 100
    python scripts/bench_grid.py --n 200000 --p 50 --binary --batch-sizes 1,128

Writes a synthetic dataset (unless --data is given), then times Box-Cox
fits over growing grids plus the naive one-pass-per-model baseline.
"""
import argparse
import json
import tempfile
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from ssreg.cli import RunConfig, parse_grid, run_fit
from ssreg.ingest import generate_synthetic


@dataclass
class BenchConfig:
    n: int = 1_000_000
    p: int = 100
    seed: int = 0
    binary: bool = False
    grid: str = "-1.5:1.5:0.1"
    sizes: tuple = (1, 5, 11, 31)
    batch_sizes: tuple = (128,)
    naive: bool = True


def fit_seconds(path, grid, batch_size, out_dir):
    cfg = RunConfig("fit", data=[str(path)], response="y", intercept=True, model="boxcox", grid=grid,
                    batch_size=batch_size, out_dir=out_dir)
    t0 = time.perf_counter()
    summary = run_fit(cfg)
    return time.perf_counter() - t0, summary["metrics"]["passes"]


def run(cfg: BenchConfig, data: Path | None, workdir: Path) -> list[dict]:
    if data is None:
        data = workdir / ("bench.bin" if cfg.binary else "bench.csv")
        t0 = time.perf_counter()
        generate_synthetic(data, cfg.n, cfg.p, sigma=1.0, seed=cfg.seed, positive_y=True, binary=cfg.binary)
        print(f"generated {data} in {time.perf_counter() - t0:.1f}s")
    full = parse_grid(cfg.grid)
    rows = []
    for bs in cfg.batch_sizes:
        base = None
        for k in cfg.sizes:
            grid = full[:k] if k < len(full) else full
            secs, passes = fit_seconds(data, grid, bs, str(workdir / "out"))
            base = base or secs
            rows.append({"batch_size": bs, "models": len(grid), "seconds": secs, "passes": passes,
                         "ratio_to_one": secs / base})
            print(json.dumps(rows[-1]))
        if cfg.naive:
            total = sum(fit_seconds(data, [c], bs, str(workdir / "out"))[0] for c in full)
            rows.append({"batch_size": bs, "models": len(full), "seconds": total, "passes": len(full),
                         "baseline": "one pass per model"})
            print(json.dumps(rows[-1]))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=BenchConfig.n)
    ap.add_argument("--p", type=int, default=BenchConfig.p)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--binary", action="store_true")
    ap.add_argument("--data", type=Path, help="existing dataset with response column y")
    ap.add_argument("--grid", default=BenchConfig.grid)
    ap.add_argument("--sizes", default="1,5,11,31", help="grid prefixes to time")
    ap.add_argument("--batch-sizes", default="128")
    ap.add_argument("--no-naive", action="store_true")
    ap.add_argument("--json", type=Path, help="write results here")
    args = ap.parse_args()
    cfg = BenchConfig(args.n, args.p, args.seed, args.binary, args.grid,
                      tuple(int(v) for v in args.sizes.split(",")),
                      tuple(int(v) for v in args.batch_sizes.split(",")), not args.no_naive)
    with tempfile.TemporaryDirectory() as tmp:
        rows = run(cfg, args.data, Path(tmp))
    if args.json:
        args.json.write_text(json.dumps({"config": asdict(cfg), "results": rows}, indent=1) + "\n")


if __name__ == "__main__":
    main()
