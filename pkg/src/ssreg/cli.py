"""Command-line interface.

    ssreg simulate   write a synthetic dataset
    ssreg fit        one pass over the data, then closed-form fit(s)
    ssreg predict    stream a dataset through a saved model
    ssreg evaluate   MSE between a prediction file and the truth
    ssreg suffstats  compute | merge | subtract statistics artifacts

Exit codes: 0 ok, 2 configuration/artifact problems, 3 data problems,
4 numeric failure with no fallback.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import estimators as est
from .errors import (
    ArtifactError,
    DataError,
    DimensionMismatch,
    EmptyAccumulator,
    GridMismatch,
    InverseTransformDomain,
    NegativeCount,
    NegativeLambda,
    NegativeWeight,
    NonPositiveResponse,
    NumericError,
)
from .ingest import (
    INTERCEPT_NAME,
    DatasetSchema,
    PassCounter,
    accumulate,
    generate_synthetic,
    new_accumulator,
    read_header,
    read_model,
    read_ss,
    stream_batches,
    stream_column,
    write_model,
    write_ss,
)
from .suffstats import BOXCOX, DEFAULT_BATCH_SIZE, LINEAR, WEIGHTED, BoxCoxSS, LinRegSS, merge_all

MODEL_KINDS = (LINEAR, WEIGHTED, BOXCOX, est.RIDGE)
EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


class ConfigError(ValueError):
    pass


def parse_grid(text: str | None) -> list[float]:
    """``start:stop:step`` (stop included within half a step) or a comma list."""
    if text is None or not text.strip():
        return []
    text = text.strip()
    if ":" in text:
        try:
            start, stop, step = (float(v) for v in text.split(":"))
        except ValueError as exc:
            raise ConfigError(f"bad grid {text!r}; expected start:stop:step") from exc
        if step <= 0 or stop < start:
            raise ConfigError(f"bad grid {text!r}; need step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 0.5)) + 1
        return [round(start + k * step, 12) + 0.0 for k in range(count)]
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}") from exc


@dataclass
class RunConfig:
    command: str
    data: list = field(default_factory=list)
    response: str | None = None
    weight: str | None = None
    features: list | None = None
    intercept: bool = False
    batch_size: int = DEFAULT_BATCH_SIZE
    model: str = LINEAR
    grid: list = field(default_factory=list)
    tau: float = est.DEFAULT_TAU
    out: str | None = None
    out_dir: str | None = None
    ss: str | None = None
    jobs: int = 1
    verbose: bool = False

    def schema(self) -> DatasetSchema:
        return DatasetSchema(self.response, self.features, self.weight, self.intercept)

    def validate(self) -> None:
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model {self.model!r}")
        if self.batch_size < 1:
            raise ConfigError("--batch-size must be at least 1")
        if self.ss is None:
            if not self.data:
                raise ConfigError("--data is required")
            if self.response is None:
                raise ConfigError("--response is required")
        if self.model == WEIGHTED and self.ss is None and self.weight is None:
            raise ConfigError("weighted regression needs --weight")
        if self.model == est.RIDGE:
            if any(v < 0 for v in self.grid):
                raise ConfigError("ridge grid values must be non-negative")
            if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
                raise ConfigError("ridge grid must be strictly increasing")
        if self.model == BOXCOX and len(set(self.grid)) != len(self.grid):
            raise ConfigError("Box-Cox grid has duplicate values")


def _accumulate_shard(args):
    path, schema, kind, grid, batch_size = args
    counter = PassCounter()
    p = schema.resolve(read_header(path)).p
    acc = accumulate(stream_batches(path, schema, batch_size, counter), new_accumulator(kind, p, grid))
    return acc, counter


def accumulate_paths(cfg: RunConfig, counter: PassCounter):
    """One accumulator per input shard, merged; each shard is read once."""
    kind = LINEAR if cfg.model == est.RIDGE else cfg.model
    grid = cfg.grid or [1.0]
    schema = cfg.schema()
    jobs = [(str(p), schema, kind, grid, cfg.batch_size) for p in cfg.data]
    if cfg.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_accumulate_shard, jobs))
    else:
        results = [_accumulate_shard(j) for j in jobs]
    for _, c in results:
        counter.reads.update(c.reads)
        counter.rows += c.rows
        counter.batches += c.batches
    acc = merge_all(acc for acc, _ in results)
    _check_finite(acc)
    resolved = schema.resolve(read_header(cfg.data[0]))
    meta = {"column_names": resolved.column_names, "intercept": cfg.intercept,
            "response": cfg.response, "weight": cfg.weight}
    return acc, meta


def _check_finite(acc) -> None:
    if not all(np.all(np.isfinite(np.asarray(v, dtype=float))) for k, v in acc.fields().items() if k != "grid"):
        raise NumericError("sufficient statistics overflowed to non-finite values")


def _stamp(fit: est.FitResult, meta: dict) -> est.FitResult:
    fit.column_names = meta.get("column_names")
    fit.intercept = bool(meta.get("intercept", False))
    return fit


def _param_tag(v: float) -> str:
    return f"{v:+.6g}".replace("+", "p").replace("-", "m").replace(".", "_")


def run_fit(cfg: RunConfig) -> dict:
    """Accumulate (or load) statistics, fit, write artifacts; return a summary."""
    cfg.validate()
    counter = PassCounter()
    t0 = time.perf_counter()
    if cfg.ss is not None:
        acc, meta = read_ss(cfg.ss, with_meta=True)
        if cfg.model == BOXCOX and not isinstance(acc, BoxCoxSS):
            raise ConfigError("Box-Cox fits need a boxcox statistics artifact")
        if cfg.model in (LINEAR, est.RIDGE) and not isinstance(acc, LinRegSS):
            raise ConfigError(f"{cfg.model} fits need a linear statistics artifact")
        if cfg.model == WEIGHTED and acc.kind != WEIGHTED:
            raise ConfigError("weighted fits need a weighted statistics artifact")
        if cfg.model == BOXCOX and cfg.grid and list(cfg.grid) != acc.grid:
            raise ConfigError("grid differs from the one stored in the statistics artifact")
    else:
        acc, meta = accumulate_paths(cfg, counter)
    t1 = time.perf_counter()

    summary = {"model": cfg.model, "n": acc.n, "p": acc.p}
    written = []
    if cfg.model == BOXCOX:
        entries = est.fit_boxcox_all(acc)
        best = est.select_boxcox(entries)
        fits = [(e.c, _stamp(e.fit, meta)) for e in entries]
        chosen = best.fit
        summary["selected"] = {"c": best.c}
        summary["table"] = [{"c": e.c, "profile_loglik": _num(e.profile_loglik), "sigma2": e.fit.sigma2} for e in entries]
    elif cfg.model == est.RIDGE:
        grid = cfg.grid or [0.0]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", est.RidgeNotStabilized)
            trace = est.ridge_trace(acc, grid, cfg.tau)
        fits = [(lam, _stamp(f, meta)) for lam, f in zip(trace.lambdas, trace.fits)]
        chosen = trace.selected
        summary["selected"] = {"lambda": trace.selected_lambda, "rule": trace.selection_rule_id, "tau": trace.tau}
        summary["warning"] = trace.warning
        summary["table"] = [{"lambda": lam, "sigma2": f.sigma2, "sse": f.score, "beta": f.beta.tolist()} for lam, f in fits]
    elif cfg.model == WEIGHTED:
        chosen = _stamp(est.fit_weighted(acc), meta)
        fits = [(None, chosen)]
    else:
        chosen = _stamp(est.fit_linear(acc), meta)
        fits = [(None, chosen)]
    t2 = time.perf_counter()

    grid_fit = cfg.model in (BOXCOX, est.RIDGE) and len(fits) > 1
    if grid_fit:
        out_dir = Path(cfg.out_dir or "ssreg_fit_out")
        out_dir.mkdir(parents=True, exist_ok=True)
        key = "c" if cfg.model == BOXCOX else "lambda"
        for v, f in fits:
            path = out_dir / f"model_{key}_{_param_tag(v)}.json"
            write_model(path, f)
            written.append(str(path))
        if cfg.model == est.RIDGE:
            trace_path = out_dir / "ridge_trace.csv"
            _write_trace(trace_path, fits, meta.get("column_names"))
            written.append(str(trace_path))
        report = out_dir / "selection.json"
        report.write_text(json.dumps(summary, indent=1) + "\n")
        written.append(str(report))
    if cfg.out:
        write_model(cfg.out, chosen)
        written.append(cfg.out)
    t3 = time.perf_counter()

    summary.update(
        sigma2=chosen.sigma2,
        score=_num(chosen.score),
        used_generalized_inverse=chosen.used_generalized_inverse,
        beta=chosen.beta.tolist(),
        written=written,
        models=len(fits),
        metrics={
            "passes": counter.passes,
            "rows": counter.rows,
            "batches": counter.batches,
            "seconds": {"accumulate": t1 - t0, "fit": t2 - t1, "write": t3 - t2},
        },
    )
    return summary


def _num(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _write_trace(path, fits, names) -> None:
    p = len(fits[0][1].beta)
    names = names or [f"b{j}" for j in range(p)]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["lambda", *[f"beta[{c}]" for c in names], "sigma2", "sse"])
        for lam, fit in fits:
            w.writerow([repr(lam), *[repr(float(b)) for b in fit.beta], repr(fit.sigma2), repr(fit.score)])


def run_predict(model_path, data_path, out_path, inverse_transform=False, batch_size=DEFAULT_BATCH_SIZE) -> int:
    fit = read_model(model_path)
    names = list(fit.column_names or [])
    if not names:
        raise ConfigError("model artifact records no column names")
    features = [c for c in names if c != INTERCEPT_NAME]
    schema = DatasetSchema(None, features, None, INTERCEPT_NAME in names)
    header = read_header(data_path)
    missing = [c for c in features if c not in header]
    if missing:
        raise DataError(f"{data_path}: missing model column(s) {missing}")
    rows = 0
    with open(out_path, "w", encoding="utf-8") as f:
        f.write("prediction\n")
        for batch in stream_batches(data_path, schema, batch_size):
            yhat = est.predict(fit, batch.X, inverse_transform=inverse_transform)
            f.write("".join(f"{float(v)!r}\n" for v in yhat))
            rows += batch.m
    return rows


def run_evaluate(pred_path, truth_path, response: str, pred_column="prediction", batch_size=4096) -> float:
    sse = 0.0
    n = 0
    preds = stream_column(pred_path, pred_column, batch_size)
    truth = stream_column(truth_path, response, batch_size)
    for a, b in zip(preds, truth):
        if a.shape != b.shape:
            raise DataError("prediction and truth files have different row counts")
        sse += float((b - a) @ (b - a))
        n += a.shape[0]
    if next(preds, None) is not None or next(truth, None) is not None:
        raise DataError("prediction and truth files have different row counts")
    if n == 0:
        raise DataError("nothing to evaluate")
    return sse / n


def run_suffstats_compute(cfg: RunConfig) -> dict:
    cfg.validate()
    counter = PassCounter()
    acc, meta = accumulate_paths(cfg, counter)
    write_ss(cfg.out, acc, meta)
    return {"n": acc.n, "p": acc.p, "model_kind": acc.kind, "passes": counter.passes}


def _compatible_meta(metas):
    names = [m.get("column_names") for m in metas if m.get("column_names")]
    if any(nm != names[0] for nm in names[1:]):
        raise DimensionMismatch("artifacts were computed over different columns")
    return metas[0] if metas else {}


def run_suffstats_merge(paths, out) -> dict:
    loaded = [read_ss(p, with_meta=True) for p in paths]
    meta = _compatible_meta([m for _, m in loaded])
    acc = merge_all(a for a, _ in loaded)
    write_ss(out, acc, meta)
    return {"n": acc.n, "p": acc.p, "model_kind": acc.kind}


def run_suffstats_subtract(a_path, b_path, out) -> dict:
    (a, ma), (b, mb) = read_ss(a_path, with_meta=True), read_ss(b_path, with_meta=True)
    meta = _compatible_meta([ma, mb])
    acc = a.subtract(b)
    write_ss(out, acc, meta)
    return {"n": acc.n, "p": acc.p, "model_kind": acc.kind}


def _data_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", action="append", default=[], help="input file; repeat for shards")
    p.add_argument("--response")
    p.add_argument("--weight")
    p.add_argument("--features", help="comma-separated feature columns (default: all others)")
    p.add_argument("--intercept", action="store_true", help="prepend a constant-1 column")
    p.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_SIZE)
    p.add_argument("--model", choices=MODEL_KINDS, default=LINEAR)
    p.add_argument("--grid", help="Box-Cox powers or ridge lambdas: start:stop:step or a,b,c")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for multi-shard input")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ssreg", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a synthetic dataset")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--beta", help="p slopes, or intercept followed by p slopes (comma-separated)")
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--positive-y", action="store_true")
    p.add_argument("--binary", action="store_true", help="write the SSRG binary format")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="single-pass fit")
    _data_options(p)
    p.add_argument("--lambda", dest="lam", type=float, help="single ridge parameter")
    p.add_argument("--tau", type=float, default=est.DEFAULT_TAU, help="ridge trace stabilization threshold")
    p.add_argument("--ss", help="fit from a statistics artifact instead of data")
    p.add_argument("--out", help="model artifact path (selected model for grid fits)")
    p.add_argument("--out-dir", help="directory for per-parameter artifacts of grid fits")
    p.add_argument("--verbose", "-v", action="store_true", help="emit a JSON metrics line on stderr")

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--inverse-transform", action="store_true")
    p.add_argument("--batch-size", type=int, default=DEFAULT_BATCH_SIZE)

    p = sub.add_parser("evaluate", help="mean squared error of predictions")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--response", help="truth column (default: the file's only column, else 'y')")
    p.add_argument("--pred-column", default="prediction")

    p = sub.add_parser("suffstats", help="statistics artifacts")
    ss_sub = p.add_subparsers(dest="action", required=True)
    q = ss_sub.add_parser("compute")
    _data_options(q)
    q.add_argument("--out", required=True)
    q = ss_sub.add_parser("merge")
    q.add_argument("inputs", nargs="+")
    q.add_argument("--out", required=True)
    q = ss_sub.add_parser("subtract")
    q.add_argument("minuend")
    q.add_argument("subtrahend")
    q.add_argument("--out", required=True)
    return parser


def _config(args) -> RunConfig:
    grid = parse_grid(getattr(args, "grid", None))
    if getattr(args, "lam", None) is not None:
        if grid:
            raise ConfigError("give either --lambda or --grid, not both")
        grid = [args.lam]
    features = [c.strip() for c in args.features.split(",")] if args.features else None
    return RunConfig(
        command=args.command,
        data=args.data,
        response=args.response,
        weight=args.weight,
        features=features,
        intercept=args.intercept,
        batch_size=args.batch_size,
        model=args.model,
        grid=grid,
        tau=getattr(args, "tau", est.DEFAULT_TAU),
        out=args.out,
        out_dir=getattr(args, "out_dir", None),
        ss=getattr(args, "ss", None),
        jobs=args.jobs,
        verbose=getattr(args, "verbose", False),
    )


def _err(msg: str) -> None:
    print(f"ssreg: error: {msg}", file=sys.stderr)


def _dispatch(args) -> int:
    if args.command == "simulate":
        beta = [float(v) for v in args.beta.split(",")] if args.beta else None
        true_beta = generate_synthetic(args.out, args.n, args.p, beta, args.sigma, args.seed,
                                       args.positive_y, args.binary)
        print(json.dumps({"path": args.out, "n": args.n, "p": args.p, "beta": true_beta.tolist(),
                          "sigma": args.sigma, "seed": args.seed}))
        return 0

    if args.command == "fit":
        cfg = _config(args)
        summary = run_fit(cfg)
        m = summary["metrics"]
        print(f"n={summary['n']} p={summary['p']} models={summary['models']} sigma2={summary['sigma2']!r} "
              f"score={summary['score']!r} generalized_inverse={summary['used_generalized_inverse']}",
              file=sys.stderr)
        if summary.get("selected"):
            print(f"selected {summary['selected']}", file=sys.stderr)
        if summary.get("warning"):
            print(f"warning: {summary['warning']}", file=sys.stderr)
        if cfg.verbose:
            print(json.dumps({"event": "run_metrics", **m}), file=sys.stderr)
            if cfg.ss is None and m["passes"] != 1:
                _err(f"expected exactly one pass over the data, counted {m['passes']}")
                return EXIT_NUMERIC
        print(json.dumps({k: summary[k] for k in ("model", "n", "p", "beta", "sigma2", "score", "selected")
                          if k in summary}))
        return 0

    if args.command == "predict":
        rows = run_predict(args.model, args.data, args.out, args.inverse_transform, args.batch_size)
        print(f"wrote {rows} predictions to {args.out}", file=sys.stderr)
        return 0

    if args.command == "evaluate":
        response = args.response
        if response is None:
            header = read_header(args.truth)
            response = header[0] if len(header) == 1 else "y"
        print(repr(run_evaluate(args.pred, args.truth, response, args.pred_column)))
        return 0

    if args.action == "compute":
        info = run_suffstats_compute(_config(args))
    elif args.action == "merge":
        info = run_suffstats_merge(args.inputs, args.out)
    else:
        info = run_suffstats_subtract(args.minuend, args.subtrahend, args.out)
    print(json.dumps(info))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, ArtifactError, DimensionMismatch, GridMismatch, NegativeCount,
            NegativeLambda, EmptyAccumulator) as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except (DataError, NonPositiveResponse, NegativeWeight, InverseTransformDomain) as exc:
        _err(str(exc))
        return EXIT_DATA
    except NumericError as exc:
        _err(str(exc))
        return EXIT_NUMERIC
    except OSError as exc:
        _err(str(exc))
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
