"""Reading datasets in mini-batches, artifact files, and synthetic data.

Two input formats are understood:

* CSV with a mandatory header. Leading lines starting with ``#`` are
  metadata comments and are skipped.
* A binary format: magic ``SSRG``, u32 version, u64 n, u32 p, then n*p
  little-endian float64 values row-major. Column names come from an
  optional ``<file>.json`` sidecar (key ``columns``), else ``c0..c{p-1}``.

Both readers pull fixed-size blocks from disk and re-cut them into batches,
so memory stays bounded by the block and batch sizes, never by n.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator

import numpy as np
import pyarrow as pa
import pyarrow.csv as pacsv

from .errors import ArtifactError, DataError
from .estimators import FitResult
from .suffstats import (
    BOXCOX,
    DEFAULT_BATCH_SIZE,
    LINEAR,
    WEIGHTED,
    BoxCoxSS,
    LinRegSS,
    WeightedSS,
)

SCHEMA_VERSION = 1
BINARY_MAGIC = b"SSRG"
BINARY_VERSION = 1
_BIN_HEADER = struct.Struct("<4sIQI")
CSV_BLOCK_BYTES = 1 << 22
BIN_BLOCK_ROWS = 8192
INTERCEPT_NAME = "(intercept)"
RNG_ALGORITHM = "numpy.random.PCG64"


@dataclass
class DatasetSchema:
    response: str | None
    features: list[str] | None = None
    weight: str | None = None
    intercept: bool = False
    columns: list[str] | None = None

    def resolve(self, header: list[str]) -> "DatasetSchema":
        """Bind to a file header; features default to every other column."""
        missing = [c for c in [self.response, self.weight, *(self.features or [])] if c is not None and c not in header]
        if missing:
            raise DataError(f"missing column(s) {missing}; file has {header}")
        features = self.features
        if features is None:
            features = [c for c in header if c not in (self.response, self.weight)]
        if self.response is not None and self.response in features:
            raise DataError(f"response column {self.response!r} is also listed as a feature")
        if self.weight is not None and self.weight in features:
            raise DataError(f"weight column {self.weight!r} is also listed as a feature")
        if not features and not self.intercept:
            raise DataError("no feature columns and no intercept")
        return DatasetSchema(self.response, list(features), self.weight, self.intercept, list(header))

    @property
    def column_names(self) -> list[str]:
        """Names of the model coefficients, in order."""
        return ([INTERCEPT_NAME] if self.intercept else []) + list(self.features or [])

    @property
    def p(self) -> int:
        return len(self.column_names)


@dataclass
class DataBatch:
    X: np.ndarray
    y: np.ndarray | None
    w: np.ndarray | None = None

    @property
    def m(self) -> int:
        return self.X.shape[0]


@dataclass
class PassCounter:
    """Counts full reads of each data file plus rows and batches delivered."""

    reads: Counter = field(default_factory=Counter)
    rows: int = 0
    batches: int = 0

    @property
    def passes(self) -> int:
        return max(self.reads.values(), default=0)


def _is_binary(path) -> bool:
    with open(path, "rb") as f:
        return f.read(4) == BINARY_MAGIC


def _comment_lines(path) -> int:
    k = 0
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.startswith("#"):
                break
            k += 1
    return k


def _binary_header(path) -> tuple[int, int]:
    with open(path, "rb") as f:
        raw = f.read(_BIN_HEADER.size)
    if len(raw) < _BIN_HEADER.size:
        raise DataError(f"{path}: truncated binary header")
    magic, version, n, p = _BIN_HEADER.unpack(raw)
    if magic != BINARY_MAGIC or version != BINARY_VERSION:
        raise DataError(f"{path}: not a version-{BINARY_VERSION} SSRG file")
    size = Path(path).stat().st_size
    if size != _BIN_HEADER.size + 8 * n * p:
        raise DataError(f"{path}: expected {n}x{p} values, file size is {size} bytes")
    return n, p


def read_header(path) -> list[str]:
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    if _is_binary(path):
        _, p = _binary_header(path)
        sidecar = Path(str(path) + ".json")
        if sidecar.exists():
            cols = json.loads(sidecar.read_text()).get("columns")
            if cols and len(cols) == p:
                return list(cols)
        return [f"c{j}" for j in range(p)]
    skip = _comment_lines(path)
    with open(path, encoding="utf-8", newline="") as f:
        for _ in range(skip):
            f.readline()
        row = next(csv.reader(f), None)
    if not row:
        raise DataError(f"{path}: missing CSV header")
    return [c.strip() for c in row]


def _locate_csv_problem(path, skip: int, header: list[str], wanted: list[str]) -> str:
    """Slow rescan used only after a fast-path failure, for a row-numbered message."""
    idx = [header.index(c) for c in wanted]
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        for _ in range(skip + 1):
            next(reader, None)
        for r, row in enumerate(reader, start=1):
            if len(row) != len(header):
                return f"row {r}: expected {len(header)} fields, got {len(row)} (ragged row)"
            for j in idx:
                try:
                    v = float(row[j])
                except ValueError:
                    return f"row {r}: column {header[j]!r}: cannot parse {row[j]!r} as a number"
                if not math.isfinite(v):
                    return f"row {r}: column {header[j]!r}: non-finite value {row[j]!r}"
    return "unreadable CSV content"


def _csv_blocks(path, header: list[str], wanted: list[str]) -> Iterator[np.ndarray]:
    skip = _comment_lines(path)
    types = {c: pa.float64() for c in wanted}
    try:
        reader = pacsv.open_csv(
            str(path),
            read_options=pacsv.ReadOptions(skip_rows=skip, block_size=CSV_BLOCK_BYTES, use_threads=False),
            convert_options=pacsv.ConvertOptions(include_columns=wanted, column_types=types),
        )
        for rb in reader:
            if rb.num_rows == 0:
                continue
            if any(col.null_count for col in rb.columns):
                raise pa.ArrowInvalid("empty numeric cell")
            block = np.column_stack([rb.column(c).to_numpy(zero_copy_only=False) for c in wanted])
            if not np.all(np.isfinite(block)):
                raise pa.ArrowInvalid("non-finite value")
            yield block
    except pa.ArrowInvalid as exc:
        raise DataError(f"{path}: {_locate_csv_problem(path, skip, header, wanted)}") from exc


def _binary_blocks(path, header: list[str], wanted: list[str]) -> Iterator[np.ndarray]:
    n, p = _binary_header(path)
    idx = [header.index(c) for c in wanted]
    with open(path, "rb") as f:
        f.seek(_BIN_HEADER.size)
        done = 0
        while done < n:
            k = min(BIN_BLOCK_ROWS, n - done)
            raw = f.read(8 * k * p)
            if len(raw) != 8 * k * p:
                raise DataError(f"{path}: truncated at row {done + 1}")
            block = np.frombuffer(raw, dtype="<f8").reshape(k, p)[:, idx]
            if not np.all(np.isfinite(block)):
                bad = done + 1 + int(np.argmax(~np.all(np.isfinite(block), axis=1)))
                raise DataError(f"{path}: row {bad}: non-finite value")
            done += k
            yield block


def _rebatch(blocks: Iterator[np.ndarray], batch_size: int) -> Iterator[np.ndarray]:
    carry = None
    for block in blocks:
        if carry is not None:
            block = np.concatenate([carry, block])
            carry = None
        full = (block.shape[0] // batch_size) * batch_size
        for start in range(0, full, batch_size):
            yield block[start:start + batch_size]
        if full < block.shape[0]:
            carry = block[full:]
    if carry is not None:
        yield carry


def stream_batches(
    path,
    schema: DatasetSchema,
    batch_size: int = DEFAULT_BATCH_SIZE,
    counter: PassCounter | None = None,
) -> Iterator[DataBatch]:
    """Yield ``DataBatch`` objects covering the file once, in row order."""
    if batch_size < 1:
        raise ValueError("batch_size must be at least 1")
    header = read_header(path)
    schema = schema.resolve(header)
    wanted = list(schema.features)
    k = len(wanted)
    if schema.response is not None:
        wanted.append(schema.response)
    if schema.weight is not None:
        wanted.append(schema.weight)
    iw = len(wanted) - 1
    blocks = _binary_blocks if _is_binary(path) else _csv_blocks
    if counter is not None:
        counter.reads[str(Path(path).resolve())] += 1
    for chunk in _rebatch(blocks(path, header, wanted), batch_size):
        X = chunk[:, :k]
        if schema.intercept:
            X = np.hstack([np.ones((chunk.shape[0], 1)), X])
        else:
            X = np.ascontiguousarray(X)
        y = chunk[:, k].copy() if schema.response is not None else None
        w = chunk[:, iw].copy() if schema.weight is not None else None
        if counter is not None:
            counter.rows += chunk.shape[0]
            counter.batches += 1
        yield DataBatch(X, y, w)


def stream_column(path, name: str, batch_size: int = DEFAULT_BATCH_SIZE) -> Iterator[np.ndarray]:
    """Yield one named column in batches."""
    header = read_header(path)
    if name not in header:
        raise DataError(f"{path}: missing column {name!r}; file has {header}")
    blocks = _binary_blocks if _is_binary(path) else _csv_blocks
    for chunk in _rebatch(blocks(path, header, [name]), batch_size):
        yield chunk[:, 0].copy()


def new_accumulator(model_kind: str, p: int, grid=None):
    if model_kind in (LINEAR, "ridge"):
        return LinRegSS(p)
    if model_kind == WEIGHTED:
        return WeightedSS(p)
    if model_kind == BOXCOX:
        return BoxCoxSS(p, grid=list(grid) if grid is not None else [1.0])
    raise ValueError(f"unknown model kind {model_kind!r}")


def accumulate(batches, acc):
    """Fold batches into ``acc`` and return it."""
    weighted = isinstance(acc, WeightedSS)
    for b in batches:
        if weighted:
            if b.w is None:
                raise DataError("weighted regression needs a weight column")
            acc.update_batch(b.X, b.y, b.w)
        else:
            acc.update_batch(b.X, b.y)
    return acc


def accumulate_file(path, schema, model_kind, grid=None, batch_size=DEFAULT_BATCH_SIZE, counter=None):
    resolved = schema.resolve(read_header(path))
    acc = new_accumulator(model_kind, resolved.p, grid)
    return accumulate(stream_batches(path, schema, batch_size, counter), acc)


# -- artifacts ---------------------------------------------------------------

def _upper(S: np.ndarray) -> list[float]:
    return S[np.triu_indices(S.shape[0])].tolist()


def _from_upper(values, p: int) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (p * (p + 1) // 2,):
        raise ArtifactError(f"upper triangle has {values.size} entries, expected {p * (p + 1) // 2}")
    S = np.zeros((p, p))
    S[np.triu_indices(p)] = values
    return S + np.triu(S, 1).T


def _dump(path, doc) -> None:
    try:
        text = json.dumps(doc, indent=1, allow_nan=False)
    except ValueError as exc:
        raise ArtifactError(f"refusing to write non-finite values to {path}") from exc
    Path(path).write_text(text + "\n")


def _load(path, kind_key="model_kind") -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ArtifactError(f"{path}: malformed artifact ({exc})") from exc
    if not isinstance(doc, dict) or kind_key not in doc:
        raise ArtifactError(f"{path}: malformed artifact")
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ArtifactError(f"{path}: schema_version {doc.get('schema_version')!r}, expected {SCHEMA_VERSION}")
    return doc


def ss_to_dict(ss, meta: dict | None = None) -> dict:
    doc = {"schema_version": SCHEMA_VERSION, "model_kind": ss.kind, "p": ss.p, "n": ss.n}
    if isinstance(ss, LinRegSS):
        doc.update(s_yy=ss.s_yy, s_xy=ss.s_xy.tolist(), S_xx=_upper(ss.S_xx))
    elif isinstance(ss, WeightedSS):
        doc.update(s_wyy=ss.s_wyy, s_wxy=ss.s_wxy.tolist(), S_wxx=_upper(ss.S_xx))
    else:
        doc.update(
            grid=list(ss.grid),
            s_logy=ss.s_logy,
            s_cyy=ss.s_cyy.tolist(),
            s_cxy=ss.s_cxy.T.tolist(),
            S_xx=_upper(ss.S_xx),
        )
    if meta:
        doc["meta"] = meta
    return doc


def ss_from_dict(doc: dict):
    try:
        kind, p, n = doc["model_kind"], int(doc["p"]), int(doc["n"])
        if kind == LINEAR:
            ss = LinRegSS(p, n, float(doc["s_yy"]), _vec(doc["s_xy"], p), np.asfortranarray(_from_upper(doc["S_xx"], p)))
        elif kind == WEIGHTED:
            ss = WeightedSS(p, n, float(doc["s_wyy"]), _vec(doc["s_wxy"], p), np.asfortranarray(_from_upper(doc["S_wxx"], p)))
        elif kind == BOXCOX:
            grid = [float(c) for c in doc["grid"]]
            s_cxy = np.asarray(doc["s_cxy"], dtype=np.float64)
            if s_cxy.shape != (len(grid), p):
                raise ArtifactError(f"s_cxy has shape {s_cxy.shape}, expected {(len(grid), p)}")
            ss = BoxCoxSS(
                p, grid, n, float(doc["s_logy"]), _vec(doc["s_cyy"], len(grid)),
                np.ascontiguousarray(s_cxy.T), np.asfortranarray(_from_upper(doc["S_xx"], p)),
            )
        else:
            raise ArtifactError(f"unknown model_kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ArtifactError):
            raise
        raise ArtifactError(f"malformed SS artifact: {exc!r}") from exc
    if n < 0:
        raise ArtifactError("negative observation count")
    return ss


def _vec(values, p: int) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (p,):
        raise ArtifactError(f"vector has shape {v.shape}, expected ({p},)")
    return v


def write_ss(path, ss, meta: dict | None = None) -> None:
    _dump(path, ss_to_dict(ss, meta))


def read_ss(path, with_meta: bool = False):
    doc = _load(path)
    ss = ss_from_dict(doc)
    return (ss, doc.get("meta", {})) if with_meta else ss


def _score_out(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def fit_to_dict(fit: FitResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "model_kind": fit.model_kind,
        "params": dict(fit.params),
        "beta": fit.beta.tolist(),
        "sigma2": fit.sigma2,
        "cov": _upper(fit.cov),
        "n": fit.n,
        "p": fit.p,
        "score": _score_out(fit.score),
        "degenerate": fit.degenerate,
        "used_generalized_inverse": fit.used_generalized_inverse,
        "column_names": fit.column_names,
        "intercept_flag": fit.intercept,
    }


def fit_from_dict(doc: dict) -> FitResult:
    try:
        p = int(doc["p"])
        return FitResult(
            model_kind=doc["model_kind"],
            beta=_vec(doc["beta"], p),
            sigma2=float(doc["sigma2"]),
            cov=_from_upper(doc["cov"], p),
            n=int(doc["n"]),
            p=p,
            score=float(doc["score"]),
            used_generalized_inverse=bool(doc["used_generalized_inverse"]),
            params=dict(doc.get("params", {})),
            degenerate=bool(doc.get("degenerate", False)),
            column_names=doc.get("column_names"),
            intercept=bool(doc.get("intercept_flag", False)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ArtifactError):
            raise
        raise ArtifactError(f"malformed model artifact: {exc!r}") from exc


def write_model(path, fit: FitResult) -> None:
    _dump(path, fit_to_dict(fit))


def read_model(path) -> FitResult:
    return fit_from_dict(_load(path))


# -- synthetic data ----------------------------------------------------------

SYNTH_CHUNK_ROWS = 65536


def generate_synthetic(
    path,
    n: int,
    p: int,
    beta=None,
    sigma: float = 1.0,
    seed: int = 0,
    positive_y: bool = False,
    binary: bool = False,
) -> np.ndarray:
    """Write a simulated linear-model dataset and return the true coefficients.

    Features are i.i.d. uniform on [-1, 1]; ``y = b0 + X b + sigma * z`` with
    standard normal ``z``. ``beta`` holds either p slopes or an intercept
    followed by p slopes; when omitted it is drawn (standard normal, with
    intercept) from the same generator. With ``positive_y`` the response is
    replaced by ``exp(y / max(1, ||beta||_1))``.
    """
    if n < 1 or p < 1:
        raise ValueError("n and p must be positive")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    rng = np.random.Generator(np.random.PCG64(seed))
    beta = rng.standard_normal(p + 1) if beta is None else np.asarray(beta, dtype=np.float64)
    if beta.shape == (p + 1,):
        b0, slope = float(beta[0]), beta[1:]
    elif beta.shape == (p,):
        b0, slope = 0.0, beta
    else:
        raise ValueError(f"beta must have {p} or {p + 1} entries, got {beta.shape}")
    scale = max(1.0, float(np.sum(np.abs(beta))))
    columns = [f"x{j}" for j in range(1, p + 1)] + ["y"]
    meta = {
        "generator": "ssreg.generate_synthetic",
        "rng": RNG_ALGORITHM,
        "seed": seed,
        "n": n,
        "p": p,
        "beta": beta.tolist(),
        "intercept_in_beta": beta.shape == (p + 1,),
        "sigma": sigma,
        "features": "iid uniform[-1,1]",
        "noise": "iid standard normal",
        "positive_y": positive_y,
        "positive_transform": "y <- exp(y / max(1, ||beta||_1))" if positive_y else None,
        "columns": columns,
    }

    def chunks():
        done = 0
        while done < n:
            m = min(SYNTH_CHUNK_ROWS, n - done)
            X = rng.uniform(-1.0, 1.0, size=(m, p))
            z = rng.standard_normal(m)
            y = b0 + X @ slope + sigma * z
            if positive_y:
                y = np.exp(y / scale)
            done += m
            yield np.column_stack([X, y])

    if binary:
        with open(path, "wb") as f:
            f.write(_BIN_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, n, p + 1))
            for block in chunks():
                f.write(block.astype("<f8").tobytes())
        Path(str(path) + ".json").write_text(json.dumps(meta, indent=1) + "\n")
    else:
        opts = pacsv.WriteOptions(include_header=False, quoting_style="none")
        with open(path, "wb") as f:
            f.write(("# " + json.dumps(meta, separators=(",", ":")) + "\n").encode())
            f.write((",".join(columns) + "\n").encode())
            for block in chunks():
                table = pa.table({c: block[:, j] for j, c in enumerate(columns)})
                pacsv.write_csv(table, f, opts)
    return beta


def write_binary(path, data, columns: list[str] | None = None) -> None:
    """Write a 2-D array in the binary row format (plus optional column sidecar)."""
    data = np.asarray(data, dtype=np.float64)
    n, p = data.shape
    with open(path, "wb") as f:
        f.write(_BIN_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, n, p))
        f.write(data.astype("<f8").tobytes())
    if columns is not None:
        Path(str(path) + ".json").write_text(json.dumps({"columns": list(columns)}) + "\n")


def write_csv(path, data, columns: list[str]) -> None:
    """Small-scale CSV writer (full round-trip precision)."""
    data = np.asarray(data, dtype=np.float64).reshape(-1, len(columns))
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(",".join(columns) + "\n")
        for row in data:
            f.write(",".join(repr(float(v)) for v in row) + "\n")
