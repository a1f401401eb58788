"""Sufficient-statistics accumulators.

Each accumulator holds the additive aggregates a model needs, so batches,
shards and whole files combine by plain addition and a shard is removed
by subtraction. Sums are plain float64; ``n`` is an exact integer.

The cross-product matrix is accumulated in its upper triangle only (BLAS
``syrk``/``syr``) and mirrored when read through ``S_xx``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dsyrk

from .errors import (
    DimensionMismatch,
    GridMismatch,
    NegativeCount,
    NegativeWeight,
    NonPositiveResponse,
)

LINEAR = "linear"
WEIGHTED = "weighted"
BOXCOX = "boxcox"
DEFAULT_BATCH_SIZE = 128


def _mirror(upper: np.ndarray) -> np.ndarray:
    return np.triu(upper) + np.triu(upper, 1).T


def _xtx_into(S: np.ndarray, X: np.ndarray) -> np.ndarray:
    # S is Fortran-ordered so syrk updates it in place
    if X.shape[0] == 0:
        return S
    return dsyrk(1.0, X, beta=1.0, c=S, trans=1, lower=0, overwrite_c=1)


def _as_batch(X, y, p: int) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim == 1 and X.size == 0:
        X = X.reshape(0, p)
    if X.ndim != 2 or X.shape[1] != p:
        raise DimensionMismatch(f"batch has shape {X.shape}, accumulator expects p={p}")
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise DimensionMismatch(f"{X.shape[0]} rows in X but response has shape {y.shape}")
    return X, y


def _as_row(x, p: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (p,):
        raise DimensionMismatch(f"row has shape {x.shape}, accumulator expects p={p}")
    return x


class _Accumulator:
    """Shared merge/subtract plumbing; subclasses list their summed fields."""

    _sums: tuple[str, ...] = ()

    def _check_compatible(self, other) -> None:
        if type(other) is not type(self):
            raise DimensionMismatch(f"cannot combine {type(self).__name__} with {type(other).__name__}")
        if other.p != self.p:
            raise DimensionMismatch(f"dimension mismatch: p={self.p} vs p={other.p}")

    def _combine(self, other, sign: float):
        self._check_compatible(other)
        out = self.copy()
        out.n = self.n + other.n if sign > 0 else self.n - other.n
        for name in self._sums:
            a = getattr(self, name)
            b = getattr(other, name)
            setattr(out, name, a + b if sign > 0 else a - b)
        out._xx = np.asfortranarray(self._xx + sign * other._xx)
        return out

    def merge(self, other):
        return self._combine(other, 1.0)

    def subtract(self, other):
        self._check_compatible(other)
        if other.n > self.n:
            raise NegativeCount(f"cannot remove {other.n} observations from {self.n}")
        return self._combine(other, -1.0)

    __add__ = merge
    __sub__ = subtract

    @property
    def S_xx(self) -> np.ndarray:
        return _mirror(self._xx)

    def copy(self):
        out = type(self).__new__(type(self))
        for k, v in self.__dict__.items():
            setattr(out, k, v.copy() if isinstance(v, (np.ndarray, list)) else v)
        return out

    def fields(self) -> dict:
        """Public fields as plain values (the serialized view)."""
        raise NotImplementedError


@dataclass(eq=False)
class LinRegSS(_Accumulator):
    """Accumulates (n, sum y^2, sum x*y, sum x x^T). Also serves ridge fits."""

    p: int
    n: int = 0
    s_yy: float = 0.0
    s_xy: np.ndarray = field(default=None)
    _xx: np.ndarray = field(default=None, repr=False)

    kind = LINEAR
    _sums = ("s_yy", "s_xy")

    def __post_init__(self):
        if self.p < 1:
            raise DimensionMismatch("p must be positive")
        if self.s_xy is None:
            self.s_xy = np.zeros(self.p)
        if self._xx is None:
            self._xx = np.zeros((self.p, self.p), order="F")

    def update_row(self, x, y: float) -> "LinRegSS":
        x = _as_row(x, self.p)
        y = float(y)
        self.n += 1
        self.s_yy += y * y
        self.s_xy += x * y
        self._xx = _xtx_into(self._xx, x[None, :])
        return self

    def update_batch(self, X, y) -> "LinRegSS":
        X, y = _as_batch(X, y, self.p)
        self.n += X.shape[0]
        self.s_yy += float(y @ y)
        self.s_xy += X.T @ y
        self._xx = _xtx_into(self._xx, X)
        return self

    def fields(self) -> dict:
        return {"n": self.n, "s_yy": self.s_yy, "s_xy": self.s_xy, "S_xx": self.S_xx}


@dataclass(eq=False)
class WeightedSS(_Accumulator):
    """Weighted aggregates. ``n`` counts every row, including zero-weight ones."""

    p: int
    n: int = 0
    s_wyy: float = 0.0
    s_wxy: np.ndarray = field(default=None)
    _xx: np.ndarray = field(default=None, repr=False)

    kind = WEIGHTED
    _sums = ("s_wyy", "s_wxy")

    def __post_init__(self):
        if self.p < 1:
            raise DimensionMismatch("p must be positive")
        if self.s_wxy is None:
            self.s_wxy = np.zeros(self.p)
        if self._xx is None:
            self._xx = np.zeros((self.p, self.p), order="F")

    @property
    def S_wxx(self) -> np.ndarray:
        return self.S_xx

    def update_row(self, x, y: float, w: float) -> "WeightedSS":
        x = _as_row(x, self.p)
        y, w = float(y), float(w)
        if not w >= 0:
            raise NegativeWeight(f"weight must be non-negative, got {w}")
        self.n += 1
        self.s_wyy += w * y * y
        self.s_wxy += x * (w * y)
        if w > 0:
            self._xx = _xtx_into(self._xx, (math.sqrt(w) * x)[None, :])
        return self

    def update_batch(self, X, y, w) -> "WeightedSS":
        X, y = _as_batch(X, y, self.p)
        w = np.asarray(w, dtype=np.float64)
        if w.shape != y.shape:
            raise DimensionMismatch(f"weights have shape {w.shape}, response {y.shape}")
        if not np.all(w >= 0):
            raise NegativeWeight("weights must be non-negative")
        wy = w * y
        self.n += X.shape[0]
        self.s_wyy += float(wy @ y)
        self.s_wxy += X.T @ wy
        self._xx = _xtx_into(self._xx, X * np.sqrt(w)[:, None])
        return self

    def fields(self) -> dict:
        return {"n": self.n, "s_wyy": self.s_wyy, "s_wxy": self.s_wxy, "S_wxx": self.S_xx}


def boxcox_transform(y, c: float):
    """Box-Cox power transform, elementwise; ``log y`` at ``c == 0``."""
    y_arr = np.asarray(y, dtype=np.float64)
    if not np.all(y_arr > 0):
        raise NonPositiveResponse("Box-Cox transform needs strictly positive responses")
    if c == 0:
        out = np.log(y_arr)
    else:
        out = np.expm1(c * np.log(y_arr)) / c
    return float(out) if out.ndim == 0 else out


def _boxcox_columns(logy: np.ndarray, grid: np.ndarray) -> np.ndarray:
    # m x |C| matrix of transformed responses, built from log y once
    Z = np.outer(logy, grid)
    nz = grid != 0
    out = np.empty_like(Z)
    out[:, nz] = np.expm1(Z[:, nz]) / grid[nz]
    out[:, ~nz] = logy[:, None]
    return out


@dataclass(eq=False)
class BoxCoxSS(_Accumulator):
    """One shared cross-product matrix plus per-power (s_cyy, s_cxy) slots.

    ``s_cyy`` has one entry per grid value; ``s_cxy`` is p x |grid| with one
    column per grid value.
    """

    p: int
    grid: list = field(default_factory=lambda: [1.0])
    n: int = 0
    s_logy: float = 0.0
    s_cyy: np.ndarray = field(default=None)
    s_cxy: np.ndarray = field(default=None)
    _xx: np.ndarray = field(default=None, repr=False)

    kind = BOXCOX
    _sums = ("s_logy", "s_cyy", "s_cxy")

    def __post_init__(self):
        if self.p < 1:
            raise DimensionMismatch("p must be positive")
        self.grid = [float(c) for c in self.grid]
        if not self.grid:
            raise GridMismatch("Box-Cox grid must be non-empty")
        self._grid = np.asarray(self.grid)
        k = len(self.grid)
        if self.s_cyy is None:
            self.s_cyy = np.zeros(k)
        if self.s_cxy is None:
            self.s_cxy = np.zeros((self.p, k))
        if self._xx is None:
            self._xx = np.zeros((self.p, self.p), order="F")

    def _check_compatible(self, other) -> None:
        super()._check_compatible(other)
        if other.grid != self.grid:
            raise GridMismatch(f"grids differ: {self.grid} vs {other.grid}")

    def update_row(self, x, y: float) -> "BoxCoxSS":
        return self.update_batch(_as_row(x, self.p)[None, :], [y])

    def update_batch(self, X, y) -> "BoxCoxSS":
        X, y = _as_batch(X, y, self.p)
        if not np.all(y > 0):
            raise NonPositiveResponse("Box-Cox regression needs strictly positive responses")
        logy = np.log(y)
        Yc = _boxcox_columns(logy, self._grid)
        self.n += X.shape[0]
        self.s_logy += float(logy.sum())
        self.s_cyy += np.einsum("ij,ij->j", Yc, Yc)
        self.s_cxy += X.T @ Yc
        self._xx = _xtx_into(self._xx, X)
        return self

    def slot(self, c: float) -> tuple[float, np.ndarray]:
        j = self.grid.index(float(c))
        return float(self.s_cyy[j]), self.s_cxy[:, j].copy()

    def fields(self) -> dict:
        return {
            "n": self.n,
            "grid": list(self.grid),
            "s_logy": self.s_logy,
            "s_cyy": self.s_cyy,
            "s_cxy": self.s_cxy,
            "S_xx": self.S_xx,
        }


RidgeSS = LinRegSS


def empty_like(acc):
    if isinstance(acc, BoxCoxSS):
        return BoxCoxSS(acc.p, grid=acc.grid)
    return type(acc)(acc.p)


def merge(a, b):
    return a.merge(b)


def subtract(a, b):
    return a.subtract(b)


def merge_all(accs):
    accs = list(accs)
    if not accs:
        raise ValueError("nothing to merge")
    out = accs[0].copy()
    for acc in accs[1:]:
        out = out.merge(acc)
    return out
