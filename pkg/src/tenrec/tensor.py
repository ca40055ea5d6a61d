"""Dense K-way tensors stored column-major, with matricizations and multilinear products.

Modes and split indices are 1-based, matching the usual tensor-algebra notation:
``unfold(X, 1)`` is the mode-1 unfolding and ``square_reshape(X, j)`` groups
modes ``1..j`` into rows.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class DenseTensor:
    """Real tensor with shape ``dims`` whose flat ``data`` has the first index varying fastest."""

    dims: tuple[int, ...]
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) < 1 or any(d < 1 for d in dims):
            raise ValueError(f"dims must be a nonempty list of positive integers, got {dims}")
        data = np.array(self.data, dtype=np.float64).ravel()
        if data.size != int(np.prod(dims)):
            raise ValueError(f"data has {data.size} entries, expected {int(np.prod(dims))}")
        data.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "data", data)

    @classmethod
    def from_array(cls, array: np.ndarray) -> "DenseTensor":
        array = np.asarray(array, dtype=np.float64)
        return cls(array.shape, array.ravel(order="F"))

    @classmethod
    def zeros(cls, dims: Sequence[int]) -> "DenseTensor":
        return cls(tuple(dims), np.zeros(int(np.prod(dims))))

    @property
    def order(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return self.data.size

    def to_array(self) -> np.ndarray:
        """View as an ndarray indexed ``[i_1, ..., i_K]`` (0-based)."""
        return self.data.reshape(self.dims, order="F")

    def __add__(self, other: "DenseTensor") -> "DenseTensor":
        _check_same_dims(self, other)
        return DenseTensor(self.dims, self.data + other.data)

    def __sub__(self, other: "DenseTensor") -> "DenseTensor":
        _check_same_dims(self, other)
        return DenseTensor(self.dims, self.data - other.data)

    def __mul__(self, alpha: float) -> "DenseTensor":
        return DenseTensor(self.dims, float(alpha) * self.data)

    __rmul__ = __mul__

    def __neg__(self) -> "DenseTensor":
        return DenseTensor(self.dims, -self.data)


def _check_same_dims(a: DenseTensor, b: DenseTensor):
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")


def _check_mode(mode: int, order: int):
    if not 1 <= mode <= order:
        raise ValueError(f"mode must lie in [1, {order}], got {mode}")


@dataclass(frozen=True)
class TuckerFactors:
    core: DenseTensor
    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        factors = tuple(np.asarray(U, dtype=np.float64) for U in self.factors)
        if len(factors) != self.core.order:
            raise ValueError("need one factor matrix per core mode")
        for i, (U, r) in enumerate(zip(factors, self.core.dims)):
            if U.ndim != 2 or U.shape[1] != r:
                raise ValueError(f"factor {i + 1} has shape {U.shape}, expected (n, {r})")
        object.__setattr__(self, "factors", factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(U.shape[0] for U in self.factors)

    @property
    def ranks(self) -> tuple[int, ...]:
        return self.core.dims


@dataclass(frozen=True)
class CPFactors:
    """Weights ``lambda_i`` and per-mode matrices whose i-th column is the i-th term's vector."""

    weights: np.ndarray
    vectors: tuple[np.ndarray, ...]

    def __post_init__(self):
        weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64))
        vectors = tuple(np.asarray(A, dtype=np.float64).reshape(len(A), -1) for A in self.vectors)
        if weights.size < 1 or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be a nonempty list of finite reals")
        for A in vectors:
            if A.shape[1] != weights.size:
                raise ValueError(f"vector matrix has {A.shape[1]} columns, expected {weights.size}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "vectors", vectors)

    @property
    def rank(self) -> int:
        return self.weights.size


def unfold(X: DenseTensor, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding: ``n_mode x N/n_mode``, remaining modes in increasing order."""
    _check_mode(mode, X.order)
    arr = np.moveaxis(X.to_array(), mode - 1, 0)
    return arr.reshape(X.dims[mode - 1], -1, order="F")


def fold(M: np.ndarray, mode: int, dims: Sequence[int]) -> DenseTensor:
    dims = tuple(int(d) for d in dims)
    _check_mode(mode, len(dims))
    M = np.asarray(M, dtype=np.float64)
    rest = [d for k, d in enumerate(dims) if k != mode - 1]
    expected = (dims[mode - 1], int(np.prod(rest)))
    if M.shape != expected:
        raise ValueError(f"matrix shape {M.shape} does not match {expected} for mode {mode}")
    arr = M.reshape([dims[mode - 1]] + rest, order="F")
    return DenseTensor.from_array(np.moveaxis(arr, 0, mode - 1))


def mode_product(A: DenseTensor, B: np.ndarray, mode: int) -> DenseTensor:
    """``A x_mode B``: the result's mode unfolding equals ``B @ unfold(A, mode)``."""
    _check_mode(mode, A.order)
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if B.shape[1] != A.dims[mode - 1]:
        raise ValueError(f"B has {B.shape[1]} columns, mode {mode} has length {A.dims[mode - 1]}")
    dims = list(A.dims)
    dims[mode - 1] = B.shape[0]
    return fold(B @ unfold(A, mode), mode, dims)


def tucker_compose(T: TuckerFactors) -> DenseTensor:
    X = T.core
    for i, U in enumerate(T.factors, start=1):
        X = mode_product(X, U, i)
    return X


def cp_compose(F: CPFactors, dims: Sequence[int] | None = None) -> DenseTensor:
    shape = tuple(A.shape[0] for A in F.vectors)
    if dims is not None and tuple(dims) != shape:
        raise ValueError(f"vector lengths {shape} do not match dims {tuple(dims)}")
    letters = "abcdefghijklmnopqrstuvwxyz"[: len(shape)]
    spec = "z," + ",".join(f"{c}z" for c in letters) + "->" + letters
    return DenseTensor.from_array(np.einsum(spec, F.weights, *F.vectors))


def square_reshape(X: DenseTensor, j: int) -> np.ndarray:
    """Columnwise reshape of the mode-1 unfolding into ``prod(n_1..n_j) x prod(n_{j+1}..n_K)``."""
    if not 1 <= j <= X.order - 1:
        raise ValueError(f"split index must lie in [1, {X.order - 1}], got {j}")
    rows = int(np.prod(X.dims[:j]))
    return X.data.reshape(rows, -1, order="F")


def square_fold(M: np.ndarray, dims: Sequence[int], j: int) -> DenseTensor:
    dims = tuple(int(d) for d in dims)
    if not 1 <= j <= len(dims) - 1:
        raise ValueError(f"split index must lie in [1, {len(dims) - 1}], got {j}")
    M = np.asarray(M, dtype=np.float64)
    expected = (int(np.prod(dims[:j])), int(np.prod(dims[j:])))
    if M.shape != expected:
        raise ValueError(f"matrix shape {M.shape} does not match {expected}")
    return DenseTensor(dims, M.ravel(order="F"))


def square_split(order: int) -> int:
    """Split index of the most balanced reshaping of a cubic tensor, ``floor(K/2)``."""
    return max(1, order // 2)


def inner(X: DenseTensor, Y: DenseTensor) -> float:
    _check_same_dims(X, Y)
    return float(X.data @ Y.data)


def frobenius_norm(X: DenseTensor) -> float:
    return float(np.linalg.norm(X.data))


def kron(*mats: np.ndarray) -> np.ndarray:
    """Kronecker product ``A_1 (x) A_2 (x) ...`` with standard block layout."""
    return reduce(np.kron, (np.atleast_2d(np.asarray(m, dtype=np.float64)) for m in mats))


def save_tensor_csv(X: DenseTensor, path: str | Path):
    """Write ``dims`` on the first line and the column-major data one value per line.

    Values are written with ``repr`` so a round trip is bit-exact.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dims", *X.dims])
        for v in X.data:
            writer.writerow([repr(float(v))])


def load_tensor_csv(path: str | Path) -> DenseTensor:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "dims":
        raise ValueError(f"{path}: missing dims header")
    dims = tuple(int(d) for d in rows[0][1:])
    return DenseTensor(dims, np.array([float(r[0]) for r in rows[1:]]))
