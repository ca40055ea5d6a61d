"""Linear measurement operators acting on flat column-major tensor data."""
from __future__ import annotations

from abc import ABC, abstractmethod
from pathlib import Path
from typing import Sequence

import numpy as np

from .linalg import make_rng
from .tensor import DenseTensor


def _flat(X, size: int) -> np.ndarray:
    data = X.data if isinstance(X, DenseTensor) else np.asarray(X, dtype=np.float64).ravel()
    if data.size != size:
        raise ValueError(f"input has {data.size} entries, operator expects {size}")
    return data


class LinearMeasurement(ABC):
    """A linear map from tensors of shape ``dims`` to ``R^m``, with its adjoint."""

    dims: tuple[int, ...]

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    @abstractmethod
    def m(self) -> int: ...

    @abstractmethod
    def apply_flat(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def adjoint_flat(self, z: np.ndarray) -> np.ndarray: ...

    def apply(self, X) -> np.ndarray:
        return self.apply_flat(_flat(X, self.size))

    def adjoint(self, z) -> DenseTensor:
        z = np.asarray(z, dtype=np.float64).ravel()
        if z.size != self.m:
            raise ValueError(f"measurement vector has {z.size} entries, expected {self.m}")
        return DenseTensor(self.dims, self.adjoint_flat(z))

    def op_norm(self) -> float:
        return float(np.linalg.norm(self.as_matrix(), 2))

    def as_matrix(self) -> np.ndarray:
        """Dense ``m x N`` matrix of the operator (for small problems and tests)."""
        return np.stack([self.apply_flat(e) for e in np.eye(self.size)], axis=1)


class GaussianOperator(LinearMeasurement):
    """``z_i = <G_i, X>`` with each ``G_i`` i.i.d. standard normal, stored as rows of an m x N matrix."""

    def __init__(self, dims: Sequence[int], m: int, seed: int):
        self.dims = tuple(int(d) for d in dims)
        if m < 0:
            raise ValueError(f"number of measurements must be nonnegative, got {m}")
        self.seed = seed
        self.matrix = make_rng(seed).standard_normal((m, self.size))
        self.matrix.setflags(write=False)

    @property
    def m(self) -> int:
        return self.matrix.shape[0]

    def apply_flat(self, x):
        return self.matrix @ x

    def adjoint_flat(self, z):
        return self.matrix.T @ z

    def as_matrix(self):
        return np.array(self.matrix)

    def __repr__(self):
        return f"GaussianOperator(dims={self.dims}, m={self.m}, seed={self.seed})"


class SamplingOperator(LinearMeasurement):
    """Restriction ``P_Omega`` to a sorted set of linear (column-major) indices."""

    def __init__(self, dims: Sequence[int], indices: Sequence[int]):
        self.dims = tuple(int(d) for d in dims)
        idx = np.asarray(indices, dtype=np.int64).ravel()
        if np.unique(idx).size != idx.size:
            raise ValueError("sample indices must be unique")
        if idx.size and (idx.min() < 0 or idx.max() >= self.size):
            raise ValueError("sample index out of range")
        self.indices = np.sort(idx)
        self.indices.setflags(write=False)

    @property
    def m(self) -> int:
        return self.indices.size

    @property
    def ratio(self) -> float:
        return self.m / self.size

    def mask(self) -> np.ndarray:
        out = np.zeros(self.size, dtype=bool)
        out[self.indices] = True
        return out

    def apply_flat(self, x):
        return x[self.indices]

    def adjoint_flat(self, z):
        out = np.zeros(self.size)
        out[self.indices] = z
        return out

    def op_norm(self):
        return 1.0 if self.m else 0.0

    def __repr__(self):
        return f"SamplingOperator(dims={self.dims}, m={self.m})"


def gaussian_operator(dims: Sequence[int], m: int, seed: int) -> GaussianOperator:
    return GaussianOperator(dims, m, seed)


def sampling_operator(dims: Sequence[int], rho: float, seed, scheme: str = "fixed") -> SamplingOperator:
    """Observe a uniformly random subset of entries with ratio ``rho``.

    ``scheme="fixed"`` draws exactly ``round(rho * N)`` indices without replacement;
    ``scheme="bernoulli"`` keeps each entry independently with probability ``rho``.
    """
    if not 0 < rho <= 1:
        raise ValueError(f"observation ratio must lie in (0, 1], got {rho}")
    N = int(np.prod(dims))
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    if scheme == "fixed":
        count = int(np.floor(rho * N + 0.5))
        idx = rng.choice(N, size=count, replace=False)
    elif scheme == "bernoulli":
        idx = np.flatnonzero(rng.random(N) < rho)
    else:
        raise ValueError(f"unknown sampling scheme {scheme!r}")
    return SamplingOperator(dims, idx)


def project_omega(X: DenseTensor, omega) -> DenseTensor:
    """Zero every entry of ``X`` outside ``omega`` (a SamplingOperator or index list)."""
    idx = omega.indices if isinstance(omega, SamplingOperator) else np.asarray(omega, dtype=np.int64)
    out = np.zeros(X.size)
    out[idx] = X.data[idx]
    return DenseTensor(X.dims, out)


def save_indices_csv(op: SamplingOperator, path: str | Path):
    np.savetxt(path, op.indices, fmt="%d", header=",".join(map(str, op.dims)), comments="# dims=")


def load_indices_csv(path: str | Path) -> SamplingOperator:
    with open(path) as fh:
        header = fh.readline()
    if not header.startswith("# dims="):
        raise ValueError(f"{path}: missing dims header")
    dims = tuple(int(d) for d in header[len("# dims="):].strip().split(","))
    idx = np.loadtxt(path, dtype=np.int64, comments="#", ndmin=1)
    return SamplingOperator(dims, idx)
