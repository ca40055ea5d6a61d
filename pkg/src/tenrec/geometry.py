"""Sample-complexity formulas and circular-cone geometry for composite-norm recovery.

The lower bound for sums of norms rests on one observation: if each norm is
L-Lipschitz w.r.t. the Euclidean norm, every subgradient at ``x0`` lies in the
circular cone around ``x0`` with ``cos^2(theta) = ||x0||^2 / (L^2 ||x0||_2^2)``.
The statistical dimension of that cone then caps how many Gaussian
measurements are needed before recovery can succeed.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .linalg import make_rng, nuclear_norm, thin_svd
from .tensor import DenseTensor, square_reshape, square_split, unfold

NormSpec = tuple[Callable[[np.ndarray], float], float]


class VacuousBoundError(ValueError):
    """Raised when a probability bound's preconditions fail and it says nothing."""


# -- closed-form bounds ------------------------------------------------------


def nonconvex_sample_bound(n: int, r: int, K: int) -> int:
    """Measurements that make a Gaussian operator injective on Tucker-rank-r tensors: (2r)^K + 2nrK + 1."""
    n, r, K = int(n), int(r), int(K)
    if n < 1 or r < 0 or K < 1:
        raise ValueError(f"invalid (n, r, K) = {(n, r, K)}")
    return (2 * r) ** K + 2 * n * r * K + 1


def square_sample_exponent(n: int, r: int, K: int):
    """Constant-free measurement count for the square norm, r^floor(K/2) * n^ceil(K/2)."""
    return r ** (K // 2) * n ** (-(-K // 2))


def snn_kappa_worst_case(n: int, r: int, K: int):
    """kappa = r n^(K-1), attained by a Tucker tensor with a supersymmetric core."""
    return r * n ** (K - 1)


def snn_failure_bound(m: float, kappa: float) -> float:
    """Upper bound on the probability that the composite-norm program recovers ``x0``.

    Requires ``kappa > 2`` and ``m <= kappa - 2``; the value is clamped to 1.
    """
    if not kappa > 2 or m > kappa - 2:
        raise VacuousBoundError(f"bound vacuous for m={m}, kappa={kappa}: need kappa > 2 and m <= kappa - 2")
    return min(1.0, 4.0 * math.exp(-((kappa - m - 2) ** 2) / (16.0 * (kappa - 2))))


def circ_sd_bound(n: int, theta: float) -> float:
    return n * math.sin(theta) ** 2 + 2.0


# -- kappa -------------------------------------------------------------------


def kappa(x0: np.ndarray, norms: Sequence[NormSpec], probes: int = 8, seed: int = 0) -> float:
    """``min_i n ||x0||_(i)^2 / (L_i^2 ||x0||_2^2)`` over ``(norm, L_i)`` pairs.

    Each Lipschitz constant is spot-checked on a few random probes.
    """
    x0 = np.asarray(x0, dtype=np.float64).ravel()
    nrm2 = float(x0 @ x0)
    if nrm2 == 0.0:
        raise ValueError("kappa is undefined for the zero signal")
    if not norms:
        raise ValueError("need at least one norm")
    n = x0.size
    rng = make_rng(seed)
    out = math.inf
    for norm, L in norms:
        if not L > 0:
            raise ValueError(f"Lipschitz constant must be positive, got {L}")
        for _ in range(probes):
            p = rng.standard_normal(n)
            if norm(p) > L * np.linalg.norm(p) * (1 + 1e-9):
                raise ValueError(f"norm is not {L}-Lipschitz on a random probe")
        out = min(out, n * norm(x0) ** 2 / (L**2 * nrm2))
    return out


def unfolding_norms(dims: Sequence[int]) -> list[NormSpec]:
    """Nuclear norms of the K unfoldings with ``L_i = sqrt(min(n_i, N/n_i))``."""
    dims = tuple(dims)
    N = int(np.prod(dims))
    specs = []
    for i, n_i in enumerate(dims, start=1):
        def norm(x, i=i):
            return nuclear_norm(unfold(DenseTensor(dims, x), i))

        specs.append((norm, math.sqrt(min(n_i, N // n_i))))
    return specs


def kappa_tensor_snn(X0: DenseTensor) -> float:
    """kappa of the sum-of-nuclear-norms model at ``X0``.

    For cubic tensors this is ``min_i ||X_(i)||_*^2 / ||X||_F^2 * n^(K-1)``.
    """
    nrm2 = float(X0.data @ X0.data)
    if nrm2 == 0.0:
        raise ValueError("kappa is undefined for the zero tensor")
    N = X0.size
    vals = []
    for i, n_i in enumerate(X0.dims, start=1):
        L2 = min(n_i, N // n_i)
        vals.append(N * nuclear_norm(unfold(X0, i)) ** 2 / (L2 * nrm2))
    return min(vals)


# -- circular cones ----------------------------------------------------------


@dataclass(frozen=True)
class CircularConeSpec:
    """All vectors within angle ``theta`` of ``axis``; ``theta = pi/2`` is a halfspace."""

    axis: np.ndarray
    theta: float

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=np.float64).ravel()
        if abs(np.linalg.norm(axis) - 1.0) > 1e-12:
            raise ValueError("cone axis must be a unit vector")
        if not 0 < self.theta <= math.pi / 2:
            raise ValueError(f"cone angle must lie in (0, pi/2], got {self.theta}")
        object.__setattr__(self, "axis", axis)

    @classmethod
    def around(cls, x: np.ndarray, theta: float) -> "CircularConeSpec":
        x = np.asarray(x, dtype=np.float64).ravel()
        return cls(x / np.linalg.norm(x), theta)

    @property
    def n(self) -> int:
        return self.axis.size

    def polar(self) -> "CircularConeSpec":
        return CircularConeSpec(-self.axis, math.pi / 2 - self.theta)

    def contains(self, v: np.ndarray, atol: float = 1e-9) -> bool:
        v = np.asarray(v, dtype=np.float64).ravel()
        nv = np.linalg.norm(v)
        if nv <= atol:
            return True
        return float(v @ self.axis) >= math.cos(self.theta) * nv - atol


def project_circular_cone(g: np.ndarray, cone: CircularConeSpec) -> np.ndarray:
    """Euclidean projection onto ``cone``. Accepts a vector or a stack of row vectors."""
    g = np.asarray(g, dtype=np.float64)
    single = g.ndim == 1
    G = np.atleast_2d(g)
    if G.shape[1] != cone.n:
        raise ValueError(f"vector length {G.shape[1]} does not match cone dimension {cone.n}")
    if not 0 < cone.theta <= math.pi / 2:
        raise ValueError(f"cone angle must lie in (0, pi/2], got {cone.theta}")
    a = cone.axis
    alpha = G @ a
    W = G - alpha[:, None] * a
    beta = np.linalg.norm(W, axis=1)
    if cone.theta == math.pi / 2:
        out = np.where((alpha >= 0)[:, None], G, W)
        return out[0] if single else out
    c, s = math.cos(cone.theta), math.sin(cone.theta)
    inside = beta <= alpha * math.tan(cone.theta)
    # g lies in the polar cone iff its angle to the axis is at least theta + pi/2
    t = alpha * c + beta * s
    polar = t <= 0
    safe_beta = np.where(beta > 0, beta, 1.0)
    boundary = t[:, None] * (c * a + s * W / safe_beta[:, None])
    out = np.where(inside[:, None], G, np.where(polar[:, None], 0.0, boundary))
    return out[0] if single else out


def estimate_statistical_dimension(
    cone: CircularConeSpec, samples: int = 100_000, seed: int = 0, chunk: int = 10_000
) -> tuple[float, float]:
    """Monte-Carlo mean of ``||P_C(g)||^2`` over standard Gaussian ``g``, with its standard error."""
    if samples < 2:
        raise ValueError("need at least two samples")
    rng = make_rng(seed)
    vals = np.empty(samples)
    for start in range(0, samples, chunk):
        stop = min(samples, start + chunk)
        G = rng.standard_normal((stop - start, cone.n))
        P = project_circular_cone(G, cone)
        vals[start:stop] = np.einsum("ij,ij->i", P, P)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples))


# -- cone angles of concise models ------------------------------------------


@dataclass(frozen=True)
class ConeAngle:
    """cos^2 of the subdifferential cone angle and the admissible bracket for its model."""

    norm_kind: str
    cos2: float
    lower: float
    upper: float

    @property
    def inside(self) -> bool:
        tol = 1e-9 * max(1.0, self.upper)
        return self.lower - tol <= self.cos2 <= self.upper + tol

    @property
    def theta(self) -> float:
        return math.acos(math.sqrt(min(1.0, max(0.0, self.cos2))))


NORM_KINDS = ("l1", "column-group", "nuclear", "snn-tensor", "square-tensor")


def table1_cos2(x0, norm_kind: str, rank: int | None = None, strict: bool = True) -> ConeAngle:
    """cos^2(theta) = ||x0||^2 / (L^2 ||x0||_2^2) for one of the supported norm models.

    ``x0`` is a vector for ``l1``, a matrix for ``column-group`` and ``nuclear``,
    and a cubic :class:`DenseTensor` for the tensor norms. The bracket's upper
    end uses the support size, number of nonzero columns, or rank of ``x0``;
    for tensors ``rank`` overrides the numerically detected Tucker rank.
    With ``strict`` a value outside the bracket raises ``ValueError``.
    """
    if norm_kind == "l1":
        x = np.asarray(x0, dtype=np.float64).ravel()
        n = x.size
        k = int(np.count_nonzero(x))
        cos2 = np.sum(np.abs(x)) ** 2 / (n * float(x @ x))
        res = ConeAngle(norm_kind, cos2, 1.0 / n, k / n)
    elif norm_kind == "column-group":
        X = np.asarray(x0, dtype=np.float64)
        n2 = X.shape[1]
        cols = np.linalg.norm(X, axis=0)
        c = int(np.count_nonzero(cols))
        cos2 = np.sum(cols) ** 2 / (n2 * float(np.sum(X * X)))
        res = ConeAngle(norm_kind, cos2, 1.0 / n2, c / n2)
    elif norm_kind == "nuclear":
        X = np.asarray(x0, dtype=np.float64)
        s = thin_svd(X).singular_values
        small = min(X.shape)
        r = int(np.count_nonzero(s > 1e-9 * s[0])) if rank is None else rank
        cos2 = np.sum(s) ** 2 / (small * float(np.sum(s * s)))
        res = ConeAngle(norm_kind, cos2, 1.0 / small, r / small)
    elif norm_kind in ("snn-tensor", "square-tensor"):
        X = x0
        if not isinstance(X, DenseTensor) or len(set(X.dims)) != 1:
            raise ValueError(f"{norm_kind} expects a cubic DenseTensor")
        n, K = X.dims[0], X.order
        nrm2 = float(X.data @ X.data)
        if rank is None:
            from .linalg import numerical_rank

            rank = max(numerical_rank(unfold(X, i)) for i in range(1, K + 1))
        if norm_kind == "snn-tensor":
            cos2 = min(nuclear_norm(unfold(X, i)) ** 2 for i in range(1, K + 1)) / (n * nrm2)
            res = ConeAngle(norm_kind, cos2, 1.0 / n, rank / n)
        else:
            h = K // 2
            cos2 = nuclear_norm(square_reshape(X, square_split(K))) ** 2 / (n**h * nrm2)
            res = ConeAngle(norm_kind, cos2, (1.0 / n) ** h, (rank / n) ** h)
    else:
        raise ValueError(f"unknown norm kind {norm_kind!r}; choose from {NORM_KINDS}")
    if strict and not res.inside:
        raise ValueError(f"cos^2={res.cos2} outside [{res.lower}, {res.upper}] for {norm_kind}")
    return res


def l1_subgradient(x0: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Random element of the l1 subdifferential: sign on the support, uniform in [-1, 1] off it."""
    x0 = np.asarray(x0, dtype=np.float64)
    v = rng.uniform(-1.0, 1.0, size=x0.shape)
    return np.where(x0 != 0, np.sign(x0), v)


def nuclear_subgradient(X0: np.ndarray, rng: np.random.Generator, rtol: float = 1e-9) -> np.ndarray:
    """Random element ``U V^T + W`` of the nuclear-norm subdifferential, ``||W|| <= 1``."""
    svd = thin_svd(X0)
    s = svd.singular_values
    r = int(np.count_nonzero(s > rtol * s[0]))
    U, V = svd.U[:, :r], svd.V[:, :r]
    m, n = X0.shape
    W = rng.standard_normal((m, n))
    W = W - U @ (U.T @ W)
    W = W - (W @ V) @ V.T
    sw = np.linalg.norm(W, 2)
    if sw > 0:
        W *= rng.uniform(0.0, 1.0) / sw
    return U @ V.T + W


# -- reports -----------------------------------------------------------------


@dataclass
class ComplexityReport:
    n: int
    r: int
    K: int
    nonconvex_bound: int
    kappa: float
    square_exponent_bound: float
    notes: list[str] = field(default_factory=list)

    @classmethod
    def build(cls, n: int, r: int, K: int, notes: Sequence[str] = ()) -> "ComplexityReport":
        return cls(
            n=n,
            r=r,
            K=K,
            nonconvex_bound=nonconvex_sample_bound(n, r, K),
            kappa=snn_kappa_worst_case(n, r, K),
            square_exponent_bound=square_sample_exponent(n, r, K),
            notes=list(notes),
        )

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ComplexityReport":
        return cls(**json.loads(text))

    def table(self) -> str:
        rows = [
            ("non-convex", f"{self.nonconvex_bound}", "(2r)^K + 2nrK + 1, sufficient"),
            ("SNN", f"{self.kappa:g}", "kappa = r n^(K-1), necessary scale"),
            ("square-norm", f"{self.square_exponent_bound:g}", "r^floor(K/2) n^ceil(K/2), up to a constant"),
        ]
        head = f"n={self.n} r={self.r} K={self.K}"
        return "\n".join([head] + [f"  {m:<12}{v:>14}   {d}" for m, v, d in rows])
