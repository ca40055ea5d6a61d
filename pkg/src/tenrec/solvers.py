"""Convex recovery of low-rank tensors from linear measurements.

Two solvers:

* accelerated linearized Bregman (ALB) for ``min sum_i lambda_i ||M_i(X)||_*``
  subject to ``A(X) = z``, where each ``M_i`` is a matricization (the unfoldings
  for the sum-of-nuclear-norms model, the square reshaping for the square norm);
* inexact augmented Lagrangian (ALM) matrix completion, used for the square
  norm under entry sampling.

ALB solves the smoothed problem

    min  sum_i (lambda_i ||X_i||_* + ||X_i||^2 / 2mu) + ||W||^2 / 2mu
    s.t. X_i = W,  A(W) = z

by Nesterov-accelerated gradient ascent on its dual.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .linalg import svt_shrink, svt_shrink_partial
from .operators import LinearMeasurement, SamplingOperator
from .tensor import DenseTensor, square_split

Matricization = tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class AlbConfig:
    """Parameters of the accelerated linearized Bregman solver.

    ``mu=None`` anchors the smoothing to ``mu_scale * ||X0||_F`` when a reference
    is known and to ``mu_scale * ||A^*(z)||_F`` otherwise. ``tau=None`` picks
    ``1/(5 mu)``, shrunk when the dual gradient's Lipschitz constant demands it.

    ``stall_window`` (experiment mode only) gives up on a run whose best
    ``rel_error`` over the last window improved by less than ``stall_rtol``
    on the best before it while still above ``stall_floor``.
    """

    mu: float | None = None
    tau: float | None = None
    weights: tuple[float, ...] | None = None
    max_iters: int = 5000
    primal_tol: float = 1e-4
    rel_tol: float | None = 1e-3
    mu_scale: float = 50.0
    precondition: bool = True
    stall_window: int | None = None
    stall_rtol: float = 0.1
    stall_floor: float = 0.1

    def __post_init__(self):
        if self.mu is not None and not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.tau is not None and not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.weights is not None and any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if self.stall_window is not None and self.stall_window < 1:
            raise ValueError("stall_window must be at least 1")


@dataclass(frozen=True)
class AlmConfig:
    """Inexact ALM schedule: penalty starts at ``mu0`` (default ``1/||P_Omega(M0)||_2``) and grows by ``rho``."""

    mu0: float | None = None
    rho: float = 1.05
    max_iters: int = 2000
    tol: float = 1e-8
    initial_rank: int = 5

    def __post_init__(self):
        if not self.rho > 1:
            raise ValueError(f"penalty growth must exceed 1, got {self.rho}")
        if self.mu0 is not None and not self.mu0 > 0:
            raise ValueError("mu0 must be positive")


@dataclass
class RecoveryResult:
    estimate: DenseTensor
    iterations: int
    converged: bool
    stop_reason: str
    rel_error: float | None = None
    residuals: list[float] = field(default_factory=list, repr=False)
    rel_errors: list[float] = field(default_factory=list, repr=False)

    def write_trace(self, path: str | Path):
        """CSV with columns ``iteration, residual, rel_error`` (empty when no reference)."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iteration", "residual", "rel_error"])
            for k, res in enumerate(self.residuals, start=1):
                err = self.rel_errors[k - 1] if k <= len(self.rel_errors) else ""
                w.writerow([k, repr(res), repr(err) if err != "" else ""])


def relative_error(estimate: DenseTensor | np.ndarray, reference: DenseTensor | np.ndarray) -> float:
    a = estimate.data if isinstance(estimate, DenseTensor) else np.ravel(estimate)
    b = reference.data if isinstance(reference, DenseTensor) else np.ravel(reference)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


# -- measurement preconditioning ---------------------------------------------


class _OrthonormalRows(LinearMeasurement):
    """Dense operator with orthonormal rows; same null space as the operator it replaces."""

    def __init__(self, dims, matrix):
        self.dims = tuple(dims)
        self.matrix = matrix

    @property
    def m(self):
        return self.matrix.shape[0]

    def apply_flat(self, x):
        return self.matrix @ x

    def adjoint_flat(self, z):
        return self.matrix.T @ z

    def op_norm(self):
        return 1.0


def orthonormalize_measurements(op: LinearMeasurement, z: np.ndarray, rtol: float = 1e-12):
    """Rewrite ``A x = z`` as ``Q^T x = z'`` with orthonormal rows.

    The feasible set, and therefore every minimizer, is unchanged; only the
    conditioning of the dual improves. Sampling operators already have
    orthonormal rows and pass through untouched.
    """
    if isinstance(op, (SamplingOperator, _OrthonormalRows)):
        return op, z
    G = op.as_matrix()
    U, s, Vt = np.linalg.svd(G, full_matrices=False)
    keep = s > rtol * (s[0] if s.size else 0.0)
    z2 = (U[:, keep].T @ z) / s[keep]
    return _OrthonormalRows(op.dims, Vt[keep]), z2


def default_tau(mu: float, blocks: int, op_norm: float = 1.0) -> float:
    """``1/(5 mu)`` unless the dual gradient's Lipschitz bound ``mu * lam`` makes that unstable.

    ``lam`` is the largest eigenvalue of the constraint map's Gram operator;
    momentum iterations stay stable while ``tau * mu * lam < 4/3``, and we
    keep a 10% margin.
    """
    s2 = op_norm**2
    T = blocks + 1 + s2
    lam = max(blocks + 1.0, (T + math.sqrt(max(T * T - 4 * s2, 0.0))) / 2)
    return min(0.2, 1.2 / lam) / mu


# -- accelerated linearized Bregman ------------------------------------------


def unfolding_blocks(dims: Sequence[int]) -> list[Matricization]:
    """Flat column-major data <-> mode-i unfolding, for i = 1..K."""
    dims = tuple(dims)
    blocks = []
    for i in range(len(dims)):
        n_i = dims[i]
        moved = (dims[i],) + dims[:i] + dims[i + 1:]

        def to_mat(x, i=i, n_i=n_i):
            return np.moveaxis(x.reshape(dims, order="F"), i, 0).reshape(n_i, -1, order="F")

        def from_mat(M, i=i, moved=moved):
            return np.moveaxis(M.reshape(moved, order="F"), 0, i).ravel(order="F")

        blocks.append((to_mat, from_mat))
    return blocks


def square_block(dims: Sequence[int], j: int) -> Matricization:
    rows = int(np.prod(dims[:j]))
    return (lambda x: x.reshape(rows, -1, order="F"), lambda M: M.ravel(order="F"))


class LinearizedBregman:
    """Iterates of the accelerated linearized Bregman method on the smoothed problem.

    Exposes the per-iteration quantities (``X``, ``W``, ``Y_tilde``, ``Z_tilde``)
    so single steps can be inspected. ``Z`` lives in measurement space; for a
    sampling operator ``A^*(Z)`` is the zero-filled tensor ``P_Omega[Z]``.
    """

    def __init__(
        self,
        op: LinearMeasurement,
        z: np.ndarray,
        blocks: Sequence[Matricization],
        mu: float,
        tau: float,
        weights: Sequence[float] | None = None,
    ):
        self.op = op
        self.z = np.asarray(z, dtype=np.float64).ravel()
        if self.z.size != op.m:
            raise ValueError(f"observation vector has {self.z.size} entries, operator produces {op.m}")
        self.blocks = list(blocks)
        self.weights = np.ones(len(self.blocks)) if weights is None else np.asarray(weights, dtype=np.float64)
        if self.weights.size != len(self.blocks):
            raise ValueError(f"need {len(self.blocks)} weights, got {self.weights.size}")
        self.mu, self.tau = float(mu), float(tau)
        N, K = op.size, len(self.blocks)
        # rows of the stacked (K, N) arrays are the per-block duals and primals
        self.Y = np.zeros((K, N))
        self.Z = np.zeros(op.m)
        self.Y_tilde = np.zeros((K, N))
        self.Z_tilde = np.zeros(op.m)
        self.Y_tilde_prev = np.zeros((K, N))
        self.Z_tilde_prev = np.zeros(op.m)
        self.W = np.zeros(N)
        self._gaps = np.zeros((K, N))
        self.t = 1.0
        self.k = 0
        self.residual = math.inf

    @property
    def X(self) -> np.ndarray:
        """Primal block iterates ``X_i^{k}`` stacked row-wise."""
        return self._gaps + self.W

    def step(self):
        mu, tau = self.mu, self.tau
        gaps = self._gaps
        for i, ((to_mat, from_mat), lam) in enumerate(zip(self.blocks, self.weights)):
            gaps[i] = from_mat(svt_shrink(to_mat(self.Y[i]), lam, scale=mu))
        self.W = mu * (self.op.adjoint_flat(self.Z) - self.Y.sum(axis=0))
        gaps -= self.W
        misfit = self.op.apply_flat(self.W) - self.z
        # dual gradient norm: the constraint violations of the current primal pair
        self.residual = math.sqrt(float(np.vdot(gaps, gaps)) + float(misfit @ misfit))

        # Y_tilde^k overwrites Y_tilde^{k-2}; its old buffer then receives Y^{k+1}
        Y_tilde, Y_tilde_prev, Y_next = self.Y_tilde_prev, self.Y_tilde, self.Y
        np.multiply(gaps, -tau, out=Y_tilde)
        Y_tilde += self.Y
        self.Z_tilde, self.Z_tilde_prev = self.Z - tau * misfit, self.Z_tilde
        if self.k == 0:
            Y_tilde_prev[...] = Y_tilde
            self.Z_tilde_prev = self.Z_tilde
        t_next = (1 + math.sqrt(1 + 4 * self.t**2)) / 2
        beta = (self.t - 1) / t_next
        np.subtract(Y_tilde, Y_tilde_prev, out=Y_next)
        Y_next *= beta
        Y_next += Y_tilde
        self.Y = Y_next
        self.Z = self.Z_tilde + beta * (self.Z_tilde - self.Z_tilde_prev)
        self.Y_tilde, self.Y_tilde_prev = Y_tilde, Y_tilde_prev
        self.t = t_next
        self.k += 1
        return self


def alb_recover(
    op: LinearMeasurement,
    z: np.ndarray,
    dims: Sequence[int],
    blocks: Sequence[Matricization],
    cfg: AlbConfig = AlbConfig(),
    reference: DenseTensor | None = None,
) -> RecoveryResult:
    """Run ALB to a stopping rule; returns the consensus variable ``W``.

    Stops when the dual gradient norm relative to ``||z||`` falls below
    ``cfg.primal_tol``, when ``rel_error <= cfg.rel_tol`` (only with a
    reference), when ``rel_error`` stalls (only with a reference and
    ``cfg.stall_window``), or after ``cfg.max_iters`` iterations.
    """
    dims = tuple(dims)
    if int(np.prod(dims)) != op.size:
        raise ValueError(f"dims {dims} do not match operator input size {op.size}")
    z = np.asarray(z, dtype=np.float64).ravel()
    if z.size != op.m:
        raise ValueError(f"observation vector has {z.size} entries, operator produces {op.m}")
    K = len(blocks)
    weights = cfg.weights
    if weights is not None:
        if len(weights) != K:
            raise ValueError(f"need {K} weights, got {len(weights)}")
        # a zero-weight norm is absent from the objective, smoothing term included
        blocks = [b for b, w in zip(blocks, weights) if w > 0]
        weights = [w for w in weights if w > 0]
        if not blocks:
            raise ValueError("at least one weight must be positive")
        K = len(blocks)
    z_norm = float(np.linalg.norm(z))
    if z_norm == 0.0:
        return RecoveryResult(DenseTensor.zeros(dims), 0, True, "zero observations",
                              rel_error=None if reference is None else relative_error(np.zeros(op.size), reference))

    if cfg.mu is not None:
        mu = cfg.mu
    elif reference is not None:
        mu = cfg.mu_scale * float(np.linalg.norm(reference.data))
    else:
        mu = cfg.mu_scale * float(np.linalg.norm(op.adjoint_flat(z)))
    if cfg.precondition:
        op_run, z_run = orthonormalize_measurements(op, z)
    else:
        op_run, z_run = op, z
    tau = cfg.tau if cfg.tau is not None else default_tau(mu, K, op_run.op_norm())
    scale = float(np.linalg.norm(z_run))

    solver = LinearizedBregman(op_run, z_run, blocks, mu, tau, weights)
    ref = None if reference is None else reference.data
    ref_norm = None if ref is None else float(np.linalg.norm(ref))
    residuals, rel_errors = [], []
    reason, converged = "max_iters", False
    for _ in range(cfg.max_iters):
        solver.step()
        res = solver.residual / scale
        if not math.isfinite(res):
            reason = "diverged"
            break
        residuals.append(res)
        if ref is not None:
            rel_errors.append(float(np.linalg.norm(solver.W - ref)) / ref_norm)
        if res <= cfg.primal_tol:
            reason, converged = "residual", True
            break
        if ref is not None and cfg.rel_tol is not None and rel_errors[-1] <= cfg.rel_tol:
            reason, converged = "rel_error", True
            break
        if ref is not None and cfg.stall_window and _stalled(rel_errors, cfg):
            reason = "stalled"
            break
    W = solver.W if np.all(np.isfinite(solver.W)) else np.zeros(op.size)
    est = DenseTensor(dims, W)
    return RecoveryResult(
        est,
        solver.k,
        converged,
        reason,
        rel_error=None if ref is None else relative_error(est, reference),
        residuals=residuals,
        rel_errors=rel_errors,
    )


def _stalled(rel_errors: list[float], cfg: AlbConfig) -> bool:
    w = cfg.stall_window
    k = len(rel_errors)
    if k % w or k < 2 * w:
        return False
    recent = min(rel_errors[-w:])
    return recent > cfg.stall_floor and recent >= (1 - cfg.stall_rtol) * min(rel_errors[:-w])


def alb_snn(op, z, dims, cfg: AlbConfig = AlbConfig(), reference: DenseTensor | None = None) -> RecoveryResult:
    """Sum-of-nuclear-norms recovery, one block per mode unfolding."""
    return alb_recover(op, z, dims, unfolding_blocks(dims), cfg, reference)


def snn_recover(
    op, z, dims, weights: Sequence[float] | None = None, cfg: AlbConfig = AlbConfig(),
    reference: DenseTensor | None = None,
) -> RecoveryResult:
    """Minimize ``sum_i lambda_i ||X_(i)||_*`` subject to ``op(X) = z`` (all weights 1 by default)."""
    if weights is not None:
        cfg = replace(cfg, weights=tuple(float(w) for w in weights))
    return alb_snn(op, z, dims, cfg, reference)


# -- inexact ALM matrix completion -------------------------------------------


@dataclass
class AlmResult:
    matrix: np.ndarray
    iterations: int
    converged: bool
    residuals: list[float] = field(default_factory=list, repr=False)


def alm_nuclear_completion(M_obs: np.ndarray, mask: np.ndarray, cfg: AlmConfig = AlmConfig()) -> AlmResult:
    """``min ||M||_*  s.t.  M = M_obs on mask`` by inexact ALM.

    Each iteration takes one singular value thresholding step on
    ``D - E + Y/mu`` (``D`` the zero-filled observations, ``E`` supported off
    the mask), then updates ``Y += mu (D - M - E)`` and grows ``mu``.
    """
    mask = np.asarray(mask, dtype=bool)
    M_obs = np.asarray(M_obs, dtype=np.float64)
    if mask.shape != M_obs.shape:
        raise ValueError(f"mask shape {mask.shape} does not match matrix shape {M_obs.shape}")
    if not mask.any():
        raise ValueError("mask must observe at least one entry")
    D = np.where(mask, M_obs, 0.0)
    d_norm = float(np.linalg.norm(D))
    if d_norm == 0.0:
        return AlmResult(np.zeros_like(D), 1, True, [0.0])
    mu = cfg.mu0 if cfg.mu0 is not None else 1.0 / float(np.linalg.norm(D, 2))
    Y = np.zeros_like(D)
    E = np.zeros_like(D)
    A = np.zeros_like(D)
    small = min(D.shape)
    sv = min(small, cfg.initial_rank)
    residuals = []
    for k in range(1, cfg.max_iters + 1):
        T = D - E + Y / mu
        while True:
            A, above = svt_shrink_partial(T, 1.0 / mu, sv)
            if above < sv or sv >= small:
                break
            sv = min(small, 2 * sv)
        # rank prediction: one above the current count
        sv = min(small, max(cfg.initial_rank, above + 1))
        E = np.where(mask, 0.0, D - A + Y / mu)
        R = D - A - E
        Y += mu * R
        mu *= cfg.rho
        res = float(np.linalg.norm(R)) / d_norm
        residuals.append(res)
        if res <= cfg.tol:
            return AlmResult(A, k, True, residuals)
    return AlmResult(A, cfg.max_iters, False, residuals)


def square_recover(
    op: LinearMeasurement,
    z: np.ndarray,
    dims: Sequence[int],
    j: int | None = None,
    alm: AlmConfig = AlmConfig(),
    alb: AlbConfig = AlbConfig(),
    reference: DenseTensor | None = None,
) -> RecoveryResult:
    """Minimize the nuclear norm of the ``j``-th square reshaping (default ``floor(K/2)``).

    Entry sampling runs matrix completion on the reshaped mask; any other
    operator runs ALB with the single square-reshaping block.
    """
    dims = tuple(dims)
    if len(dims) < 2:
        raise ValueError("square reshaping needs a tensor of order at least 2")
    j = square_split(len(dims)) if j is None else j
    if not 1 <= j <= len(dims) - 1:
        raise ValueError(f"split index must lie in [1, {len(dims) - 1}], got {j}")
    if not isinstance(op, SamplingOperator):
        return alb_recover(op, z, dims, [square_block(dims, j)], alb, reference)

    z = np.asarray(z, dtype=np.float64).ravel()
    if z.size != op.m:
        raise ValueError(f"observation vector has {z.size} entries, operator produces {op.m}")
    rows = int(np.prod(dims[:j]))
    if op.m == 0:
        est = DenseTensor.zeros(dims)
        return RecoveryResult(est, 0, True, "zero observations",
                              rel_error=None if reference is None else relative_error(est, reference))
    M_obs = op.adjoint_flat(z).reshape(rows, -1, order="F")
    mask = op.mask().reshape(rows, -1, order="F")
    out = alm_nuclear_completion(M_obs, mask, alm)
    est = DenseTensor(dims, out.matrix.ravel(order="F"))
    return RecoveryResult(
        est,
        out.iterations,
        out.converged,
        "residual" if out.converged else "max_iters",
        rel_error=None if reference is None else relative_error(est, reference),
        residuals=out.residuals,
    )
