"""Random low-rank test tensors."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .linalg import make_rng, random_orthonormal
from .tensor import CPFactors, DenseTensor, TuckerFactors, cp_compose, tucker_compose


def random_tucker(dims: Sequence[int], ranks: Sequence[int], seed, unit_core: bool = False) -> TuckerFactors:
    """Gaussian core with orthonormal factors drawn as orth(randn(n_i, r_i))."""
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    core = rng.standard_normal(tuple(ranks))
    if unit_core:
        core /= np.linalg.norm(core)
    factors = tuple(random_orthonormal(n, r, rng) for n, r in zip(dims, ranks))
    return TuckerFactors(DenseTensor.from_array(core), factors)


def random_cp(dims: Sequence[int], rank: int, seed) -> CPFactors:
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    weights = rng.standard_normal(rank)
    vectors = tuple(rng.standard_normal((n, rank)) for n in dims)
    return CPFactors(weights, vectors)


def supersymmetric_core(r: int, K: int) -> DenseTensor:
    """``C[i_1..i_K] = 1`` when all indices agree, else 0."""
    core = np.zeros((r,) * K)
    for i in range(r):
        core[(i,) * K] = 1.0
    return DenseTensor.from_array(core)


def supersymmetric_tucker(n: int, r: int, K: int, seed) -> TuckerFactors:
    """Tucker tensor with supersymmetric core and orthonormal factors; its SNN kappa is r n^(K-1)."""
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    factors = tuple(random_orthonormal(n, r, rng) for _ in range(K))
    return TuckerFactors(supersymmetric_core(r, K), factors)


def fig2_tucker(n: int, seed) -> TuckerFactors:
    """4-way n^4 tensor with Gaussian 1x1x2x2 core, U1, U2 in R^{n x 1}, U3, U4 in R^{n x 2}."""
    return random_tucker((n, n, n, n), (1, 1, 2, 2), seed)


def generate_fig2_instance(n: int, seed) -> DenseTensor:
    return tucker_compose(fig2_tucker(n, seed))


def generate_cp_instance(dims: Sequence[int], rank: int, seed) -> DenseTensor:
    return cp_compose(random_cp(dims, rank, seed))
