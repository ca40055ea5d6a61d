"""Matrix kernels: thin SVD, spectral-function norms, singular value shrinkage, seeded sampling."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

# Matrices this unbalanced go through the Gram eigendecomposition in svt_shrink.
GRAM_ASPECT_RATIO = 8


class SvdConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class SvdResult:
    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.singular_values) @ self.V.T


def thin_svd(A: np.ndarray) -> SvdResult:
    """Thin SVD ``A = U diag(s) V^T`` with ``k = min(m, n)`` and ``s`` nonincreasing.

    Backed by LAPACK's divide-and-conquer ``gesdd``, falling back to ``gesvd``
    when it fails to converge.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a matrix, got array with shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    try:
        U, s, Vt = np.linalg.svd(A, full_matrices=False)
    except np.linalg.LinAlgError:
        import scipy.linalg

        try:
            U, s, Vt = scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesvd")
        except np.linalg.LinAlgError as exc:
            raise SvdConvergenceError(
                f"SVD did not converge for {A.shape} matrix with norm {np.linalg.norm(A):.3e}"
            ) from exc
    return SvdResult(U, s, Vt.T)


def singular_values(A: np.ndarray) -> np.ndarray:
    return np.linalg.svd(np.asarray(A, dtype=np.float64), compute_uv=False)


def nuclear_norm(A: np.ndarray) -> float:
    return float(np.sum(singular_values(A)))


def spectral_norm(A: np.ndarray) -> float:
    s = singular_values(A)
    return float(s[0]) if s.size else 0.0


def numerical_rank(A: np.ndarray, rtol: float = 1e-9) -> int:
    """Count singular values above ``rtol * sigma_max``."""
    s = singular_values(A)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rtol * s[0]))


def svt_shrink(A: np.ndarray, tau: float, scale: float = 1.0) -> np.ndarray:
    """Proximal operator of ``tau * ||.||_*``: soft-threshold the singular values by ``tau``.

    The result is multiplied by ``scale``, which is free since it only touches
    the small singular-value vector.
    """
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    A = np.asarray(A, dtype=np.float64)
    m, n = A.shape
    if min(m, n) * GRAM_ASPECT_RATIO <= max(m, n):
        return _svt_shrink_gram(A, tau, scale)
    svd = thin_svd(A)
    s = np.maximum(svd.singular_values - tau, 0.0)
    keep = s > 0
    return (svd.U[:, keep] * (scale * s[keep])) @ svd.V[:, keep].T


def _svt_shrink_gram(A: np.ndarray, tau: float, scale: float) -> np.ndarray:
    # Eigendecomposition of the small Gram matrix; shrink(A) = U diag((s - tau)_+ / s) U^T A.
    wide = A.shape[0] <= A.shape[1]
    B = A if wide else A.T
    w, U = np.linalg.eigh(B @ B.T)
    s = np.sqrt(np.maximum(w, 0.0))
    keep = s > tau
    if not np.any(keep):
        return np.zeros_like(A)
    Uk = U[:, keep]
    out = (Uk * (scale * (s[keep] - tau) / s[keep])) @ (Uk.T @ B)
    return out if wide else out.T


def svt_shrink_partial(A: np.ndarray, tau: float, k: int) -> tuple[np.ndarray, int]:
    """Singular value shrinkage from the leading ``k`` triplets only.

    Returns the shrunk matrix and the number of singular values above ``tau``.
    When all ``k`` computed values exceed ``tau`` the answer may be truncated;
    callers should then retry with a larger ``k``. Falls back to a full SVD
    once ``k`` is a sizable fraction of the smaller dimension.
    """
    A = np.asarray(A, dtype=np.float64)
    if k >= min(A.shape) // 4:
        svd = thin_svd(A)
        U, s, Vt = svd.U, svd.singular_values, svd.V.T
    else:
        from scipy.sparse.linalg import svds

        U, s, Vt = svds(A, k=k, solver="propack", random_state=0)
    keep = s > tau
    out = (U[:, keep] * (s[keep] - tau)) @ Vt[keep]
    return out, int(np.count_nonzero(keep))


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; normals come from numpy's ziggurat transform of its uniform stream."""
    return np.random.Generator(np.random.PCG64(seed))


def random_gaussian(shape: int | Sequence[int], seed) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed)
    return rng.standard_normal(shape)


def random_orthonormal(n: int, r: int, seed) -> np.ndarray:
    """``n x r`` matrix with orthonormal columns, the Q factor of an i.i.d. Gaussian matrix.

    Column signs are fixed so that ``R`` has a positive diagonal, which makes the
    result Haar-distributed on the Stiefel manifold.
    """
    if r > n:
        raise ValueError(f"cannot fit {r} orthonormal columns in dimension {n}")
    G = random_gaussian((n, r), seed)
    Q, R = np.linalg.qr(G)
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return Q * signs
