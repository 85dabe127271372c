"""Dense symmetric positive-definite matrix primitives.

Matrices are plain ``float64`` numpy arrays. Every routine that hands back a
symmetric matrix symmetrizes it first, so rounding asymmetry cannot build up
over many iterations. Positive-definiteness is always decided by Cholesky;
eigenvalues are only computed by :func:`extreme_eigs`.

Index sets are 0-based, sorted, duplicate-free integer arrays.
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.linalg import lapack
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import DimensionMismatch, IndexOutOfRange, NoConvergence, NotPositiveDefinite

EPS = np.finfo(np.float64).eps

#: Above this size :func:`extreme_eigs` switches to Lanczos iteration.
DENSE_EIG_MAX_DIM = 256


def symmetrize(m):
    """Return ``(m + m.T) / 2`` as a new float64 array."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    return 0.5 * (m + m.T)


def pivot_tolerance(m):
    """Smallest admissible Cholesky pivot: ``dim * eps * max(diag)``."""
    n = m.shape[-1]
    if n == 0:
        return 0.0
    return n * EPS * max(float(np.max(np.diag(m))), 0.0)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor with ``lower @ lower.T`` equal to the input."""

    lower: np.ndarray

    @property
    def dim(self):
        return self.lower.shape[0]


def _failing_pivot(m, k):
    # Schur-complement pivot at 0-based position k, given that m[:k, :k] is PD.
    if k == 0:
        return float(m[0, 0])
    c = linalg.cholesky(m[:k, :k], lower=True)
    w = linalg.solve_triangular(c, m[:k, k], lower=True)
    return float(m[k, k] - w @ w)


def cholesky(m):
    """Factor a symmetric matrix, raising if it is not numerically PD.

    Parameters
    ----------
    m : array_like, shape (N, N)
        Symmetric matrix. Only the lower triangle is read.

    Returns
    -------
    CholeskyFactor

    Raises
    ------
    NotPositiveDefinite
        If some pivot is ``<= N * eps * max(diag(m))``. The exception carries
        the 1-based index of the first failing pivot.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    n = m.shape[0]
    if n == 0:
        return CholeskyFactor(np.zeros((0, 0)))
    if not np.all(np.isfinite(m)):
        raise NotPositiveDefinite(1, float("nan"))
    c, info = lapack.dpotrf(m, lower=1, clean=1, overwrite_a=0)
    if info > 0:
        raise NotPositiveDefinite(info, _failing_pivot(m, info - 1))
    if info < 0:
        raise ValueError(f"dpotrf: illegal argument {-info}")
    pivots = np.diag(c) ** 2
    bad = np.flatnonzero(pivots <= pivot_tolerance(m))
    if bad.size:
        raise NotPositiveDefinite(bad[0] + 1, float(pivots[bad[0]]))
    return CholeskyFactor(c)


def is_positive_definite(m):
    try:
        cholesky(m)
    except NotPositiveDefinite:
        return False
    return True


def logdet(f):
    """Log-determinant from a Cholesky factor; 0 for the empty matrix."""
    if f.dim == 0:
        return 0.0
    return 2.0 * float(np.sum(np.log(np.diag(f.lower))))


def inverse(f):
    """Inverse of the factored matrix, symmetrized."""
    if f.dim == 0:
        return np.zeros((0, 0))
    inv, info = lapack.dpotri(f.lower, lower=1)
    if info != 0:
        raise NotPositiveDefinite(max(info, 1))
    inv = np.tril(inv)
    inv = inv + np.tril(inv, -1).T
    return inv


def index_set(items, n):
    """Validate ``items`` as an index set for an ``n``-dimensional matrix.

    Returns a sorted ``intp`` array. Duplicates are rejected.
    """
    y = np.asarray(items, dtype=np.intp).reshape(-1)
    if y.size and (y.min() < 0 or y.max() >= n):
        raise IndexOutOfRange(f"index set {y.tolist()} out of range for dimension {n}")
    y = np.sort(y)
    if y.size > 1 and np.any(np.diff(y) == 0):
        raise ValueError(f"index set has duplicates: {y.tolist()}")
    return y


def compress(m, y):
    """Principal submatrix ``m[y][:, y]``; an empty ``y`` gives a 0x0 matrix."""
    m = np.asarray(m, dtype=np.float64)
    y = index_set(y, m.shape[0])
    return m[np.ix_(y, y)]


def scatter_add(z, y, small):
    """Return a copy of ``z`` with ``small`` added into the ``(y, y)`` block."""
    z = np.array(z, dtype=np.float64)
    y = index_set(y, z.shape[0])
    small = np.asarray(small, dtype=np.float64)
    if small.shape != (y.size, y.size):
        raise DimensionMismatch(
            f"block of shape {small.shape} does not fit index set of size {y.size}"
        )
    if y.size:
        z[np.ix_(y, y)] += small
    return z


def extreme_eigs(m):
    """Smallest and largest eigenvalue of a symmetric matrix.

    Uses a dense symmetric eigensolver up to ``DENSE_EIG_MAX_DIM`` and
    Lanczos (capped at ``10 * N`` iterations) beyond that.
    """
    m = symmetrize(m)
    n = m.shape[0]
    if n == 0:
        raise DimensionMismatch("extreme_eigs of an empty matrix")
    if n <= DENSE_EIG_MAX_DIM:
        w = linalg.eigvalsh(m)
        return float(w[0]), float(w[-1])
    try:
        lo = eigsh(m, k=1, which="SA", maxiter=10 * n, tol=1e-12, return_eigenvectors=False)
        hi = eigsh(m, k=1, which="LA", maxiter=10 * n, tol=1e-12, return_eigenvectors=False)
    except ArpackNoConvergence as exc:
        raise NoConvergence(f"Lanczos did not converge within {10 * n} iterations") from exc
    return float(lo[0]), float(hi[0])
