"""DPP probability model over an L-ensemble kernel.

A kernel ``L`` is a symmetric positive-definite ``(N, N)`` array. Subsets of
the ground set are 0-based index arrays; an empty subset is allowed and has
``det(L_Y) = 1``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import lapack

from . import matcore
from .errors import DimensionMismatch, InvalidCount, NotPositiveDefinite, SingularSubmatrix


@dataclass(frozen=True, eq=False)
class ObservationData:
    """``n`` observed subsets of the ground set ``{0, ..., ground_size - 1}``.

    ``lines`` optionally maps each observation to the line of the file it
    was read from, so errors can point back at the input.
    """

    ground_size: int
    subsets: tuple
    lines: tuple = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.ground_size < 1:
            raise ValueError("ground_size must be >= 1")
        subsets = tuple(matcore.index_set(y, self.ground_size) for y in self.subsets)
        if not subsets:
            raise InvalidCount("ObservationData needs at least one subset")
        object.__setattr__(self, "subsets", subsets)
        if self.lines is not None and len(self.lines) != len(subsets):
            raise ValueError("lines must align with subsets")

    def __eq__(self, other):
        if not isinstance(other, ObservationData):
            return NotImplemented
        return self.ground_size == other.ground_size and self.as_lists() == other.as_lists()

    __hash__ = None

    @classmethod
    def from_lists(cls, ground_size, subsets, lines=None):
        return cls(ground_size, tuple(subsets), None if lines is None else tuple(lines))

    @property
    def n(self):
        return len(self.subsets)

    def kappa(self):
        """Largest observed subset size."""
        return max(y.size for y in self.subsets)

    def as_lists(self):
        return [y.tolist() for y in self.subsets]

    def without_empty(self):
        keep = [i for i, y in enumerate(self.subsets) if y.size]
        lines = None if self.lines is None else tuple(self.lines[i] for i in keep)
        return ObservationData(self.ground_size, tuple(self.subsets[i] for i in keep), lines)

    @cached_property
    def _distinct(self):
        # Distinct subsets in order of first appearance, with multiplicities,
        # so each one is factored once per evaluation. The fixed order makes
        # every reduction bit-reproducible.
        first = {}
        counts = []
        for i, y in enumerate(self.subsets):
            if not y.size:
                continue
            key = y.tobytes()
            if key in first:
                counts[first[key]][1] += 1
            else:
                first[key] = len(counts)
                counts.append([i, 1])
        N = self.ground_size
        out = []
        for i, count in counts:
            y = self.subsets[i]
            rows, cols = np.tril_indices(y.size)
            out.append(_Distinct(i, float(count), y, rows + cols * y.size, y[rows] * N + y[cols]))
        return out


@dataclass(frozen=True)
class _Distinct:
    obs: int  # first observation holding this subset
    count: float
    items: np.ndarray
    src: np.ndarray  # lower-triangle positions inside the column-major block
    dst: np.ndarray  # matching positions inside the flattened N x N matrix


def _check_kernel(L, data=None):
    L = matcore.symmetrize(L)
    if data is not None and L.shape[0] != data.ground_size:
        raise DimensionMismatch(
            f"kernel has dimension {L.shape[0]} but data ground set has {data.ground_size}"
        )
    return L


def _factor_block(L, part):
    block = L.take(part.items, 0).take(part.items, 1)
    d = np.diagonal(block)
    tol = d.size * matcore.EPS * d.max()
    # block is symmetric, so its transpose is a Fortran-ordered view LAPACK
    # can factor in place
    c, info = lapack.dpotrf(block.T, lower=1, clean=0, overwrite_a=1)
    if info == 0:
        d = np.diagonal(c)
        if np.all(d * d > tol):
            return c, d
    try:
        matcore.cholesky(L.take(part.items, 0).take(part.items, 1))
    except NotPositiveDefinite as exc:
        raise SingularSubmatrix(part.obs, exc) from exc
    raise SingularSubmatrix(part.obs)


@dataclass
class Evaluation:
    """Quantities shared by the likelihood, gradient and Picard update."""

    loglik: float
    n: int
    z: np.ndarray  # sum_i U_i L_{Y_i}^{-1} U_i^T (not divided by n)
    ipl_inv: np.ndarray  # (I + L)^{-1}

    @property
    def normalized_loglik(self):
        return self.loglik / self.n

    @property
    def delta(self):
        return matcore.symmetrize(self.z / self.n - self.ipl_inv)


def evaluate(L, data, need_inverses=True):
    """Factor every observed block once and return the shared quantities.

    Raises
    ------
    SingularSubmatrix
        Naming the first observation whose block fails Cholesky.
    NotPositiveDefinite
        If ``I + L`` itself is not PD (``L`` far outside the cone).
    """
    L = _check_kernel(L, data)
    N = L.shape[0]
    subset_logdet = 0.0
    z = np.zeros(N * N) if need_inverses else None
    for part in data._distinct:
        c, d = _factor_block(L, part)
        subset_logdet += part.count * 2.0 * float(np.sum(np.log(d)))
        if need_inverses:
            inv, info = lapack.dpotri(c, lower=1, overwrite_c=1)
            if info != 0:
                raise SingularSubmatrix(part.obs)
            z[part.dst] += part.count * inv.ravel(order="F")[part.src]
    f = matcore.cholesky(np.eye(N) + L)
    loglik = subset_logdet - data.n * matcore.logdet(f)
    if not need_inverses:
        return Evaluation(loglik, data.n, None, None)
    z = z.reshape(N, N)
    z = z + np.tril(z, -1).T
    return Evaluation(loglik, data.n, z, matcore.inverse(f))


def subset_prob(L, y):
    """``P(Y) = det(L_Y) / det(I + L)``.

    A block that is numerically singular but not indefinite (its failing
    pivot lies within the pivot tolerance) has probability 0.
    """
    L = _check_kernel(L)
    block = matcore.compress(L, y)
    try:
        ld = matcore.logdet(matcore.cholesky(block))
    except NotPositiveDefinite as exc:
        if exc.value is not None and exc.value >= -matcore.pivot_tolerance(block):
            return 0.0
        raise
    norm = matcore.logdet(matcore.cholesky(np.eye(L.shape[0]) + L))
    return float(np.exp(ld - norm))


def log_likelihood(L, data):
    """``sum_i log det(L_{Y_i}) - n log det(I + L)``."""
    return evaluate(L, data, need_inverses=False).loglik


def normalized_log_likelihood(L, data):
    """Per-observation log-likelihood, ``log_likelihood / n``."""
    return log_likelihood(L, data) / data.n


def gradient(L, data):
    """Gradient of :func:`log_likelihood` with respect to symmetric ``L``.

    ``sum_i U_i L_{Y_i}^{-1} U_i^T - n (I + L)^{-1}``.
    """
    ev = evaluate(L, data)
    return matcore.symmetrize(ev.z - ev.n * ev.ipl_inv)


def marginal_kernel(L):
    """``K = L (I + L)^{-1}``, formed as ``I - (I + L)^{-1}`` to stay symmetric."""
    L = _check_kernel(L)
    N = L.shape[0]
    return matcore.symmetrize(np.eye(N) - matcore.inverse(matcore.cholesky(np.eye(N) + L)))


def marginal_prob(K, a):
    """Inclusion probability ``P(A subset of Y) = det(K_A)``."""
    block = matcore.compress(matcore.symmetrize(K), a)
    if block.shape[0] == 0:
        return 1.0
    return float(np.linalg.det(block))


def convexity_witness(x, y, u):
    """Midpoint test for ``g(S) = log det(U^T S^{-1} U)``.

    Returns ``(g((x + y) / 2), (g(x) + g(y)) / 2)``; convexity of ``g`` on
    PD matrices means the first never exceeds the second.
    """
    u = np.asarray(u, dtype=np.float64)

    def g(s):
        s_inv = matcore.inverse(matcore.cholesky(matcore.symmetrize(s)))
        return matcore.logdet(matcore.cholesky(matcore.symmetrize(u.T @ s_inv @ u)))

    x = matcore.symmetrize(x)
    y = matcore.symmetrize(y)
    return g(0.5 * (x + y)), 0.5 * (g(x) + g(y))
