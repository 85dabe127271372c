"""Random ground-truth and initial kernels.

``basic``: ``L = M M^T`` with ``M`` square and entries uniform on
``[0, sqrt(2)]``, redrawn until ``L`` passes Cholesky.
``wishart``: ``L = G G^T / N`` with ``G`` square standard normal, i.e. a
Wishart(N, I) draw rescaled to have identity mean.
"""

from dataclasses import dataclass

import numpy as np

from . import matcore
from ._rng import STREAM_INIT, generator, substream
from .errors import GenerationFailed, NotPositiveDefinite

DISTRIBUTIONS = ("basic", "wishart")
MAX_REDRAWS = 1000


@dataclass(frozen=True)
class KernelDistribution:
    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in DISTRIBUTIONS:
            raise ValueError(f"unknown distribution {self.kind!r}; expected one of {DISTRIBUTIONS}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


def _draw_until_pd(draw, rng):
    for _ in range(MAX_REDRAWS):
        L = matcore.symmetrize(draw(rng))
        try:
            matcore.cholesky(L)
        except NotPositiveDefinite:
            continue
        return L
    raise GenerationFailed(f"no positive definite draw in {MAX_REDRAWS} attempts")


def _as_generator(rng):
    return rng if isinstance(rng, np.random.Generator) else generator(rng)


def generate_basic(n_dim, rng):
    """BASIC kernel of size ``n_dim``; ``rng`` is a seed or a Generator."""
    if n_dim < 1:
        raise ValueError("n_dim must be >= 1")

    def draw(g):
        m = g.uniform(0.0, np.sqrt(2.0), size=(n_dim, n_dim))
        return m @ m.T

    return _draw_until_pd(draw, _as_generator(rng))


def generate_wishart(n_dim, rng):
    """WISHART kernel of size ``n_dim`` with ``E[L] = I``."""
    if n_dim < 1:
        raise ValueError("n_dim must be >= 1")

    def draw(g):
        G = g.standard_normal(size=(n_dim, n_dim))
        return (G @ G.T) / n_dim

    return _draw_until_pd(draw, _as_generator(rng))


def generate(dist, rng):
    if dist.kind == "basic":
        return generate_basic(dist.dim, rng)
    return generate_wishart(dist.dim, rng)


def generate_init(dist, seed):
    """Initial kernel drawn from ``dist`` on the initialization sub-stream of ``seed``."""
    return generate(dist, generator(substream(seed, STREAM_INIT)))
