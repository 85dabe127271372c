"""Drawing observed subsets from a known kernel.

Two samplers share one seeding scheme: draws are produced in blocks of
``BLOCK_SIZE`` and block ``b`` uses the sub-stream ``substream(seed, b)``, so
output depends only on ``(kernel, n, seed)`` and not on how blocks are
scheduled across workers.
"""

from concurrent.futures import ThreadPoolExecutor
from itertools import combinations

import numpy as np

from . import matcore
from ._rng import generator, substream
from .errors import EigenFailure, GroundSetTooLarge, InvalidCount
from .model import ObservationData

MAX_ENUMERATION_DIM = 20
BLOCK_SIZE = 1024
ORTHO_DROP_TOL = 1e-12


def enumerate_distribution(L):
    """All ``2**N`` subsets with their exact probabilities.

    Returns a list of ``(tuple_of_indices, probability)`` ordered by subset
    size, then lexicographically.
    """
    L = matcore.symmetrize(L)
    N = L.shape[0]
    if N > MAX_ENUMERATION_DIM:
        raise GroundSetTooLarge(f"N = {N} exceeds enumeration limit {MAX_ENUMERATION_DIM}")
    log_norm = matcore.logdet(matcore.cholesky(np.eye(N) + L))
    out = [((), float(np.exp(-log_norm)))]
    for k in range(1, N + 1):
        combos = np.array(list(combinations(range(N), k)), dtype=np.intp)
        dets = np.linalg.det(L[combos[:, :, None], combos[:, None, :]])
        probs = np.maximum(dets, 0.0) * np.exp(-log_norm)
        out.extend(zip(map(tuple, combos.tolist()), probs.tolist()))
    return out


def _check_count(n):
    if int(n) != n or n < 1:
        raise InvalidCount(f"sample count must be a positive integer, got {n!r}")
    return int(n)


def _run_blocks(draw_block, n, seed, n_jobs):
    sizes = [min(BLOCK_SIZE, n - start) for start in range(0, n, BLOCK_SIZE)]
    jobs = [(generator(substream(seed, b)), m) for b, m in enumerate(sizes)]
    if n_jobs > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            blocks = list(pool.map(lambda job: draw_block(*job), jobs))
    else:
        blocks = [draw_block(*job) for job in jobs]
    return [y for block in blocks for y in block]


def sample_exact(L, n, seed, n_jobs=1):
    """Inverse-CDF sampling over the enumerated distribution (small ``N``)."""
    n = _check_count(n)
    dist = enumerate_distribution(L)
    subsets = [s for s, _ in dist]
    cdf = np.cumsum([p for _, p in dist])

    def draw_block(rng, m):
        u = rng.random(m) * cdf[-1]
        idx = np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)
        return [subsets[i] for i in idx]

    return ObservationData(len(L), tuple(_run_blocks(draw_block, n, seed, n_jobs)))


def _spectral_draw(rng, vecs, incl):
    chosen = rng.random(incl.size) < incl
    v = vecs[:, chosen]
    k = v.shape[1]
    if k == 0:
        return ()
    weights = np.einsum("ij,ij->i", v, v)
    basis = np.empty((k, k))
    picked = []
    t = 0
    while t < k:
        w = np.maximum(weights, 0.0)
        total = w.sum()
        if total <= 0.0:
            break
        i = int(np.searchsorted(np.cumsum(w), rng.random() * total, side="right"))
        i = min(i, w.size - 1)
        r = v[i].copy()
        # two passes of block Gram-Schmidt against the rows picked so far
        for _ in range(2):
            r -= basis[:t].T @ (basis[:t] @ r)
        norm = np.sqrt(r @ r)
        weights[i] = 0.0
        if norm < ORTHO_DROP_TOL:
            continue
        r /= norm
        basis[t] = r
        weights -= (v @ r) ** 2
        weights[i] = 0.0
        picked.append(i)
        t += 1
    return tuple(sorted(picked))


def sample_spectral(L, n, seed, n_jobs=1):
    """Exact DPP sampling through the eigendecomposition of ``L``.

    Each eigenvector is kept independently with probability
    ``lambda / (1 + lambda)``; items are then drawn one at a time with
    probability proportional to the squared row norms of the kept
    eigenvectors, projected away from rows already chosen.
    """
    n = _check_count(n)
    L = matcore.symmetrize(L)
    try:
        lam, vecs = np.linalg.eigh(L)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    lam = np.maximum(lam, 0.0)
    incl = lam / (1.0 + lam)

    def draw_block(rng, m):
        return [_spectral_draw(rng, vecs, incl) for _ in range(m)]

    return ObservationData(L.shape[0], tuple(_run_blocks(draw_block, n, seed, n_jobs)))
