import itertools

import numpy as np
import pytest

from dpplearn.model import ObservationData


def random_pd(rng, N, cond=50.0):
    """Random SPD matrix with eigenvalues spread over [1/cond, 1] * scale."""
    q, _ = np.linalg.qr(rng.standard_normal((N, N)))
    w = np.exp(rng.uniform(-np.log(cond), 0.0, size=N)) * rng.uniform(0.5, 5.0)
    return (q * w) @ q.T


def random_data(rng, N, n, p=None):
    """``n`` random subsets, each item present independently with prob ``p``."""
    p = rng.uniform(0.2, 0.7) if p is None else p
    subsets = [np.flatnonzero(rng.random(N) < p) for _ in range(n)]
    return ObservationData.from_lists(N, subsets)


def all_subsets(N):
    for k in range(N + 1):
        yield from itertools.combinations(range(N), k)


def brute_loglik(L, subsets):
    """Log-likelihood from dense slogdet, independent of the package code."""
    L = np.asarray(L, dtype=float)
    total = 0.0
    for y in subsets:
        y = list(y)
        if y:
            sign, ld = np.linalg.slogdet(L[np.ix_(y, y)])
            assert sign > 0
            total += ld
    return total - len(subsets) * np.linalg.slogdet(np.eye(len(L)) + L)[1]


@pytest.fixture
def rng():
    return np.random.default_rng(20260415)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod and mod.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.VERDICTS, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
