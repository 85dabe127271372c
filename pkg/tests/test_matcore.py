import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpplearn import matcore
from dpplearn.errors import DimensionMismatch, IndexOutOfRange, NotPositiveDefinite

from conftest import random_pd


def test_cholesky_identity():
    f = matcore.cholesky(np.eye(2))
    np.testing.assert_array_equal(f.lower, np.eye(2))


def test_cholesky_hand_example():
    f = matcore.cholesky([[4.0, 2.0], [2.0, 3.0]])
    np.testing.assert_allclose(f.lower, [[2.0, 0.0], [1.0, np.sqrt(2.0)]], rtol=1e-15)


def test_cholesky_indefinite_reports_pivot():
    with pytest.raises(NotPositiveDefinite) as info:
        matcore.cholesky([[1.0, 2.0], [2.0, 1.0]])
    assert info.value.pivot == 2
    assert info.value.value == pytest.approx(-3.0)


def test_cholesky_rejects_tiny_pivot():
    # rank-one matrix: second pivot is rounding noise
    v = np.array([1.0, 1.0 / 3.0])
    with pytest.raises(NotPositiveDefinite):
        matcore.cholesky(np.outer(v, v))


@pytest.mark.parametrize(
    "m, expected",
    [(np.eye(5), 0.0), ([[4.0, 2.0], [2.0, 3.0]], np.log(8.0)), (np.zeros((0, 0)), 0.0)],
)
def test_logdet(m, expected):
    assert matcore.logdet(matcore.cholesky(m)) == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize(
    "m, expected",
    [
        (np.eye(3), np.eye(3)),
        ([[2.0, 0.0], [0.0, 4.0]], [[0.5, 0.0], [0.0, 0.25]]),
        ([[4.0, 2.0], [2.0, 3.0]], np.array([[3.0, -2.0], [-2.0, 4.0]]) / 8.0),
    ],
)
def test_inverse(m, expected):
    inv = matcore.inverse(matcore.cholesky(m))
    np.testing.assert_allclose(inv, expected, rtol=1e-14, atol=1e-15)
    np.testing.assert_array_equal(inv, inv.T)


def test_compress():
    m = np.array([[2.0, 1.0], [1.0, 2.0]])
    np.testing.assert_array_equal(matcore.compress(m, [0, 1]), m)
    np.testing.assert_array_equal(matcore.compress(m, [0]), [[2.0]])
    assert matcore.compress(m, []).shape == (0, 0)
    with pytest.raises(IndexOutOfRange):
        matcore.compress(m, [2])


def test_scatter_add():
    np.testing.assert_array_equal(matcore.scatter_add(np.zeros((2, 2)), [1], [[3.0]]), [[0, 0], [0, 3]])
    np.testing.assert_array_equal(
        matcore.scatter_add(np.eye(2), [0, 1], np.ones((2, 2))), [[2, 1], [1, 2]]
    )
    z = np.arange(4.0).reshape(2, 2)
    np.testing.assert_array_equal(matcore.scatter_add(z, [], np.zeros((0, 0))), z)
    with pytest.raises(DimensionMismatch):
        matcore.scatter_add(z, [0], np.ones((2, 2)))


@pytest.mark.parametrize(
    "m, expected",
    [(np.eye(3), (1.0, 1.0)), ([[2.0, 1.0], [1.0, 2.0]], (1.0, 3.0)), (np.diag([0.1, 5.0, 2.0]), (0.1, 5.0))],
)
def test_extreme_eigs(m, expected):
    np.testing.assert_allclose(matcore.extreme_eigs(m), expected, rtol=1e-12)


def test_extreme_eigs_iterative_path(rng):
    N = matcore.DENSE_EIG_MAX_DIM + 44
    m = random_pd(rng, N)
    lo, hi = matcore.extreme_eigs(m)
    w = np.linalg.eigvalsh(m)
    assert abs(lo - w[0]) <= 1e-8 * w[-1]
    assert abs(hi - w[-1]) <= 1e-8 * w[-1]


def test_inverse_round_trip(rng):
    for _ in range(100):
        N = int(rng.integers(1, 65))
        m = random_pd(rng, N, cond=1e3)
        prod = matcore.inverse(matcore.cholesky(m)) @ m
        err = np.linalg.norm(prod - np.eye(N)) / np.sqrt(N)
        assert err <= 1e-10 * N


def test_cholesky_reconstructs(rng):
    for _ in range(50):
        N = int(rng.integers(1, 40))
        m = random_pd(rng, N, cond=1e4)
        c = matcore.cholesky(m).lower
        assert np.all(np.diag(c) > 0)
        assert np.linalg.norm(c @ c.T - m) <= 1e-12 * N * np.linalg.norm(m)


def test_cholesky_agrees_with_spectrum(rng):
    for _ in range(100):
        N = int(rng.integers(1, 20))
        a = rng.standard_normal((N, N))
        m = matcore.symmetrize(a + a.T + rng.uniform(-2.0, 6.0) * np.eye(N))
        lo, _ = matcore.extreme_eigs(m)
        assert matcore.is_positive_definite(m) == (lo > 0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 10), st.data())
def test_compress_then_scatter_embeds(N, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    m = random_pd(rng, N)
    y = sorted(data.draw(st.sets(st.integers(0, N - 1))))
    out = matcore.scatter_add(np.zeros((N, N)), y, matcore.compress(m, y))
    mask = np.zeros((N, N), dtype=bool)
    mask[np.ix_(y, y)] = True
    np.testing.assert_array_equal(out[mask], m[mask])
    assert np.all(out[~mask] == 0)


def test_logdet_matches_eigenvalues(rng):
    for _ in range(50):
        N = int(rng.integers(1, 17))
        m = random_pd(rng, N, cond=1e3)
        expected = np.sum(np.log(np.linalg.eigvalsh(m)))
        got = matcore.logdet(matcore.cholesky(m))
        assert abs(got - expected) <= 1e-8 * max(abs(expected), 1.0)
