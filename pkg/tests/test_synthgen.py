import numpy as np
import pytest

from dpplearn import matcore, synthgen
from dpplearn._rng import STREAM_TRUTH, generator, substream
from dpplearn.synthgen import KernelDistribution


def test_basic_scalar_range():
    for seed in range(50):
        L = synthgen.generate_basic(1, seed)
        assert L.shape == (1, 1)
        assert 0 < L[0, 0] <= 2.0


def test_basic_mean_diagonal():
    g = generator(123)
    diag = np.mean([np.diag(synthgen.generate_basic(10, g)).mean() for _ in range(1000)])
    assert diag == pytest.approx(10 * 2 / 3, rel=0.05)


def test_basic_factor_entries_in_range():
    # same stream the generator consumes: entries of M are U[0, sqrt 2]
    m = generator(7).uniform(0.0, np.sqrt(2.0), size=(30, 30))
    assert m.min() >= 0 and m.max() <= np.sqrt(2.0)
    np.testing.assert_array_equal(synthgen.generate_basic(30, 7), matcore.symmetrize(m @ m.T))


def test_wishart_mean_is_identity():
    g = generator(5)
    mean = np.mean([synthgen.generate_wishart(10, g) for _ in range(2000)], axis=0)
    assert np.abs(mean - np.eye(10)).max() < 0.05


def test_wishart_scalar_is_chi_squared():
    g = np.random.Generator(np.random.PCG64(np.random.SeedSequence(9)))
    expected = g.standard_normal((1, 1))[0, 0] ** 2
    assert synthgen.generate_wishart(1, 9)[0, 0] == pytest.approx(expected, rel=1e-15)


def test_wishart_trace_concentrates():
    g = generator(11)
    traces = [np.trace(synthgen.generate_wishart(50, g)) / 50 for _ in range(100)]
    assert np.mean(traces) == pytest.approx(1.0, rel=0.1)


@pytest.mark.parametrize("kind", synthgen.DISTRIBUTIONS)
def test_generated_kernels_are_pd_and_deterministic(kind):
    for seed in range(5):
        L = synthgen.generate(KernelDistribution(kind, 50), seed)
        assert L.shape == (50, 50)
        matcore.cholesky(L)
        np.testing.assert_array_equal(L, synthgen.generate(KernelDistribution(kind, 50), seed))


@pytest.mark.parametrize("kind", synthgen.DISTRIBUTIONS)
def test_init_stream_is_separate_from_truth(kind):
    dist = KernelDistribution(kind, 8)
    init = synthgen.generate_init(dist, 42)
    truth = synthgen.generate(dist, generator(substream(42, STREAM_TRUTH)))
    matcore.cholesky(init)
    assert not np.array_equal(init, truth)
    np.testing.assert_array_equal(init, synthgen.generate_init(dist, 42))


def test_invalid_distribution():
    with pytest.raises(ValueError):
        KernelDistribution("gaussian", 3)
    with pytest.raises(ValueError):
        KernelDistribution("basic", 0)
