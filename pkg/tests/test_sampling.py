import itertools
import math

import numpy as np
import pytest

from cncscsg.core.exceptions import DimensionError
from cncscsg.services.sampling import STREAMS, Rng, sample_geometric, sample_minibatch, sample_sphere


def test_minibatch_is_sorted_subset_without_replacement():
    rng = Rng(3)
    for _ in range(200):
        idx = rng.minibatch(40, 5)
        assert idx.size == 5
        assert np.all(np.diff(idx) > 0)
        assert idx.min() >= 0 and idx.max() < 40


def test_minibatch_full_size_returns_every_index():
    assert np.array_equal(Rng(0).minibatch(7, 7), np.arange(7))


@pytest.mark.parametrize("n, b", [(5, 0), (5, 6), (0, 1)])
def test_minibatch_rejects_bad_sizes(n, b):
    with pytest.raises(DimensionError):
        sample_minibatch(np.random.default_rng(0), n, b)


def test_minibatch_is_uniform_over_subsets():
    rng = Rng(11)
    counts = {}
    draws = 600_000
    for _ in range(draws):
        key = tuple(rng.minibatch(4, 2))
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == math.comb(4, 2)
    for count in counts.values():
        assert abs(count / draws - 1 / 6) < 0.005


def test_same_seed_same_draws():
    a, b = Rng(42), Rng(42)
    assert np.array_equal(a.minibatch(100, 10), b.minibatch(100, 10))
    assert a.geometric(0.8) == b.geometric(0.8)
    assert np.array_equal(a.normal(4), b.normal(4))


def test_substreams_are_isolated():
    plain, busy = Rng(5), Rng(5)
    for _ in range(50):
        busy.sphere(3, 1.0, stream="probe")
    assert np.array_equal(plain.minibatch(30, 4), busy.minibatch(30, 4))
    assert plain.geometric(0.9) == busy.geometric(0.9)


def test_unknown_stream_is_rejected():
    with pytest.raises(KeyError):
        Rng(0).stream("nope")
    assert len(set(STREAMS)) == len(STREAMS)


@pytest.mark.parametrize("gamma", [0.5, 0.8, 40 / 45])
def test_geometric_mean(gamma):
    draws = sample_geometric(np.random.Generator(np.random.PCG64(123)), gamma, size=1_000_000)
    assert draws.min() >= 0
    expected = gamma / (1.0 - gamma)
    assert abs(draws.mean() - expected) <= 0.01 * expected


def test_geometric_zero_mass():
    draws = sample_geometric(np.random.Generator(np.random.PCG64(7)), 0.8, size=1_000_000)
    assert abs(np.mean(draws == 0) - 0.2) <= 0.002


@pytest.mark.parametrize("gamma", [0.5, 0.8, 40 / 45])
def test_geometric_telescoping_identity(gamma):
    # E[D_N - D_{N+1}] = (1/gamma - 1)(D_0 - E[D_N]) for D_i = i^2, by truncated exact summation
    k = np.arange(20_000, dtype=np.float64)
    weights = (1.0 - gamma) * gamma ** k
    lhs = float(np.sum(weights * (k ** 2 - (k + 1) ** 2)))
    rhs = (1.0 / gamma - 1.0) * (0.0 - float(np.sum(weights * k ** 2)))
    assert abs(lhs - rhs) <= 1e-8


@pytest.mark.parametrize("gamma", [0.0, 1.0, -0.2, 1.5])
def test_geometric_rejects_gamma_outside_unit_interval(gamma):
    with pytest.raises(ValueError):
        sample_geometric(np.random.default_rng(0), gamma)


def test_sphere_has_exact_radius():
    gen = np.random.default_rng(1)
    for d in (1, 2, 5):
        point = sample_sphere(gen, d, 0.05)
        assert abs(np.linalg.norm(point) - 0.05) < 1e-15


def _subset_mean_square(population, m):
    values = [np.sum(population[list(s)].mean(axis=0) ** 2)
              for s in itertools.combinations(range(len(population)), m)]
    return float(np.mean(values))


def test_minibatch_variance_hand_instance():
    population = np.array([[2.0], [-1.0], [-1.0]])
    assert abs(_subset_mean_square(population, 2) - 0.5) < 1e-12
    assert abs((3 - 2) / ((3 - 1) * 2) * np.mean(np.sum(population ** 2, axis=1)) - 0.5) < 1e-12


def test_minibatch_variance_identity_by_enumeration():
    gen = np.random.default_rng(2024)
    for _ in range(100):
        M = int(gen.integers(2, 9))
        m = int(gen.integers(1, M + 1))
        population = gen.standard_normal((M, 3))
        population -= population.mean(axis=0)
        expected = (M - m) / ((M - 1) * m) * float(np.mean(np.sum(population ** 2, axis=1)))
        assert abs(_subset_mean_square(population, m) - expected) <= 1e-12


def test_sphere_in_one_dimension_is_a_fair_sign():
    gen = np.random.default_rng(3)
    draws = np.array([sample_sphere(gen, 1, 1.0)[0] for _ in range(100_000)])
    assert set(np.unique(draws)) == {-1.0, 1.0}
    assert abs(np.mean(draws == 1.0) - 0.5) <= 0.01


def test_sphere_is_centred():
    gen = np.random.default_rng(4)
    draws = np.array([sample_sphere(gen, 3, 2.0) for _ in range(100_000)])
    assert np.allclose(np.linalg.norm(draws, axis=1), 2.0)
    assert np.max(np.abs(draws.mean(axis=0))) <= 0.02
