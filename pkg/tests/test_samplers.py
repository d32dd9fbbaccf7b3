import math

import numpy as np
import pytest

from mapfluct.laws import Exponential, stable_levy_constants
from mapfluct.model import CompoundPoisson, LevyComponentSpec, StableJumps
from mapfluct.rng import RngStream
from mapfluct.samplers import (coupled_truncation_increments, sample_brownian_drift_bridge_free, sample_cpp_events,
                               sample_levy_increment, sample_stable_increment, sample_truncated_levy_segment,
                               stable_parameters, truncate_jumps)


def test_cpp_zero_horizon_is_empty():
    ev = sample_cpp_events(2.0, Exponential(1.0), 0.0, np.random.default_rng(0))
    assert len(ev) == 0


def test_cpp_count_and_size_means():
    rng = np.random.default_rng(1)
    counts, sizes = [], []
    for _ in range(10_000):
        ev = sample_cpp_events(2.0, Exponential(2.0), 10.0, rng)
        counts.append(len(ev))
        sizes.extend(ev.sizes)
        assert np.all(np.diff(ev.times) > 0) and (len(ev) == 0 or (ev.times[0] > 0 and ev.times[-1] <= 10.0))
    counts, sizes = np.array(counts), np.array(sizes)
    assert abs(counts.mean() - 20.0) <= 3 * counts.std(ddof=1) / math.sqrt(len(counts))
    assert abs(sizes.mean() - 0.5) <= 3 * sizes.std(ddof=1) / math.sqrt(len(sizes))


def test_cpp_events_reproducible_from_stream():
    a = sample_cpp_events(3.0, Exponential(1.0), 5.0, RngStream(7).child(2).generator())
    b = sample_cpp_events(3.0, Exponential(1.0), 5.0, RngStream(7).child(2).generator())
    assert np.array_equal(a.times, b.times) and np.array_equal(a.sizes, b.sizes)


def test_brownian_increment():
    rng = np.random.default_rng(2)
    assert sample_brownian_drift_bridge_free(1.0, 1.0, 0.0, rng) == 0.0
    assert sample_brownian_drift_bridge_free(1.0, 0.0, 3.0, rng) == 3.0
    x = np.array([sample_brownian_drift_bridge_free(0.0, 1.0, 1.0, rng) for _ in range(100_000)])
    assert abs(x.var(ddof=1) - 1.0) < 0.02


@pytest.mark.parametrize("alpha, rho", [(0.5, 0.5), (0.7, 0.6)])
def test_stable_positivity(alpha, rho):
    x = sample_stable_increment(alpha, rho, 1.0, np.random.default_rng(3), 100_000)
    assert abs((x >= 0).mean() - rho) < 0.005


@pytest.mark.parametrize("alpha, rho", [(0.7, 0.6), (1.5, 0.5)])
def test_stable_tail_constant(alpha, rho):
    x = sample_stable_increment(alpha, rho, 1.0, np.random.default_rng(4), 10_000_000)
    c_plus = stable_levy_constants(alpha, rho)[0]
    for level in (10.0, 20.0, 50.0, 100.0):
        ratio = (x > level).mean() * level ** alpha / (c_plus / alpha)
        assert abs(ratio - 1) < 0.10


def test_stable_self_similarity():
    a = sample_stable_increment(0.7, 0.6, 1.0, np.random.default_rng(5), 10)
    b = sample_stable_increment(0.7, 0.6, 8.0, np.random.default_rng(5), 10)
    np.testing.assert_allclose(b, 8.0 ** (1 / 0.7) * a, rtol=1e-12)


def test_asymmetric_cauchy_is_unsupported():
    with pytest.raises(ValueError, match="unsupported"):
        stable_parameters(1.0, 0.7)


def test_truncation_cutoff_must_be_below_one():
    comp = LevyComponentSpec(0.0, 0.0, StableJumps(0.7, 1.0, 1.0))
    with pytest.raises(ValueError):
        truncate_jumps(comp, 1.0)


def test_drift_only_truncated_increment_is_exact():
    comp = LevyComponentSpec(1.5)
    assert sample_truncated_levy_segment(comp, 0.1, 2.0, np.random.default_rng(0)) == 3.0


def test_truncation_below_jump_support_matches_exact_sampler():
    comp = LevyComponentSpec(0.3, 0.0, CompoundPoisson(2.0, Exponential(1.0).negated()))
    # exponential jumps never land in [-eps, eps] with positive probability only below eps; pick eps tiny
    for seed in range(20):
        exact = sample_levy_increment(comp, 1.0, np.random.default_rng(seed))
        trunc = sample_truncated_levy_segment(comp, 1e-300, 1.0, np.random.default_rng(seed))
        assert exact == trunc


@pytest.mark.parametrize("alpha", [0.5, 0.7, 1.5])
def test_coupled_truncation_differences_shrink(alpha):
    comp = LevyComponentSpec(0.0, 0.0, StableJumps(alpha, 1.0, 0.6))
    eps = [0.4, 0.2, 0.1]
    inc = coupled_truncation_increments(comp, eps, 1.0, 200_000, np.random.default_rng(6))
    d1 = (inc[1] - inc[0]).std()
    d2 = (inc[2] - inc[1]).std()
    assert d1 / d2 >= 0.95 * 2 ** ((2 - alpha) / 2)
    # the removed-jump variance predicts the spread of each difference
    var = lambda e: (1.0 + 0.6) * e ** (2 - alpha) / (2 - alpha)  # noqa: E731
    assert abs(d1 ** 2 / (var(0.4) - var(0.2)) - 1) < 0.05
