import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mapfluct.analytics import stationary_distribution
from mapfluct.ergodicity import (CurvePoint, EmpiricalMeasure, beta_mixing_stationary, default_edges, fit_rate,
                                 law_probabilities, sample_stationary, stable_hitting_mixing_bound, tv_decay_curve,
                                 tv_distance)

EDGES = np.linspace(0.0, 10.0, 101)


def _measure(values, phases, n=2, edges=EDGES):
    return EmpiricalMeasure.from_samples(values, phases, n, edges)


def _random_measure(rng, n_samples=200):
    values = np.where(rng.random(n_samples) < 0.3, 0.0, rng.exponential(2.0, n_samples))
    return _measure(np.minimum(values, 9.99), rng.integers(0, 2, n_samples))


# -- distances --------------------------------------------------------------------


def test_identical_measures_are_at_distance_zero():
    m = _random_measure(np.random.default_rng(0))
    assert tv_distance(m, m) == 0.0


def test_disjoint_supports_are_at_distance_one():
    a = _measure([0.5, 1.5, 2.5], [0, 0, 1])
    b = _measure([5.5, 6.5, 0.0], [1, 1, 0])
    assert tv_distance(a, b) == 1.0


def test_atom_is_separated_from_a_density():
    rng = np.random.default_rng(1)
    point = _measure(np.zeros(1000), np.zeros(1000, dtype=int), 1)
    expo = _measure(np.minimum(rng.exponential(1.0, 1000), 9.99), np.zeros(1000, dtype=int), 1)
    assert tv_distance(point, expo) == 1.0


def test_phase_mismatch_is_rejected():
    with pytest.raises(ValueError, match="incompatible phases"):
        tv_distance(_measure([1.0], [0], 1), _measure([1.0], [0], 2))


def test_nested_grids_are_coarsened():
    rng = np.random.default_rng(2)
    v, p = np.minimum(rng.exponential(2.0, 500), 9.99), rng.integers(0, 2, 500)
    w, q = np.minimum(rng.exponential(1.0, 500), 9.99), rng.integers(0, 2, 500)
    coarse = EDGES[::10]
    fine_vs_coarse = tv_distance(_measure(v, p), _measure(w, q, edges=coarse))
    assert fine_vs_coarse == pytest.approx(tv_distance(_measure(v, p, edges=coarse), _measure(w, q, edges=coarse)),
                                           abs=1e-12)


def test_grids_without_common_coarsening_are_rejected():
    with pytest.raises(ValueError, match="common coarsening"):
        tv_distance(_measure([1.0], [0], 1), _measure([1.0], [0], 1, edges=[0.0, 1.0, 20.0]))


def test_killed_samples_are_not_a_law():
    with pytest.raises(ValueError, match="live phase"):
        _measure([1.0, 2.0], [0, -1])


@given(st.integers(0, 2**32 - 1))
def test_distance_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (_random_measure(rng) for _ in range(3))
    ab, bc, ac = tv_distance(a, b), tv_distance(b, c), tv_distance(a, c)
    assert 0.0 <= ab <= 1.0 + 1e-12
    assert ab == pytest.approx(tv_distance(b, a), abs=1e-15)
    assert ac <= ab + bc + 1e-12


def test_analytic_law_is_discretized_on_the_empirical_grid(ladder):
    rho = stationary_distribution(ladder)
    edges = default_edges(rho, 50)
    probs = law_probabilities(rho, edges)
    assert probs.sum() == pytest.approx(1.0, abs=1e-8)
    values, phases = sample_stationary(rho, 200_000, np.random.default_rng(3))
    assert tv_distance(_measure(values, phases, 2, edges), rho) < 0.01


def test_stationary_sampler_hits_the_atoms(ladder):
    rho = stationary_distribution(ladder)
    values, phases = sample_stationary(rho, 200_000, np.random.default_rng(4))
    for i in range(2):
        freq = np.mean((values == 0) & (phases == i))
        assert abs(freq - rho.atoms[i]) <= 3 * math.sqrt(rho.atoms[i] * (1 - rho.atoms[i]) / 200_000)


# -- decay curves -----------------------------------------------------------------------


def test_point_start_is_at_distance_one_from_stationarity(ladder):
    # binning merges the start with the stationary mass of its own bin, which vanishes as the grid refines
    rho = stationary_distribution(ladder)
    gaps = []
    for n_bins in (50, 200, 800):
        edges = default_edges(rho, n_bins)
        curve = tv_decay_curve(ladder, (1.3, 0), [0.0], 2000, np.random.default_rng(5), edges=edges, n_boot=20)
        k = np.searchsorted(edges, 1.3, side="right") - 1
        assert curve[0].value == pytest.approx(1.0 - law_probabilities(rho, edges)[0, 1 + k], abs=1e-12)
        gaps.append(1.0 - curve[0].value)
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] < 0.002


def test_tv_curve_decreases_up_to_noise(ladder):
    curve = tv_decay_curve(ladder, (0.0, 1), [1.0, 2.0, 5.0, 10.0, 20.0], 20_000, np.random.default_rng(6))
    for a, b in zip(curve[:-1], curve[1:]):
        assert b.value <= a.value + 3 * math.hypot(a.se, b.se)
    assert curve[-1].value < curve[0].value - 3 * math.hypot(curve[0].se, curve[-1].se)


def test_exact_exponential_curve_is_recovered():
    curve = [CurvePoint(t, math.exp(-t / 2), 0.0) for t in (1.0, 2.0, 4.0, 8.0, 16.0)]
    fit = fit_rate(curve)
    assert fit.rate == pytest.approx(0.5, abs=1e-12) and fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_exact_power_curve_is_recovered():
    curve = [CurvePoint(t, 3.0 * t ** -2.0, 0.0) for t in (1.0, 2.0, 4.0, 8.0, 16.0)]
    fit = fit_rate(curve, "polynomial")
    assert fit.rate == pytest.approx(-2.0, abs=1e-12) and fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_fit_needs_points_above_noise():
    curve = [CurvePoint(t, 0.01, 0.01) for t in range(1, 10)]
    with pytest.raises(ValueError, match="too few points"):
        fit_rate(curve)


# -- beta mixing --------------------------------------------------------------------------


def test_beta_mixing_starts_near_one(ladder):
    # point masses against the density part are fully separated; atom starts keep 1 - atom mass
    rho = stationary_distribution(ladder)
    atoms = np.asarray(rho.atoms)
    expected = float(np.sum(atoms * (1 - atoms)) + (1 - atoms.sum()))
    curve = beta_mixing_stationary(ladder, [0.0], 200, 200, np.random.default_rng(7))
    assert curve[0].value > 0.9
    assert abs(curve[0].value - expected) <= 3 * curve[0].se + 0.01


def test_beta_mixing_decreases_up_to_noise(ladder):
    beta = beta_mixing_stationary(ladder, [2.0, 10.0], 60, 4000, np.random.default_rng(8))
    assert beta[1].value <= beta[0].value + 3 * math.hypot(beta[0].se, beta[1].se)


# -- stable hitting bound ------------------------------------------------------------------


def test_hitting_bound_at_zero_gap_is_the_constant():
    assert stable_hitting_mixing_bound(0.5, 0.5, 2.7, 3.0, 0.0) == 2.7


def test_hitting_bound_plug_in():
    assert stable_hitting_mixing_bound(0.5, 1.0, 1.0, 1.0, 3.0) == pytest.approx(4 ** (-1 / 3), rel=1e-14)


@given(st.floats(0.01, 0.99), st.floats(0.01, 1.0), st.floats(1.0, 100.0), st.floats(0.0, 100.0), st.floats(0.0, 10.0))
def test_hitting_bound_monotonicity(alpha, delta, t, s, ds):
    f = stable_hitting_mixing_bound
    assert f(alpha, delta, 1.0, t, s + ds) <= f(alpha, delta, 1.0, t, s) + 1e-15
    assert f(alpha, delta, 1.0, t + ds, s) >= f(alpha, delta, 1.0, t, s) - 1e-15


@pytest.mark.parametrize("args", [(1.0, 0.5, 1.0, 1.0, 1.0), (0.5, 0.0, 1.0, 1.0, 1.0), (0.5, 1.5, 1.0, 1.0, 1.0),
                                  (0.5, 0.5, 1.0, 0.5, 1.0), (0.5, 0.5, 1.0, 1.0, -1.0)])
def test_hitting_bound_rejects_out_of_range_parameters(args):
    with pytest.raises(ValueError):
        stable_hitting_mixing_bound(*args)
