import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate
from scipy.linalg import expm

from mapfluct.analytics import (AnalyticsError, ExpPolyTerm, char_matrix_exponent, drift_dichotomy, invariant_measure,
                                ladder_height_mean, ladder_laplace_exponent, lyapunov_drift_report, overshoot_marginal,
                                q_lambda, resolvent, spectral_bound_check, stationary_distribution, subgeometric_rate)
from mapfluct.analytics import TestFunction as PhaseFunction
from mapfluct.laws import Exponential, FiniteMixture, Pareto
from mapfluct.model import CompoundPoisson, LadderSpec, LevyComponentSpec, MapSpec
from mapfluct.simulator import estimate_potential_measure, run_ladder, simulate_endpoints

from conftest import random_ladder, random_map_spec, two_phase_ladder

SYM_Q = [[-1.0, 1.0], [1.0, -1.0]]


def _empirical_transform(value, phase, n, weight):
    """``E[weight(value); J = j]`` per phase with standard errors."""
    means, ses = np.zeros(n, dtype=complex), np.zeros(n, dtype=complex)
    for j in range(n):
        w = np.where(phase == j, weight(value), 0.0)
        means[j] = w.mean()
        ses[j] = complex(w.real.std(ddof=1), np.imag(w).std(ddof=1)) / math.sqrt(len(w))
    return means, ses


# -- matrix exponents ----------------------------------------------------------


def test_char_exponent_at_zero_is_q():
    spec = random_map_spec(np.random.default_rng(0), 3)
    np.testing.assert_allclose(char_matrix_exponent(spec, 0.0).value, spec.Q, atol=1e-14)


@pytest.mark.parametrize("theta", [0.7, -1.3])
def test_char_exponent_semigroup_matches_simulation(creeping, theta):
    psi = char_matrix_exponent(creeping, theta).value
    ends = [simulate_endpoints(creeping, 1.0, 100_000, np.random.default_rng(10 + i), start_phase=i) for i in (0, 1)]
    exact = expm(psi)
    for i, e in enumerate(ends):
        mean, se = _empirical_transform(e.value, e.phase, 2, lambda v: np.exp(1j * theta * v))
        assert np.all(np.abs(mean.real - exact[i].real) <= 3 * se.real)
        assert np.all(np.abs(mean.imag - exact[i].imag) <= 3 * se.imag)


def test_ladder_exponent_at_zero_is_minus_q(ladder):
    np.testing.assert_allclose(ladder_laplace_exponent(ladder, 0.0).value, -ladder.Q, atol=1e-14)


def test_pure_drift_ladder_exponent_by_hand():
    lad = LadderSpec((1.0, 2.0), (None, None), SYM_Q)
    np.testing.assert_allclose(ladder_laplace_exponent(lad, 1.0).value, [[2.0, -1.0], [-1.0, 3.0]], atol=1e-14)


def test_ladder_exponent_semigroup_matches_simulation(ladder):
    lam = 0.8
    phi = ladder_laplace_exponent(ladder, lam).value
    as_map = MapSpec(tuple(LevyComponentSpec(d, 0.0, j) for d, j in zip(ladder.drifts, ladder.jumps)), ladder.Q,
                     ladder.F)
    exact = expm(-phi)
    for i in (0, 1):
        e = simulate_endpoints(as_map, 1.0, 100_000, np.random.default_rng(20 + i), start_phase=i)
        mean, se = _empirical_transform(e.value, e.phase, 2, lambda v: np.exp(-lam * v).astype(complex))
        assert np.all(np.abs(mean.real - exact[i]) <= 3 * se.real)


@given(st.integers(0, 2**32 - 1))
def test_spectral_bound_on_random_specs(seed):
    spec = random_map_spec(np.random.default_rng(seed))
    rep = spectral_bound_check(spec, np.arange(-50.0, 50.0 + 1e-9, 0.5), (0.1, 1.0, 10.0))
    assert rep.max_real_part <= 1e-9
    assert rep.min_abs_det > 0


# -- drift regimes ---------------------------------------------------------------


def test_drift_only_negative_regime():
    res = drift_dichotomy(MapSpec((LevyComponentSpec(1.0), LevyComponentSpec(-2.0)), SYM_Q))
    assert res.verdict == "NegativeDrift" and abs(res.drift + 0.5) < 1e-14


def test_symmetric_spec_oscillates():
    law = FiniteMixture((0.5, 0.5), (Exponential(1.0), Exponential(1.0).negated()))
    spec = MapSpec((LevyComponentSpec(1.0, 0.0, CompoundPoisson(1.0, law)),
                    LevyComponentSpec(-1.0, 0.0, CompoundPoisson(1.0, law))), SYM_Q)
    assert drift_dichotomy(spec).verdict == "Oscillating"


def test_infinite_mean_is_undetermined():
    spec = MapSpec((LevyComponentSpec(1.0, 0.0, CompoundPoisson(1.0, Pareto(0.8))),), [[0.0]])
    assert drift_dichotomy(spec).verdict == "undetermined-by-mean"


def test_transient_drift_matches_long_run_average(creeping):
    res = drift_dichotomy(creeping)
    assert res.verdict == "Transient"
    e = simulate_endpoints(creeping, 10_000.0, 20, np.random.default_rng(30))
    assert abs(e.value.mean() / 10_000.0 / res.drift - 1) < 0.10


# -- Q_lambda and the resolvent ---------------------------------------------------


def test_q_lambda_examples():
    one = PhaseFunction.constant(1.0, 1)
    assert abs(q_lambda(one, 1.0, 0, 1.0) - (1 - math.exp(-1))) < 1e-14
    assert q_lambda(PhaseFunction.exponential(2.0, 1), 0.0, 0, 1.0) == 0.0
    assert abs(q_lambda(PhaseFunction.exponential(1.0, 1), 2.0, 0, 1.0) - 2 * math.exp(-2)) < 1e-14


@given(st.floats(0.0, 5.0), st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_q_lambda_matches_quadrature(x, lam, rate):
    f = PhaseFunction(((ExpPolyTerm(1.0, 2, rate),),))
    ref = integrate.quad(lambda t: math.exp(-lam * t) * f(x - t, 0), 0.0, x, epsabs=1e-13)[0]
    assert abs(q_lambda(f, x, 0, lam) - ref) < 1e-9


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 5.0), st.floats(0.2, 3.0))
def test_resolvent_of_constant_is_one_over_lambda(seed, x, lam):
    lad = random_ladder(np.random.default_rng(seed))
    one = PhaseFunction.constant(1.0, lad.n)
    for i in range(lad.n):
        assert abs(resolvent(lad, one, x, i, lam) - 1 / lam) < 1e-10


def test_resolvent_of_zero_is_zero(ladder):
    assert resolvent(ladder, PhaseFunction.constant(0.0, 2), 0.7, 1, 1.0) == 0.0


@pytest.mark.parametrize("i", [0, 1])
def test_resolvent_matches_sawtooth_simulation(ladder, i):
    f = PhaseFunction.exponential(1.0, 2)
    run = run_ladder(ladder, 200_000, np.random.default_rng(40 + i), start_phase=i, res_lambda=1.0,
                     res_kappa=[1.0], res_coef=[[1.0], [1.0]])
    se = run.resolvent.std(ddof=1) / math.sqrt(len(run.resolvent))
    assert abs(run.resolvent.mean() - resolvent(ladder, f, 0.0, i, 1.0)) <= 3 * se


def test_singular_ladder_exponent_rejected():
    lad = LadderSpec((1.0, 1.0), (None, None), [[0.0, 0.0], [0.0, 0.0]])
    with pytest.raises((AnalyticsError, ValueError)):
        resolvent(lad, PhaseFunction.constant(1.0, 2), 0.0, 0, 0.0)


# -- invariant and stationary laws ---------------------------------------------------


def test_pure_drift_invariant_measure():
    chi = invariant_measure(LadderSpec((1.0, 2.0), (None, None), SYM_Q))
    np.testing.assert_allclose(chi.atoms, [0.5, 1.0])
    assert np.all(chi.density == 0) and abs(chi.total - 1.5) < 1e-14
    rho = stationary_distribution(LadderSpec((1.0, 2.0), (None, None), SYM_Q))
    np.testing.assert_allclose(rho.atoms, [1 / 3, 2 / 3])


def test_one_phase_invariant_and_stationary_law():
    lad = LadderSpec((1.0,), (CompoundPoisson(1.0, Exponential(2.0)),), [[0.0]])
    assert abs(invariant_measure(lad).total - 1.5) < 1e-14
    rho = stationary_distribution(lad)
    assert abs(rho.atoms[0] - 2 / 3) < 1e-14
    for y in (0.0, 0.5, 2.0):
        assert abs(rho.density_fn(y, 0) - math.exp(-2 * y) / 1.5) < 1e-14


def test_heavy_tailed_ladder_has_no_stationary_law():
    lad = LadderSpec((1.0,), (CompoundPoisson(1.0, Pareto(0.5)),), [[0.0]])
    with pytest.raises(AnalyticsError, match="no stationary distribution"):
        stationary_distribution(lad)


@given(st.integers(0, 2**32 - 1))
def test_invariant_mass_matches_mean_height(seed):
    lad = random_ladder(np.random.default_rng(seed))
    chi = invariant_measure(lad)
    quad = chi.atoms.sum() + sum(chi.continuous_mass(i) for i in range(lad.n))
    assert abs(quad - ladder_height_mean(lad)) < 1e-8


# -- overshoot marginal ----------------------------------------------------------------


def test_marginal_above_level_is_point_mass(ladder):
    m = overshoot_marginal(ladder, None, 3.0, 1, 1.0, np.linspace(0, 5, 11))
    assert m.masses[1, 4] == 1.0 and m.total == 1.0
    m0 = overshoot_marginal(ladder, None, 1.0, 0, 1.0, np.linspace(0, 5, 11))
    assert m0.atoms[0] == 1.0


def test_marginal_approaches_stationary_law():
    lad = LadderSpec((0.0,), (CompoundPoisson(1.0, Exponential(2.0)),), [[0.0]])
    edges = np.linspace(0.0, 8.0, 81)
    pot = estimate_potential_measure(lad, np.linspace(0.0, 21.0, 2101), 20_000, np.random.default_rng(50))
    m = overshoot_marginal(lad, pot, 0.0, 0, 20.0, edges)
    rho = stationary_distribution(lad)
    ref = np.concatenate(([rho.atoms[0]], rho.bin_masses(edges)[0]))
    assert 0.5 * np.abs(ref - m.probability_vector()).sum() < 0.03


def test_marginal_matches_simulated_overshoots(ladder):
    edges = np.linspace(0.0, 6.0, 61)
    pot = estimate_potential_measure(ladder, np.linspace(0.0, 6.0, 601), 20_000, np.random.default_rng(51))
    m = overshoot_marginal(ladder, pot, 0.0, 0, 5.0, edges)
    run = run_ladder(ladder, 100_000, np.random.default_rng(52), levels=[5.0])
    emp = []
    for j in range(2):
        sel = run.phase[:, 0] == j
        o = run.overshoot[sel, 0]
        emp.append(np.concatenate(([np.sum(o == 0)], np.histogram(o[o > 0], edges)[0])) / len(run.phase))
    assert 0.5 * np.abs(np.concatenate(emp) - m.probability_vector()).sum() < 0.03


# -- Lyapunov drift and rates ----------------------------------------------------------


def test_pure_drift_lyapunov_constant():
    lad = LadderSpec((1.0, 2.0), (None, None), SYM_Q)
    lam = 0.7
    rep = lyapunov_drift_report(lad, lam)
    inv = np.linalg.inv(ladder_laplace_exponent(lad, lam).value)
    assert rep.holds
    assert abs(rep.b - lam * np.abs(inv).sum(axis=1).max() * 3.0) < 1e-12


def test_lyapunov_grid_check(ladder):
    rep = lyapunov_drift_report(ladder, 0.5, grid=np.linspace(0.0, 20.0, 401))
    assert rep.holds and rep.max_excess <= 1e-8


def test_lyapunov_moment_failure_names_law():
    lad = LadderSpec((1.0,), (CompoundPoisson(1.0, Pareto(3.0)),), [[0.0]])
    with pytest.raises(AnalyticsError, match="jumps of phase 0"):
        lyapunov_drift_report(lad, 0.5)
    assert lyapunov_drift_report(lad, 2.0, "hybrid").holds


def test_subgeometric_rate():
    assert subgeometric_rate(2.0, 0.0) == 2.0
    assert subgeometric_rate(2.0, 4.0) == 1.0
    t = np.linspace(1.0, 100.0, 200)
    for lam in (1.5, 2.0, 3.0):
        assert np.all(subgeometric_rate(lam, t) <= 2 * (2 * lam) ** (lam - 1) * t ** (1 - lam) + 1e-12)
    with pytest.raises(ValueError):
        subgeometric_rate(1.0, 1.0)


def test_two_phase_ladder_fixture_is_valid():
    from mapfluct.model import validate
    assert validate(two_phase_ladder()).ok
