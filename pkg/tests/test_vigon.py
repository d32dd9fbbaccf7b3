import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mapfluct.laws import Exponential, FiniteMixture, Pareto, PointMass, UniformInterval
from mapfluct.model import CompoundPoisson, LadderSpec, LevyComponentSpec, MapSpec, dualize
from mapfluct.simulator import PotentialEstimate, estimate_ladder_spec
from mapfluct.vigon import (VigonRow, absolute_continuity_transfer, classical_vigon_rhs, fit_phase_scales,
                            moment_transfer_check, vigon_rhs, vigon_rhs_dual, wiener_hopf_mc_check,
                            wiener_hopf_residual)

from conftest import creeping_map, oscillating_map

THETAS = np.linspace(0.1, 5.0, 20)


def _synthetic_potential(n, edges, rng):
    mean = rng.uniform(0.0, 1.0, size=(n, len(edges) - 1, n)) * np.exp(-edges[:-1])[None, :, None]
    return PotentialEstimate(np.asarray(edges), mean, np.zeros_like(mean))


# -- convolution side ------------------------------------------------------------


@given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0), st.floats(0.01, 1.0))
def test_one_phase_reduces_to_classical_identity(seed, lo, width):
    rng = np.random.default_rng(seed)
    law = FiniteMixture((0.6, 0.4), (Exponential(float(rng.uniform(0.5, 3))),
                                      Exponential(float(rng.uniform(0.5, 3))).negated()))
    comp = LevyComponentSpec(1.0, 0.0, CompoundPoisson(float(rng.uniform(0.2, 3)), law))
    spec = MapSpec((comp,), [[0.0]])
    edges = np.linspace(0.0, 8.0, 161)
    pot = _synthetic_potential(1, edges, rng)
    general = vigon_rhs(spec, pot, 0, 0, lo, lo + width)
    classical = classical_vigon_rhs(comp, edges, pot.mean[0, :, 0], lo, lo + width)
    assert abs(general - classical) <= 1e-12 * max(1.0, abs(classical))


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100.0))
def test_convolution_side_scales_with_the_potential(seed, scale):
    rng = np.random.default_rng(seed)
    spec = creeping_map()
    edges = np.linspace(0.0, 6.0, 121)
    pot = _synthetic_potential(2, edges, rng)
    scaled = PotentialEstimate(edges, scale * pot.mean, pot.se)
    for i in range(2):
        for j in range(2):
            a = vigon_rhs(spec, pot, i, j, 0.3, 0.5)
            b = vigon_rhs(spec, scaled, i, j, 0.3, 0.5)
            assert abs(b - scale * a) <= 1e-10 * max(1.0, abs(b))


@given(st.floats(0.05, 20.0), st.floats(0.05, 20.0))
def test_fitted_scales_are_covariant(s0, s1):
    rng = np.random.default_rng(0)
    rows = []
    for i in range(2):
        for k in range(10):
            lhs = float(rng.uniform(1.0, 2.0))
            rows.append(VigonRow(i, i, 0.2 + 0.1 * k, 0.3 + 0.1 * k, lhs, 0.01, lhs * float(rng.uniform(0.9, 1.1)), 0.01))
    base = fit_phase_scales(rows, 2, (0.2, 2.0))
    for r in rows:
        f = s0 if r.i == 0 else s1
        r.rhs, r.rhs_se = r.rhs / f, r.rhs_se / f
    np.testing.assert_allclose(fit_phase_scales(rows, 2, (0.2, 2.0)), base * [s0, s1], rtol=1e-12)


def test_spectrally_negative_parent_has_empty_convolution_side():
    spec = MapSpec((LevyComponentSpec(1.0, 0.0, CompoundPoisson(1.0, Exponential(1.0).negated())),
                    LevyComponentSpec(2.0, 0.0, CompoundPoisson(2.0, Exponential(2.0).negated()))),
                   [[-1.0, 1.0], [1.0, -1.0]], [[None, UniformInterval(-1.0, -0.5)], [PointMass(-0.3), None]])
    edges = np.linspace(0.0, 5.0, 101)
    pot = _synthetic_potential(2, edges, np.random.default_rng(1))
    for i in range(2):
        for j in range(2):
            assert vigon_rhs(spec, pot, i, j, 0.0, 2.0) == 0.0


def test_dual_identities_are_direct_identities_of_the_dual():
    spec = creeping_map()
    edges = np.linspace(0.0, 6.0, 121)
    pot = _synthetic_potential(2, edges, np.random.default_rng(2))
    assert vigon_rhs_dual(spec, pot, 1, 0, 0.2, 0.4) == vigon_rhs(dualize(spec), pot, 1, 0, 0.2, 0.4)


def test_spectrally_positive_one_phase_against_ladder_histogram():
    a, c, mu = 1.0, 2.0, 1.0
    spec = MapSpec((LevyComponentSpec(-a, 0.0, CompoundPoisson(c, Exponential(mu))),), [[0.0]])
    est = estimate_ladder_spec(spec, 20_000, np.random.default_rng(3), edges=np.linspace(0.0, 4.0, 21))
    assert est.normalization == "epochs"
    vals, ses = est.jump_bin_intensity(0)
    # dual ladder: unit drift killed at rate c/a - mu, so its potential has density exp(-kappa y)
    kappa = c / a - mu
    pe = np.arange(0.0, 40.0, 0.01)
    mass = (np.exp(-kappa * pe[:-1]) - np.exp(-kappa * pe[1:])) / kappa
    e = est.edges
    rhs = np.array([classical_vigon_rhs(spec.components[0], pe, mass, e[k], e[k + 1]) for k in range(len(e) - 1)])
    scale = vals.sum() / rhs.sum()
    assert abs(scale - 1) < 0.02
    assert np.all(np.abs(vals - scale * rhs) <= 3 * ses)


def test_transitional_ladder_mass_follows_positive_support():
    # without upward jumps inside the phases, only transitional jumps can enter a new phase strictly above the maximum
    spec = MapSpec((LevyComponentSpec(2.0, 0.0, CompoundPoisson(1.0, Exponential(1.0).negated())),
                    LevyComponentSpec(1.0, 0.0, CompoundPoisson(1.0, Exponential(2.0).negated()))),
                   [[-1.0, 1.0], [2.0, -2.0]], [[None, Exponential(2.0)], [Exponential(1.0).negated(), None]])
    est = estimate_ladder_spec(spec, 4000, np.random.default_rng(4), local_time=20.0)
    assert est.f_counts[0, 1].sum() > 0
    assert est.f_counts[1, 0].sum() == 0


# -- analytic transfer ------------------------------------------------------------------


def test_exponential_moments_transfer(creeping):
    assert all(v.holds for v in moment_transfer_check(creeping, 0.5))


def test_pareto_fails_exponential_transfer_and_is_named():
    spec = MapSpec((LevyComponentSpec(1.0, 0.0, CompoundPoisson(1.0, Pareto(3.0))),
                    LevyComponentSpec(1.0, 0.0, CompoundPoisson(1.0, Exponential(2.0)))),
                   [[-1.0, 1.0], [1.0, -1.0]])
    v = moment_transfer_check(spec, 0.5)
    assert not v[0].holds and "Pareto" in v[0].offending[0]
    assert v[1].holds
    assert all(x.holds for x in moment_transfer_check(spec, 2.0, "polynomial"))
    assert not moment_transfer_check(spec, 3.0, "polynomial")[0].holds


def test_exponential_above_rate_fails():
    spec = MapSpec((LevyComponentSpec(1.0, 0.0, CompoundPoisson(1.0, Exponential(2.0))),), [[0.0]])
    assert not moment_transfer_check(spec, 2.5)[0].holds


def test_density_route_for_exponential_jumps():
    spec = MapSpec((LevyComponentSpec(-1.0, 0.0, CompoundPoisson(1.0, Exponential(1.0))),), [[0.0]])
    cert = absolute_continuity_transfer(spec)
    assert cert.routes == ("density",)
    assert cert.phase_intervals[0] == [(0.0, math.inf)]


def test_creeping_route_always_certified(creeping):
    cert = absolute_continuity_transfer(creeping)
    assert "creeping" in cert.routes and cert.creeping_phases == (0, 1)


def test_point_masses_give_no_density_route():
    spec = MapSpec((LevyComponentSpec(-1.0, 0.0, CompoundPoisson(1.0, PointMass(1.0))),
                    LevyComponentSpec(1.0, 0.0, CompoundPoisson(1.0, PointMass(0.5)))),
                   [[-1.0, 1.0], [1.0, -1.0]], [[None, PointMass(1.0)], [PointMass(2.0), None]])
    assert absolute_continuity_transfer(spec).routes == ("creeping",)


# -- Wiener-Hopf factorization ----------------------------------------------------------


def _unit_drift_ladder(drift=1.0, killing=0.0, jumps=None):
    return LadderSpec((drift,), (jumps,), [[0.0]], killing=(killing,))


def test_brownian_factorization():
    bm = MapSpec((LevyComponentSpec(0.0, 1.0),), [[0.0]])
    rep = wiener_hopf_residual(bm, _unit_drift_ladder(), _unit_drift_ladder(), THETAS)
    assert rep.max_residual < 1e-9 and abs(rep.scales[0] - 0.5) < 1e-12
    s = 1 / math.sqrt(2)
    rep = wiener_hopf_residual(bm, _unit_drift_ladder(s), _unit_drift_ladder(s), THETAS)
    assert rep.max_residual < 1e-9 and abs(rep.scales[0] - 1.0) < 1e-12


def test_spectrally_negative_factorization():
    a, c, mu = 2.0, 1.0, 1.0
    spec = MapSpec((LevyComponentSpec(a, 0.0, CompoundPoisson(c, Exponential(mu).negated())),), [[0.0]])
    down = _unit_drift_ladder(0.0, a - c / mu, CompoundPoisson(c / mu, Exponential(mu)))
    assert wiener_hopf_residual(spec, _unit_drift_ladder(), down, THETAS).max_residual < 1e-9


def test_spectrally_positive_factorization():
    a, c, mu = 1.0, 2.0, 1.0
    spec = MapSpec((LevyComponentSpec(-a, 0.0, CompoundPoisson(c, Exponential(mu))),), [[0.0]])
    up = _unit_drift_ladder(0.0, 0.0, CompoundPoisson(a, Exponential(mu)))
    assert wiener_hopf_residual(spec, up, _unit_drift_ladder(1.0, c / a - mu), THETAS).max_residual < 1e-9


def test_wrong_ladder_leaves_a_residual():
    bm = MapSpec((LevyComponentSpec(0.0, 1.0),), [[0.0]])
    wrong = _unit_drift_ladder(1.0, 0.5)
    assert wiener_hopf_residual(bm, wrong, _unit_drift_ladder(), THETAS).max_residual > 0.1


def test_estimated_ladders_factorize_transient_parent():
    res = wiener_hopf_mc_check(creeping_map(), 20_000, np.random.default_rng(5), np.linspace(0.2, 3.0, 8))
    assert res.max_z < 3
    np.testing.assert_allclose(res.report.scales, 1.0, atol=0.05)


@pytest.mark.filterwarnings("ignore:.*hit the horizon")
def test_estimated_ladders_factorize_oscillating_parent():
    res = wiener_hopf_mc_check(oscillating_map(), 4000, np.random.default_rng(3), np.linspace(0.2, 3.0, 8),
                               gap_cap=math.inf, local_time=2.0, max_epochs=20, max_horizon=1e3)
    assert res.max_z < 3
