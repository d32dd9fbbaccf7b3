import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special

from mapfluct.analytics import drift_dichotomy
from mapfluct.laws import Exponential
from mapfluct.lamperti import (AbsorbedError, RealPath, lamperti_kiu_forward, lamperti_kiu_inverse,
                               lamperti_stable_spec, map_path_distance)
from mapfluct.model import CompoundPoisson, LevyComponentSpec, MapSpec, q_matrix_irreducible, validate
from mapfluct.samplers import EventList, sample_stable_increment
from mapfluct.simulator import MapPath, Segment, simulate_path

# sign flip rate at alpha = rho = 1/2, from Gamma(3/2) sin(pi/4) / pi / (1/2)
FLIP_RATE_HALF = 0.3989422804014327


def _constant_path(drift: float, horizon: float = 3.0, phase: int = 1) -> MapPath:
    seg = Segment(0.0, horizon, phase, 0.0, drift, 0.0, EventList(np.empty(0), np.empty(0), horizon))
    return MapPath((seg,), (), horizon)


def _random_two_phase_spec(rng) -> MapSpec:
    comps = tuple(LevyComponentSpec(float(rng.uniform(-1, 1)), 0.0,
                                    CompoundPoisson(float(rng.uniform(0.5, 3)),
                                                    Exponential(float(rng.uniform(0.5, 3))).negated()
                                                    if rng.random() < 0.5 else Exponential(float(rng.uniform(0.5, 3)))))
                  for _ in range(2))
    a, b = rng.uniform(0.3, 2, size=2)
    return MapSpec(comps, [[-a, a], [b, -b]], [[None, Exponential(1.0).negated()], [Exponential(0.7), None]])


# -- the stable MAP -------------------------------------------------------------------


def test_flip_rates_regression():
    spec = lamperti_stable_spec(0.5, 0.5)
    np.testing.assert_allclose(spec.Q, [[-FLIP_RATE_HALF, FLIP_RATE_HALF], [FLIP_RATE_HALF, -FLIP_RATE_HALF]],
                               rtol=1e-14)
    assert FLIP_RATE_HALF == pytest.approx(special.gamma(1.5) * math.sin(math.pi / 4) / math.pi / 0.5, rel=1e-15)


def test_flip_rates_follow_the_opposite_tail():
    spec = lamperti_stable_spec(0.6, 0.3)
    # rho < 1/2 puts more mass on downward jumps, so flips from +1 are faster
    assert spec.Q[1, 0] > spec.Q[0, 1]


@pytest.mark.parametrize("alpha, rho", [(0.5, 0.5), (0.3, 0.7), (0.8, 0.4)])
def test_flip_law_has_unit_mass(alpha, rho):
    flip = lamperti_stable_spec(alpha, rho).F[0][1]
    mass = integrate.quad(flip.pdf, -math.inf, math.inf, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    assert abs(mass - 1.0) <= 1e-8


def test_exponential_moments_stop_at_alpha():
    alpha = 0.5
    plus = lamperti_stable_spec(alpha, 0.5).components[1]
    assert plus.jump_exponential_moment(alpha / 2, 1.0).finite
    assert not plus.jump_exponential_moment(alpha, 1.0).finite
    law = plus.jumps.law
    partial = [integrate.quad(lambda x: math.exp(alpha * x) * float(law.pdf(x)), 1.0, M, limit=400)[0]
               for M in (10.0, 100.0, 1000.0)]
    assert partial[1] > 5 * partial[0] and partial[2] > 5 * partial[1]
    finite = [integrate.quad(lambda x: math.exp(alpha / 2 * x) * float(law.pdf(x)), 1.0, M, limit=400)[0]
              for M in (100.0, 1000.0)]
    assert finite[1] == pytest.approx(finite[0], rel=1e-6)


@pytest.mark.parametrize("alpha, rho", [(0.5, 0.5), (0.3, 0.7), (0.8, 0.4)])
def test_stable_map_is_valid_transient_and_irreducible(alpha, rho):
    spec = lamperti_stable_spec(alpha, rho)
    assert validate(spec).ok
    assert q_matrix_irreducible(spec.Q)
    assert drift_dichotomy(spec).verdict == "Transient"
    assert spec.labels == (-1, 1)
    assert all(c.drift == 0.0 and c.gaussian == 0.0 for c in spec.components)


@pytest.mark.parametrize("alpha, rho", [(1.0, 0.5), (0.5, 0.0), (0.5, 1.0)])
def test_stable_map_rejects_one_sided_or_out_of_range(alpha, rho):
    with pytest.raises(ValueError):
        lamperti_stable_spec(alpha, rho)


def test_grid_stable_path_switches_at_the_flip_rate():
    # a symmetric stable path sampled on a grid, mapped forward; sign changes per unit of MAP time
    alpha, h, steps, n_paths = 0.5, 1e-2, 1000, 500
    rng = np.random.default_rng(11)
    inc = sample_stable_increment(alpha, 0.5, h, rng, steps * n_paths).reshape(n_paths, steps)
    switches, map_time = 0, 0.0
    for row in inc:
        z = 1.0 + np.concatenate(([0.0], np.cumsum(row)))
        mp = lamperti_kiu_forward(RealPath.from_grid(np.arange(steps + 1) * h, z, alpha))
        switches += len(mp.switches)
        map_time += mp.horizon
    assert abs(switches / map_time / FLIP_RATE_HALF - 1) < 0.15


# -- path transform ----------------------------------------------------------------------


def test_constant_map_path_gives_constant_real_path():
    real = lamperti_kiu_inverse(_constant_path(0.0), 0.5)
    assert real.horizon == pytest.approx(3.0, rel=1e-15)
    for t in np.linspace(0.0, 3.0, 13):
        assert real.value_at(t) == pytest.approx(1.0, rel=1e-15)


def test_unit_drift_gives_linear_growth_at_index_one():
    # xi_u = u, so real time is e^u - 1 and Z = e^u = 1 + real time
    real = lamperti_kiu_inverse(_constant_path(1.0), 1.0)
    assert real.horizon == pytest.approx(math.expm1(3.0), rel=1e-14)
    for t in np.linspace(0.0, math.expm1(3.0), 11):
        assert real.value_at(t) == pytest.approx(1.0 + t, rel=1e-13)


def test_negative_phase_gives_negative_values():
    real = lamperti_kiu_inverse(_constant_path(-0.5, phase=0), 0.7)
    assert all(v < 0 for _, v in real.knots())


def test_paths_touching_zero_are_absorbed():
    with pytest.raises(AbsorbedError, match="absorbed"):
        RealPath.from_grid([0.0, 1.0, 2.0, 3.0], [1.0, 0.0, -1.0, 2.0], 0.5)


def test_sign_changes_become_phase_switches():
    real = RealPath.from_grid([0.0, 1.0, 2.0, 3.0, 4.0], [2.0, -1.0, -3.0, 0.5, 0.5], 0.5)
    mp = lamperti_kiu_forward(real)
    assert [s.phase for s in mp.segments] == [1, 0, 1]
    assert [(s.src, s.dst) for s in mp.switches] == [(1, 0), (0, 1)]
    assert mp.switches[0].jump == pytest.approx(math.log(1.0) - math.log(2.0), abs=1e-15)
    # constant pieces last |Z|^(-alpha) units of MAP time per unit of real time
    assert mp.horizon == pytest.approx(2 ** -0.5 + 1 + 3 ** -0.5 + 0.5 ** -0.5, rel=1e-14)


def test_gaussian_segments_are_rejected():
    rng = np.random.default_rng(0)
    path = simulate_path(MapSpec((LevyComponentSpec(0.0, 1.0),), [[0.0]]), 1.0, rng)
    with pytest.raises(ValueError, match="Gaussian"):
        lamperti_kiu_inverse(path, 0.5)


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.95))
def test_round_trip_recovers_the_map_path(seed, alpha):
    rng = np.random.default_rng(seed)
    path = simulate_path(_random_two_phase_spec(rng), 5.0, rng)
    back = lamperti_kiu_forward(lamperti_kiu_inverse(path, alpha))
    assert map_path_distance(path, back) <= 1e-9


@given(st.integers(0, 2**32 - 1))
def test_inverse_of_forward_recovers_the_real_path(seed):
    rng = np.random.default_rng(seed)
    times = np.concatenate(([0.0], np.cumsum(rng.uniform(0.1, 1.0, 8))))
    values = rng.choice([-1.0, 1.0], 9) * rng.uniform(0.2, 5.0, 9)
    real = RealPath.from_grid(times, values, 0.6)
    again = lamperti_kiu_inverse(lamperti_kiu_forward(real), 0.6)
    np.testing.assert_allclose(np.array(again.knots()), np.array(real.knots()), rtol=1e-10, atol=1e-12)
