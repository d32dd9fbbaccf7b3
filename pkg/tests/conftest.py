import numpy as np
import pytest
from hypothesis import settings

from mapfluct.laws import Exponential, FiniteMixture
from mapfluct.model import CompoundPoisson, LadderSpec, LevyComponentSpec, MapSpec

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def two_phase_ladder() -> LadderSpec:
    """Light-tailed creeping ladder used across the resolvent and ergodicity checks."""
    return LadderSpec((1.0, 0.5), (CompoundPoisson(1.0, Exponential(2.0)), CompoundPoisson(2.0, Exponential(3.0))),
                      [[-1.0, 1.0], [1.0, -1.0]], [[None, Exponential(1.0)], [Exponential(1.0), None]])


def creeping_map() -> MapSpec:
    """Two-phase MAP drifting to +inf with positive drifts and two-sided exponential jumps."""
    return MapSpec(
        (LevyComponentSpec(1.0, 0.0, CompoundPoisson(1.0, FiniteMixture((0.5, 0.5),
                                                                         (Exponential(1.0), Exponential(2.0).negated())))),
         LevyComponentSpec(0.5, 0.0, CompoundPoisson(2.0, FiniteMixture((0.4, 0.6),
                                                                         (Exponential(1.5), Exponential(1.0).negated()))))),
        [[-1.0, 1.0], [2.0, -2.0]], [[None, Exponential(2.0)], [Exponential(1.0).negated(), None]])


def oscillating_map() -> MapSpec:
    """Two-phase MAP with zero long-run drift and no transitional jumps."""
    return MapSpec(
        (LevyComponentSpec(1.0, 0.0, CompoundPoisson(1.0, FiniteMixture((0.5, 0.5),
                                                                         (Exponential(1.0), Exponential(0.5).negated())))),
         LevyComponentSpec(0.5, 0.0, CompoundPoisson(1.0, Exponential(1.0).negated()))),
        [[-1.0, 1.0], [1.0, -1.0]])


def random_map_spec(rng, n=None) -> MapSpec:
    """Random drift + compound Poisson MAP with two-sided exponential jumps and transitional jumps."""
    n = int(rng.integers(1, 4)) if n is None else n
    comps = []
    for _ in range(n):
        law = FiniteMixture((0.5, 0.5), (Exponential(float(rng.uniform(0.5, 3))),
                                          Exponential(float(rng.uniform(0.5, 3))).negated()))
        comps.append(LevyComponentSpec(float(rng.uniform(-2, 2)), float(rng.uniform(0, 1)),
                                       CompoundPoisson(float(rng.uniform(0.2, 3)), law)))
    Q = rng.uniform(0.2, 2, size=(n, n))
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    F = [[None if i == j else (Exponential(float(rng.uniform(0.5, 3))) if rng.random() < 0.5
                               else Exponential(float(rng.uniform(0.5, 3))).negated())
          for j in range(n)] for i in range(n)]
    return MapSpec(tuple(comps), Q, F)


def random_ladder(rng, n=None) -> LadderSpec:
    """Random unkilled ladder with positive drifts, exponential jumps and transitional jumps."""
    n = int(rng.integers(1, 4)) if n is None else n
    Q = rng.uniform(0.2, 2, size=(n, n))
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    F = [[None if i == j else Exponential(float(rng.uniform(0.5, 3))) for j in range(n)] for i in range(n)]
    return LadderSpec(tuple(float(v) for v in rng.uniform(0.1, 2, n)),
                      tuple(CompoundPoisson(float(rng.uniform(0.2, 3)), Exponential(float(rng.uniform(0.5, 4))))
                            for _ in range(n)), Q, F)


@pytest.fixture
def ladder():
    return two_phase_ladder()


@pytest.fixture
def creeping():
    return creeping_map()


ACCEPTANCE_LINES: list[str] = []


def report_criterion(number: int, passed: bool, detail: str) -> None:
    """Print and keep one PASS/FAIL line for an acceptance criterion."""
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
