"""Domain types for Markov additive processes and their ladder subordinators.

A MAP on ``R x {0, ..., n-1}`` is described by one Lévy component per phase,
a rate matrix ``Q`` for the modulating chain and a transitional jump law
``F[i][j]`` applied to the ordinator when the chain jumps from ``i`` to ``j``.

Convention for the Lévy components: ``drift`` is the actual linear slope of
the path whenever the jump part has finite variation (compound Poisson,
stable with ``alpha < 1``, log-stable). For stable jumps with ``alpha > 1``
the jumps are fully compensated and ``drift`` equals the mean of the unit
increment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special
from scipy.sparse.csgraph import connected_components

from .laws import INF, JumpLaw, LogStable, Moment, Negated, TailDecay, stable_levy_constants

RATE_TOL = 1e-12
MAX_PHASES = 16


# --------------------------------------------------------------------------
# Lévy components
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CompoundPoisson:
    """Jumps at Poisson ``rate`` with sizes drawn from ``law``."""

    rate: float
    law: JumpLaw

    def char_integral(self, theta: float) -> complex:
        return self.rate * (complex(self.law.mgf(1j * theta)) - 1.0)

    def negated(self):
        return CompoundPoisson(self.rate, self.law.negated())


@dataclass(frozen=True)
class StableJumps:
    """Power-law Lévy density ``c_plus x^(-alpha-1)`` on ``x > 0`` and ``c_minus |x|^(-alpha-1)`` on ``x < 0``."""

    alpha: float
    c_plus: float
    c_minus: float

    def char_integral(self, theta: float) -> complex:
        a, cp, cm = self.alpha, self.c_plus, self.c_minus
        if theta == 0:
            return 0j
        r = abs(theta) ** a
        if a == 1.0:
            return complex(-(cp + cm) * 0.5 * math.pi * r, 0.0)
        g = special.gamma(-a)
        s = math.copysign(1.0, theta)
        return g * r * complex((cp + cm) * math.cos(0.5 * math.pi * a), -s * (cp - cm) * math.sin(0.5 * math.pi * a))

    def negated(self):
        return StableJumps(self.alpha, self.c_minus, self.c_plus)

    def tail(self, y: float) -> float:
        """Mass of ``(y, inf)`` for ``y > 0``."""
        return self.c_plus * y ** (-self.alpha) / self.alpha

    def lower_tail(self, y: float) -> float:
        """Mass of ``(-inf, y)`` for ``y < 0``."""
        return self.c_minus * (-y) ** (-self.alpha) / self.alpha


@dataclass(frozen=True)
class LampertiStableJumps:
    """Jump measure of the log-radius of a stable process on one sign phase."""

    alpha: float
    rho: float
    side: int = 1
    negate: bool = False

    @property
    def law(self) -> JumpLaw:
        base = LogStable(self.alpha, self.rho, self.side)
        return Negated(base) if self.negate else base

    def char_integral(self, theta: float) -> complex:
        val = LogStable(self.alpha, self.rho, self.side).char_integral(-theta if self.negate else theta)
        return val

    def negated(self):
        return LampertiStableJumps(self.alpha, self.rho, self.side, not self.negate)


JumpSpec = Optional[CompoundPoisson | StableJumps | LampertiStableJumps]


@dataclass(frozen=True)
class LevyComponentSpec:
    """Lévy triplet of one phase: drift, Gaussian coefficient, jump part and killing."""

    drift: float = 0.0
    gaussian: float = 0.0
    jumps: JumpSpec = None
    killing: float = 0.0

    @property
    def finite_activity(self) -> bool:
        return self.jumps is None or isinstance(self.jumps, CompoundPoisson)

    @property
    def exactly_simulable(self) -> bool:
        return self.finite_activity and self.gaussian == 0.0

    @property
    def unbounded_variation(self) -> bool:
        if self.gaussian > 0:
            return True
        return isinstance(self.jumps, StableJumps) and self.jumps.alpha >= 1.0

    def char_exponent(self, theta: float) -> complex:
        """``log E[exp(i theta X_1)]`` (killing excluded)."""
        val = complex(0.0, self.drift * theta) - 0.5 * self.gaussian ** 2 * theta ** 2
        if self.jumps is not None:
            val += self.jumps.char_integral(theta)
        return val

    def mean(self) -> float:
        """Mean of the unit increment; ``inf``/``-inf``/``nan`` when not finite."""
        j = self.jumps
        if j is None:
            return self.drift
        if isinstance(j, CompoundPoisson):
            return self.drift + j.rate * j.law.mean()
        if isinstance(j, StableJumps):
            if j.alpha > 1:
                return self.drift
            if j.c_plus > 0 and j.c_minus > 0:
                return math.nan
            return INF if j.c_plus > 0 else (-INF if j.c_minus > 0 else self.drift)
        return self.drift + j.law.mean()

    def positive_jump_support(self) -> bool:
        """Whether the jump measure charges ``(0, inf)``."""
        j = self.jumps
        if j is None:
            return False
        if isinstance(j, CompoundPoisson):
            return j.law.positive_mass() > 0
        if isinstance(j, StableJumps):
            return j.c_plus > 0
        return True

    def negated(self) -> "LevyComponentSpec":
        return LevyComponentSpec(-self.drift, self.gaussian, None if self.jumps is None else self.jumps.negated(),
                                 self.killing)

    def upper_jump_decay(self) -> TailDecay:
        j = self.jumps
        if j is None:
            return TailDecay("bounded")
        if isinstance(j, CompoundPoisson):
            return j.law.upper_decay()
        if isinstance(j, StableJumps):
            return TailDecay("power", j.alpha) if j.c_plus > 0 else TailDecay("bounded")
        return j.law.upper_decay()

    def jump_exponential_moment(self, lam: float, lower: float = 1.0) -> Moment:
        """``int_(lower, inf) exp(lam x) Pi(dx)``."""
        j = self.jumps
        if j is None:
            return Moment(True, 0.0)
        if isinstance(j, CompoundPoisson):
            m = j.law.exponential_moment(lam, lower)
            return Moment(m.finite, j.rate * m.value) if m.finite else m
        if isinstance(j, StableJumps):
            return Moment.infinite() if (j.c_plus > 0 and lam > 0) else Moment(True, 0.0)
        return j.law.exponential_moment(lam, lower)

    def jump_power_moment(self, p: float, lower: float = 1.0) -> Moment:
        j = self.jumps
        if j is None:
            return Moment(True, 0.0)
        if isinstance(j, CompoundPoisson):
            m = j.law.power_moment(p, lower)
            return Moment(m.finite, j.rate * m.value) if m.finite else m
        if isinstance(j, StableJumps):
            if j.c_plus == 0:
                return Moment(True, 0.0)
            if p >= j.alpha:
                return Moment.infinite()
            return Moment(True, j.c_plus * lower ** (p - j.alpha) / (j.alpha - p))
        return Moment(True, j.law._integrate_against(lambda x: x ** p, lower))


# --------------------------------------------------------------------------
# specs
# --------------------------------------------------------------------------


def _frozen_matrix(Q) -> np.ndarray:
    arr = np.array(Q, dtype=float)
    arr.setflags(write=False)
    return arr


def _law_grid(F, n):
    if F is None:
        return tuple(tuple(None for _ in range(n)) for _ in range(n))
    return tuple(tuple(F[i][j] for j in range(len(F[i]))) for i in range(len(F)))


@dataclass(frozen=True, eq=False)
class MapSpec:
    """A MAP: per-phase Lévy components, modulator rates ``Q`` and transitional laws ``F``."""

    components: tuple[LevyComponentSpec, ...]
    Q: np.ndarray
    F: tuple[tuple[Optional[JumpLaw], ...], ...] = None
    labels: tuple = None

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "Q", _frozen_matrix(self.Q))
        object.__setattr__(self, "F", _law_grid(self.F, len(comps)))
        if self.labels is None:
            object.__setattr__(self, "labels", tuple(range(len(comps))))

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def exactly_simulable(self) -> bool:
        return all(c.exactly_simulable for c in self.components)


@dataclass(frozen=True, eq=False)
class LadderSpec:
    """A MAP subordinator: drifts, compound Poisson jumps, ``Q``, transitional laws, killing."""

    drifts: tuple[float, ...]
    jumps: tuple[Optional[CompoundPoisson], ...]
    Q: np.ndarray
    F: tuple[tuple[Optional[JumpLaw], ...], ...] = None
    killing: tuple[float, ...] = None

    def __post_init__(self):
        d = tuple(float(v) for v in self.drifts)
        n = len(d)
        object.__setattr__(self, "drifts", d)
        object.__setattr__(self, "jumps", tuple(self.jumps) if self.jumps is not None else (None,) * n)
        object.__setattr__(self, "Q", _frozen_matrix(self.Q))
        object.__setattr__(self, "F", _law_grid(self.F, n))
        k = (0.0,) * n if self.killing is None else tuple(float(v) for v in self.killing)
        object.__setattr__(self, "killing", k)

    @property
    def n(self) -> int:
        return len(self.drifts)

    @property
    def unkilled(self) -> bool:
        return all(k == 0 for k in self.killing)

    def jump_rate(self, i: int) -> float:
        j = self.jumps[i]
        return 0.0 if j is None else j.rate


@dataclass
class ValidationReport:
    """Outcome of :func:`validate`."""

    violations: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, path: str, message: str):
        self.violations.append((path, message))

    def to_dict(self):
        return {"ok": self.ok, "violations": [{"field": p, "message": m} for p, m in self.violations]}


def _check_rate_matrix(Q, report, name="Q"):
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        report.add(name, f"{name} must be square")
        return False
    n = Q.shape[0]
    for i in range(n):
        for j in range(n):
            if i != j and Q[i, j] < 0:
                report.add(f"{name}[{i}][{j}]", "negative off-diagonal rate")
            if not math.isfinite(Q[i, j]):
                report.add(f"{name}[{i}][{j}]", "non-finite rate")
        if abs(Q[i].sum()) > RATE_TOL:
            report.add(f"{name}[{i}]", f"{name} row {i} not conservative")
    return True


def _check_transitions(Q, F, report, ladder=False):
    n = Q.shape[0]
    if len(F) != n or any(len(row) != n for row in F):
        report.add("F", "transitional law grid must be n x n")
        return
    for i in range(n):
        if F[i][i] is not None:
            report.add(f"F[{i}][{i}]", "diagonal transitional jump")
        for j in range(n):
            law = F[i][j]
            if law is None or i == j:
                continue
            if Q[i, j] == 0:
                report.add(f"F[{i}][{j}]", "transitional law given where the rate is zero")
            if not math.isclose(law.total_mass, 1.0, rel_tol=0, abs_tol=1e-9):
                report.add(f"F[{i}][{j}]", "transitional law must have total mass 1")
            if ladder and law.support()[0] < 0:
                report.add(f"F[{i}][{j}]", "ladder transitional law must live on [0, inf)")


def validate(spec: MapSpec | LadderSpec) -> ValidationReport:
    """Check every structural invariant of a spec; violations are listed, never raised."""
    report = ValidationReport()
    n = spec.n
    if n < 1:
        report.add("n", "at least one phase required")
        return report
    if n > MAX_PHASES:
        report.add("n", f"at most {MAX_PHASES} phases supported")
    Q = np.asarray(spec.Q)
    if Q.shape != (n, n):
        report.add("Q", f"Q must be {n} x {n}")
        return report
    _check_rate_matrix(Q, report)
    _check_transitions(Q, spec.F, report, ladder=isinstance(spec, LadderSpec))

    if isinstance(spec, MapSpec):
        for i, c in enumerate(spec.components):
            p = f"components[{i}]"
            if c.gaussian < 0:
                report.add(p + ".gaussian", "gaussian coefficient must be nonnegative")
            if c.killing < 0:
                report.add(p + ".killing", "killing rate must be nonnegative")
            j = c.jumps
            if isinstance(j, CompoundPoisson):
                if not (0 < j.rate < INF):
                    report.add(p + ".jumps.rate", "compound Poisson rate must be positive and finite")
                if not math.isclose(j.law.total_mass, 1.0, rel_tol=0, abs_tol=1e-9):
                    report.add(p + ".jumps.law", "compound Poisson law must have total mass 1")
            elif isinstance(j, StableJumps):
                if not (0 < j.alpha < 2):
                    report.add(p + ".jumps.alpha", "stable index must lie in (0, 2)")
                if j.c_plus < 0 or j.c_minus < 0:
                    report.add(p + ".jumps", "stable constants must be nonnegative")
                if j.alpha == 1.0 and j.c_plus != j.c_minus:
                    report.add(p + ".jumps", "asymmetric stable jumps with alpha = 1 are unsupported")
            elif isinstance(j, LampertiStableJumps):
                if not (0 < j.alpha < 1):
                    report.add(p + ".jumps.alpha", "log-stable jumps need alpha in (0, 1)")
                if not (0 < j.rho < 1):
                    report.add(p + ".jumps.rho", "positivity parameter must lie in (0, 1)")
    else:
        for i in range(n):
            p = f"phases[{i}]"
            if spec.drifts[i] < 0:
                report.add(p + ".drift", "ladder drift must be nonnegative")
            if spec.killing[i] < 0:
                report.add(p + ".killing", "killing rate must be nonnegative")
            j = spec.jumps[i]
            if j is not None:
                if not isinstance(j, CompoundPoisson):
                    report.add(p + ".jumps", "ladder jumps must be compound Poisson")
                    continue
                if not (0 < j.rate < INF):
                    report.add(p + ".jumps.rate", "compound Poisson rate must be positive and finite")
                if j.law.support()[0] < 0:
                    report.add(p + ".jumps.law", "ladder jump law must live on [0, inf)")
                if not math.isclose(j.law.total_mass, 1.0, rel_tol=0, abs_tol=1e-9):
                    report.add(p + ".jumps.law", "compound Poisson law must have total mass 1")
            if spec.drifts[i] <= 0 and spec.jump_rate(i) <= 0:
                report.add(p, "ordinator stalls: needs a positive drift or a positive jump rate")
    return report


def require_valid(spec):
    report = validate(spec)
    if not report.ok:
        msg = "; ".join(f"{p}: {m}" for p, m in report.violations)
        raise SpecError(msg, report)
    return spec


class SpecError(ValueError):
    """Raised when a spec fails validation."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


# --------------------------------------------------------------------------
# modulator structure
# --------------------------------------------------------------------------


def q_matrix_irreducible(Q) -> bool:
    """True iff the graph of positive off-diagonal rates is strongly connected."""
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if n == 1:
        return True
    adj = (Q > 0) & ~np.eye(n, dtype=bool)
    ncomp, _ = connected_components(adj.astype(int), directed=True, connection="strong")
    return ncomp == 1


def stationary_of_Q(Q) -> np.ndarray:
    """Stationary distribution of an irreducible rate matrix.

    Solves ``pi Q = 0`` with ``sum(pi) = 1`` by replacing one balance equation
    with the normalization and polishing with one step of iterative
    refinement.
    """
    Q = np.asarray(Q, dtype=float)
    n = Q.shape[0]
    if not q_matrix_irreducible(Q):
        raise ValueError("no unique stationary distribution (rate matrix is reducible)")
    if n == 1:
        return np.ones(1)
    A = Q.T.copy()
    A[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    pi = np.linalg.solve(A, rhs)
    pi = pi + np.linalg.solve(A, rhs - A @ pi)
    pi = np.maximum(pi, 0.0)
    return pi / pi.sum()


def dualize(spec: MapSpec) -> MapSpec:
    """Time-reversed MAP: ``q_hat[i,j] = pi[j] q[j,i] / pi[i]``, components and jumps negated."""
    pi = stationary_of_Q(spec.Q)
    Q = np.asarray(spec.Q)
    n = spec.n
    Qh = (Q.T * pi[None, :]) / pi[:, None]
    np.fill_diagonal(Qh, 0.0)
    np.fill_diagonal(Qh, -Qh.sum(axis=1))
    Fh = [[None if spec.F[j][i] is None else spec.F[j][i].negated() for j in range(n)] for i in range(n)]
    comps = tuple(c.negated() for c in spec.components)
    return MapSpec(comps, Qh, Fh, spec.labels)


def specs_allclose(a: MapSpec, b: MapSpec, tol: float = 1e-12) -> bool:
    """Parameter-wise comparison with a tolerance on the rate matrix."""
    return (a.n == b.n and np.allclose(a.Q, b.Q, rtol=0, atol=tol) and a.components == b.components
            and a.F == b.F)


@dataclass(frozen=True)
class IrreducibilityVerdict:
    holds: bool
    route: str
    witness: dict


def _supp_unbounded_above(law: JumpLaw | None) -> bool:
    return law is not None and math.isinf(law.support()[1])


def _supp_hits_positive(law: JumpLaw | None) -> bool:
    return law is not None and law.positive_mass() > 0


def ladder_irreducibility_sufficient(spec: MapSpec) -> IrreducibilityVerdict:
    """Sufficient parametric conditions for the ladder modulator to be irreducible.

    Route (i): every phase reaches new maxima on its own (unbounded variation
    or upward jumps), through an incoming transitional jump with support
    unbounded above, or through a transitional jump with positive support
    from such a phase. Route (ii): the positive rates that are backed by
    condition (i) in the source phase or by positive transitional support
    already form a strongly connected graph.
    """
    Q = np.asarray(spec.Q)
    n = spec.n
    if not q_matrix_irreducible(Q):
        return IrreducibilityVerdict(False, "none", {"reason": "modulator is reducible"})
    cond_a = [c.unbounded_variation or c.positive_jump_support() for c in spec.components]
    cond_b = [any(k != j and Q[k, j] > 0 and _supp_unbounded_above(spec.F[k][j]) for k in range(n))
              for j in range(n)]
    lam1 = {j for j in range(n) if cond_a[j] or cond_b[j]}
    lam2 = {j for j in range(n) if j not in lam1
            and any(Q[k, j] > 0 and _supp_hits_positive(spec.F[k][j]) for k in lam1)}
    witness = {}
    for j in range(n):
        if cond_a[j]:
            witness[j] = "own jumps or variation"
        elif cond_b[j]:
            witness[j] = "unbounded incoming transitional jump"
        elif j in lam2:
            witness[j] = "positive transitional jump from a phase in the first class"
    if len(lam1 | lam2) == n:
        return IrreducibilityVerdict(True, "i", witness)

    good = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            if i != j and Q[i, j] > 0 and (cond_a[i] or _supp_hits_positive(spec.F[i][j])):
                good[i, j] = True
    if n == 1 or connected_components(good.astype(int), directed=True, connection="strong")[0] == 1:
        return IrreducibilityVerdict(True, "ii", {f"{i}->{j}": "backed transition" for i, j in zip(*np.nonzero(good))})
    return IrreducibilityVerdict(False, "none", witness)


def ladder_pi(ladder: LadderSpec) -> np.ndarray:
    """Stationary law of the ladder modulator."""
    return stationary_of_Q(ladder.Q)
