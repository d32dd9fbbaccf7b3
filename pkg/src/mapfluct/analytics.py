"""Matrix exponents, drift dichotomy, the overshoot resolvent and invariant laws.

Everything here is deterministic: closed forms where the built-in laws and
test functions allow them, adaptive quadrature otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .laws import INF, JumpLaw
from .model import LadderSpec, MapSpec, q_matrix_irreducible, stationary_of_Q

IDENTITY_TOL = 1e-10
EIGEN_TOL = 1e-9
DRIFT_TOL = 1e-9


class AnalyticsError(ValueError):
    """An analytic quantity does not exist or cannot be evaluated."""


# --------------------------------------------------------------------------
# matrix exponents
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class MatrixExponentEval:
    argument: float
    value: np.ndarray


def _transform_matrix(F, n, transform) -> np.ndarray:
    G = np.ones((n, n), dtype=complex)
    for i in range(n):
        for j in range(n):
            if i != j and F[i][j] is not None:
                G[i, j] = transform(F[i][j])
    return G


def char_matrix_exponent(spec: MapSpec, theta: float) -> MatrixExponentEval:
    """``diag(Psi_i(theta) - killing_i) + Q * G(theta)`` with ``G_ij = E[exp(i theta Delta_ij)]``."""
    n = spec.n
    diag = [c.char_exponent(theta) - c.killing for c in spec.components]
    G = _transform_matrix(spec.F, n, lambda law: complex(law.mgf(1j * theta)))
    return MatrixExponentEval(float(theta), np.diag(diag) + np.asarray(spec.Q) * G)


def ladder_component_exponent(ladder: LadderSpec, i: int, lam: float) -> float:
    """``killing + d lam + c (1 - E[exp(-lam Y)])`` of the ladder phase ``i``."""
    val = ladder.killing[i] + ladder.drifts[i] * lam
    j = ladder.jumps[i]
    if j is not None and lam != 0:
        val += j.rate * (1.0 - float(np.real(j.law.laplace(lam))))
    return val


def ladder_laplace_exponent(ladder: LadderSpec, lam: float) -> MatrixExponentEval:
    """``diag(Phi_i(lam)) - Q * G(lam)`` with ``G_ij = E[exp(-lam Delta_ij)]``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    n = ladder.n
    diag = [ladder_component_exponent(ladder, i, lam) for i in range(n)]
    G = _transform_matrix(ladder.F, n, lambda law: float(np.real(law.laplace(lam))))
    return MatrixExponentEval(float(lam), (np.diag(diag) - np.asarray(ladder.Q) * G).real)


@dataclass(frozen=True)
class SpectralReport:
    thetas: np.ndarray
    max_real_part: float
    max_real_per_theta: np.ndarray
    lambdas: tuple
    min_abs_det: float

    @property
    def holds(self) -> bool:
        return self.max_real_part <= EIGEN_TOL and self.min_abs_det > 0


def spectral_bound_check(spec: MapSpec, thetas, lambdas: Sequence[float] = (0.1, 1.0)) -> SpectralReport:
    """Largest real eigenvalue part of ``Psi(theta)`` and smallest ``|det(lam I - Psi(theta))|`` over a grid."""
    thetas = np.asarray(thetas, dtype=float)
    per = np.empty(len(thetas))
    min_det = math.inf
    eye = np.eye(spec.n)
    for k, th in enumerate(thetas):
        M = char_matrix_exponent(spec, th).value
        per[k] = np.max(np.linalg.eigvals(M).real)
        for lam in lambdas:
            min_det = min(min_det, abs(np.linalg.det(lam * eye - M)))
    return SpectralReport(thetas, float(per.max()), per, tuple(lambdas), float(min_det))


# --------------------------------------------------------------------------
# drift dichotomy
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DichotomyResult:
    verdict: str  # 'Transient', 'Oscillating', 'NegativeDrift' or 'undetermined-by-mean'
    drift: float
    phase_means: np.ndarray
    transition_means: np.ndarray


def drift_dichotomy(spec: MapSpec, tol: float = DRIFT_TOL) -> DichotomyResult:
    """Long-run drift ``sum_i pi_i (E[X^(i)_1] + sum_j q_ij E[Delta_ij])`` and the resulting regime."""
    pi = stationary_of_Q(spec.Q)
    Q = np.asarray(spec.Q)
    n = spec.n
    means = np.array([c.mean() for c in spec.components], dtype=float)
    tmeans = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j and spec.F[i][j] is not None:
                tmeans[i, j] = spec.F[i][j].mean()
    rows = means + np.nansum(np.where(Q > 0, Q, 0.0) * np.where(np.eye(n, dtype=bool), 0.0, tmeans), axis=1)
    if not np.all(np.isfinite(means)) or not np.all(np.isfinite(tmeans)):
        return DichotomyResult("undetermined-by-mean", math.nan, means, tmeans)
    drift = float(pi @ rows)
    if abs(drift) <= tol:
        verdict = "Oscillating"
    elif drift > 0:
        verdict = "Transient"
    else:
        verdict = "NegativeDrift"
    return DichotomyResult(verdict, drift, means, tmeans)


# --------------------------------------------------------------------------
# test functions and Q_lambda
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpPolyTerm:
    """``coef * y**power * exp(-rate * y)``."""

    coef: float
    power: int = 0
    rate: float = 0.0

    def __call__(self, y):
        return self.coef * np.power(y, self.power) * np.exp(-self.rate * np.asarray(y, dtype=float))


@dataclass(frozen=True)
class IndicatorTerm:
    """``coef * 1{lo <= y < hi}``."""

    coef: float
    lo: float
    hi: float

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return self.coef * ((y >= self.lo) & (y < self.hi)).astype(float)


@dataclass(frozen=True)
class TestFunction:
    """Function on ``[0, inf) x phases`` built from exponential-polynomial and indicator terms per phase."""

    terms: tuple[tuple, ...]

    @property
    def n(self) -> int:
        return len(self.terms)

    def __call__(self, y, i: int):
        out = np.zeros_like(np.asarray(y, dtype=float))
        for t in self.terms[i]:
            out = out + t(y)
        return out if out.ndim else float(out)

    def __add__(self, other: "TestFunction") -> "TestFunction":
        return TestFunction(tuple(a + b for a, b in zip(self.terms, other.terms)))

    def scaled(self, s: float) -> "TestFunction":
        def sc(t):
            if isinstance(t, ExpPolyTerm):
                return ExpPolyTerm(s * t.coef, t.power, t.rate)
            return IndicatorTerm(s * t.coef, t.lo, t.hi)

        return TestFunction(tuple(tuple(sc(t) for t in row) for row in self.terms))

    @classmethod
    def constant(cls, value: float, n: int) -> "TestFunction":
        return cls(tuple((ExpPolyTerm(value),) for _ in range(n)))

    @classmethod
    def exponential(cls, rate: float, n: int, coefs=None) -> "TestFunction":
        coefs = [1.0] * n if coefs is None else coefs
        return cls(tuple((ExpPolyTerm(float(c), 0, rate),) for c in coefs))

    @classmethod
    def indicator(cls, lo: float, hi: float, n: int, phases=None) -> "TestFunction":
        phases = range(n) if phases is None else phases
        return cls(tuple((IndicatorTerm(1.0, lo, hi),) if i in phases else () for i in range(n)))


def _int_poly_exp(k: int, delta: float, x: float) -> float:
    """``int_0^x s^k exp(-delta s) ds``."""
    if x <= 0:
        return 0.0
    z = delta * x
    if k == 0:
        return x if abs(z) < 1e-12 else -math.expm1(-z) / delta
    if z > 1.0:
        return math.gamma(k + 1) * special.gammainc(k + 1, z) / delta ** (k + 1)
    return x ** (k + 1) / (k + 1) * special.hyp1f1(k + 1, k + 2, -z)


def _q_lambda_term(term, x: float, lam: float) -> float:
    if x <= 0:
        return 0.0
    if isinstance(term, ExpPolyTerm):
        if term.power == 0:
            # (exp(-lam x) - exp(-rate x)) / (rate - lam), continuous at rate = lam
            return term.coef * math.exp(-lam * x) * _int_poly_exp(0, term.rate - lam, x)
        return term.coef * math.exp(-lam * x) * _int_poly_exp(term.power, term.rate - lam, x)
    a, b = max(term.lo, 0.0), min(term.hi, x)
    if b <= a:
        return 0.0
    return term.coef * (math.exp(-lam * (x - b)) - math.exp(-lam * (x - a))) / lam


def q_lambda(f, x: float, i: int, lam: float, tol: float = IDENTITY_TOL) -> float:
    """``int_0^x exp(-lam t) f(x - t, i) dt``; closed form for :class:`TestFunction`."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if x <= 0:
        return 0.0
    if isinstance(f, TestFunction):
        return float(sum(_q_lambda_term(t, x, lam) for t in f.terms[i]))
    val, err = integrate.quad(lambda t: math.exp(-lam * t) * f(x - t, i), 0.0, x, epsabs=tol, epsrel=1e-12,
                              limit=400, full_output=False)[:2]
    if not err <= max(10 * tol, 1e-8 * abs(val)):
        raise AnalyticsError(f"quadrature did not converge (error estimate {err:.3g})")
    return float(val)


def _expect_q_lambda(law: JumpLaw, f, j: int, lam: float) -> float:
    """``E[Q_lam f(Y, j)]`` for ``Y ~ law`` (a law on ``[0, inf)``)."""
    if isinstance(f, TestFunction) and all(isinstance(t, ExpPolyTerm) and t.power == 0 for t in f.terms[j]):
        total = 0.0
        Lam = float(np.real(law.laplace(lam)))
        for t in f.terms[j]:
            if abs(t.rate - lam) < 1e-12:
                total += t.coef * float(np.real(law.mgf_deriv(-lam)))
            else:
                total += t.coef * (Lam - float(np.real(law.laplace(t.rate)))) / (t.rate - lam)
        return total
    return law._integrate_against(lambda y: q_lambda(f, float(y), j, lam)) / law.total_mass


def resolvent_source(ladder: LadderSpec, f, lam: float) -> np.ndarray:
    """``psi_i = d_i f(0, i) + int Q_lam f(., i) dPi_i + sum_j q_ij E[Q_lam f(Delta_ij, j)]``."""
    n = ladder.n
    Q = np.asarray(ladder.Q)
    psi = np.zeros(n)
    for i in range(n):
        v = ladder.drifts[i] * float(f(0.0, i)) if ladder.drifts[i] > 0 else 0.0
        jp = ladder.jumps[i]
        if jp is not None:
            v += jp.rate * _expect_q_lambda(jp.law, f, i, lam)
        for j in range(n):
            if j == i or Q[i, j] <= 0:
                continue
            law = ladder.F[i][j]
            v += Q[i, j] * (_expect_q_lambda(law, f, j, lam) if law is not None else 0.0)
        psi[i] = v
    return psi


def resolvent_vector(ladder: LadderSpec, f, lam: float) -> np.ndarray:
    """``Phi(lam)^{-1} psi(f, lam)``: the resolvent ``U_lam f(0, .)`` from height 0."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if not q_matrix_irreducible(ladder.Q):
        raise AnalyticsError("ladder exponent is singular: modulator is reducible")
    Phi = ladder_laplace_exponent(ladder, lam).value
    try:
        return np.linalg.solve(Phi, resolvent_source(ladder, f, lam))
    except np.linalg.LinAlgError as exc:
        raise AnalyticsError("ladder exponent is singular") from exc


def resolvent(ladder: LadderSpec, f, x: float, i: int, lam: float) -> float:
    """``U_lam f(x, i) = Q_lam f(x, i) + exp(-lam x) [Phi(lam)^{-1} psi(f, lam)]_i``."""
    return q_lambda(f, x, i, lam) + math.exp(-lam * x) * float(resolvent_vector(ladder, f, lam)[i])


# --------------------------------------------------------------------------
# invariant and stationary laws of the overshoot process
# --------------------------------------------------------------------------


def _law_mean_or_inf(law: JumpLaw | None) -> float:
    if law is None:
        return 0.0
    m = law.mean()
    return m if math.isfinite(m) else INF


def ladder_height_mean(ladder: LadderSpec, pi=None) -> float:
    """``E^{0,pi}[H_1]`` of the unkilled ladder under its stationary modulator."""
    pi = stationary_of_Q(ladder.Q) if pi is None else np.asarray(pi)
    Q = np.asarray(ladder.Q)
    total = 0.0
    for i in range(ladder.n):
        row = ladder.drifts[i]
        jp = ladder.jumps[i]
        if jp is not None:
            row += jp.rate * _law_mean_or_inf(jp.law)
        for j in range(ladder.n):
            if j != i and Q[i, j] > 0:
                row += Q[i, j] * _law_mean_or_inf(ladder.F[i][j])
        total += pi[i] * row
    return total


@dataclass
class OvershootLawEval:
    """Atom at 0 and density per phase of an overshoot law (or invariant measure).

    ``density[i, k]`` is the density at ``grid[k]`` in phase ``i``;
    ``total`` is the total mass (1 for a probability law).
    """

    atoms: np.ndarray
    grid: np.ndarray
    density: np.ndarray
    total: float
    density_fn: Callable = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return len(self.atoms)

    def bin_masses(self, edges) -> np.ndarray:
        """Mass of each ``[edges[k], edges[k+1])`` per phase, excluding the atom at 0."""
        edges = np.asarray(edges, dtype=float)
        out = np.zeros((self.n, len(edges) - 1))
        for i in range(self.n):
            for k in range(len(edges) - 1):
                out[i, k] = integrate.quad(lambda y: self.density_fn(y, i), edges[k], edges[k + 1], epsabs=1e-13,
                                           epsrel=1e-11, limit=200)[0]
        return out

    def continuous_mass(self, i: int) -> float:
        return integrate.quad(lambda y: self.density_fn(y, i), 0.0, math.inf, epsabs=1e-13, epsrel=1e-11,
                              limit=400)[0]

    def to_rows(self, edges) -> list[tuple]:
        """(phase, bin lo, bin hi, mass) rows; the atom at 0 is its own row with lo = hi = 0."""
        masses = self.bin_masses(edges)
        rows = []
        for i in range(self.n):
            rows.append((i, 0.0, 0.0, float(self.atoms[i])))
            for k in range(len(edges) - 1):
                rows.append((i, float(edges[k]), float(edges[k + 1]), float(masses[i, k])))
        return rows


def _invariant_density_fn(ladder: LadderSpec, pi, scale=1.0):
    Q = np.asarray(ladder.Q)
    n = ladder.n

    def dens(y, i):
        v = 0.0
        jp = ladder.jumps[i]
        if jp is not None:
            v += pi[i] * jp.rate * float(jp.law.tail(y))
        for j in range(n):
            if j != i and Q[j, i] > 0 and ladder.F[j][i] is not None:
                v += pi[j] * Q[j, i] * float(ladder.F[j][i].tail(y))
        return v * scale

    return dens


def invariant_measure(ladder: LadderSpec, pi=None, grid=None) -> OvershootLawEval:
    """Unnormalized invariant measure of the overshoot process.

    Atom ``pi_i d_i`` at 0 and density
    ``pi_i Pibar_i(y) + sum_j pi_j q_ji Fbar_ji(y)`` in phase ``i``; the total
    mass is the mean ladder height per unit local time under ``pi``.
    """
    pi = stationary_of_Q(ladder.Q) if pi is None else np.asarray(pi, dtype=float)
    grid = np.linspace(0.0, 10.0, 201) if grid is None else np.asarray(grid, dtype=float)
    fn = _invariant_density_fn(ladder, pi)
    dens = np.array([[fn(y, i) for y in grid] for i in range(ladder.n)])
    atoms = pi * np.asarray(ladder.drifts)
    return OvershootLawEval(atoms, grid, dens, ladder_height_mean(ladder, pi), fn)


def stationary_distribution(ladder: LadderSpec, grid=None) -> OvershootLawEval:
    """Invariant measure normalized by the mean ladder height; fails when that mean is infinite."""
    pi = stationary_of_Q(ladder.Q)
    mass = ladder_height_mean(ladder, pi)
    if not math.isfinite(mass):
        raise AnalyticsError("no stationary distribution: the mean ladder height is infinite")
    chi = invariant_measure(ladder, pi, grid)
    fn = _invariant_density_fn(ladder, pi, 1.0 / mass)
    rho = OvershootLawEval(chi.atoms / mass, chi.grid, chi.density / mass, 1.0, fn)
    total = rho.atoms.sum() + sum(rho.continuous_mass(i) for i in range(rho.n))
    if abs(total - 1.0) > 1e-8:
        raise AnalyticsError(f"stationary law does not normalize (total {total:.12g})")
    return rho


# --------------------------------------------------------------------------
# overshoot marginal by convolution with the potential measure
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OvershootMarginal:
    """Sub-probability law of ``(O_t, J_t)``: atom at 0 per phase and bin masses on ``edges``."""

    atoms: np.ndarray
    edges: np.ndarray
    masses: np.ndarray

    @property
    def total(self) -> float:
        return float(self.atoms.sum() + self.masses.sum())

    def probability_vector(self) -> np.ndarray:
        """Flattened (atom, bins) per phase, for distance computations."""
        return np.concatenate([np.concatenate(([a], m)) for a, m in zip(self.atoms, self.masses)])


def overshoot_marginal(ladder: LadderSpec, potential, x: float, i: int, t: float, edges) -> OvershootMarginal:
    """Law of the overshoot over level ``t`` from height ``x`` in phase ``i``.

    ``potential`` holds the potential measure of the ladder on cells
    (``edges`` and ``mean[start, cell, phase]`` as in
    :class:`mapfluct.simulator.PotentialEstimate`) and must cover
    ``[0, t - x]``. Each cell is treated as uniformly occupied; the jump
    parts are integrated exactly against the tails of the jump laws and the
    creeping atom uses the local potential density.
    """
    edges = np.asarray(edges, dtype=float)
    n = ladder.n
    if x >= t:
        atoms = np.zeros(n)
        masses = np.zeros((n, len(edges) - 1))
        y = x - t
        if y == 0:
            atoms[i] = 1.0
        else:
            k = np.searchsorted(edges, y, side="right") - 1
            if 0 <= k < len(edges) - 1:
                masses[i, k] = 1.0
        return OvershootMarginal(atoms, edges, masses)
    s = t - x
    pe = np.asarray(potential.edges, dtype=float)
    U = np.asarray(potential.mean)[i]
    if pe[0] > 0 or pe[-1] < s:
        raise AnalyticsError(f"potential estimate must cover [0, {s}]")
    Q = np.asarray(ladder.Q)
    nodes, weights = np.polynomial.legendre.leggauss(6)
    masses = np.zeros((n, len(edges) - 1))
    atoms = np.zeros(n)
    for cell in range(len(pe) - 1):
        lo, hi = pe[cell], min(pe[cell + 1], s)
        if hi <= lo:
            break
        frac = (hi - lo) / (pe[cell + 1] - pe[cell])
        us = 0.5 * (lo + hi) + 0.5 * (hi - lo) * nodes
        ws = 0.5 * weights
        for k in range(n):
            mass_k = U[cell, k] * frac
            if mass_k == 0:
                continue
            for j in range(n):
                laws = []
                if j == k and ladder.jumps[k] is not None:
                    laws.append((ladder.jumps[k].rate, ladder.jumps[k].law))
                if j != k and Q[k, j] > 0 and ladder.F[k][j] is not None:
                    laws.append((Q[k, j], ladder.F[k][j]))
                for rate, law in laws:
                    for u, w in zip(us, ws):
                        gap = s - u
                        tails = np.asarray(law.tail(gap + edges), dtype=float)
                        masses[j] += mass_k * w * rate * (tails[:-1] - tails[1:])
    # creeping: d_j times the potential density of phase j at level s
    cell = min(np.searchsorted(pe, s, side="right") - 1, len(pe) - 2)
    width = pe[cell + 1] - pe[cell]
    for j in range(n):
        atoms[j] = ladder.drifts[j] * U[cell, j] / width
    return OvershootMarginal(atoms, edges, masses)


# --------------------------------------------------------------------------
# Lyapunov drift bounds
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LyapunovReport:
    kind: str
    lam: float
    beta0: float
    b: float
    holds: bool
    max_excess: float
    grid: np.ndarray
    petite_radius: float = math.nan
    petite_constant: float = math.nan


def _check_moments(ladder: LadderSpec, lam: float, kind: str):
    Q = np.asarray(ladder.Q)
    laws = [(f"jumps of phase {i}", j.law) for i, j in enumerate(ladder.jumps) if j is not None]
    laws += [(f"transitional jump {i}->{j}", ladder.F[i][j]) for i in range(ladder.n) for j in range(ladder.n)
             if i != j and Q[i, j] > 0 and ladder.F[i][j] is not None]
    for name, law in laws:
        m = law.exponential_moment(lam, 1.0) if kind == "exponential" else law.power_moment(lam, 1.0)
        if not m.finite:
            raise AnalyticsError(f"{name} lacks the required {kind} moment of order {lam}")


def _exp_v_q_lambda(lam):
    # lam Q_lam V for V = exp(lam y): (exp(lam y) - exp(-lam y)) / 2
    return lambda y: float(np.sinh(lam * y)) / lam


def _hybrid_v(lam):
    return lambda y: math.exp(lam * y) if y < 1 else y ** lam


def _hybrid_q_lambda(lam):
    # Q_lam of the hybrid function: exponential piece in closed form, power piece by quadrature
    def q(y):
        if y <= 0:
            return 0.0
        if y < 1:
            return math.exp(-lam * y) * math.expm1(2 * lam * y) / (2 * lam)
        head = math.exp(-lam * y) * math.expm1(2 * lam) / (2 * lam)
        body = integrate.quad(lambda s: math.exp(-lam * (y - s)) * s ** lam, 1.0, y, epsabs=1e-12, epsrel=1e-12,
                              limit=200)[0]
        return head + body

    return q


def lyapunov_drift_report(ladder: LadderSpec, lam: float, kind: str = "exponential", grid=None,
                          tol: float = 1e-8) -> LyapunovReport:
    """Resolvent drift inequality for ``V(x) = exp(lam x)`` or the hybrid ``exp / power`` function.

    Exponential case: ``lam U_lam V <= V / 2 + b`` with
    ``b = lam ||Phi(lam)^{-1}||_inf sum_i psi_i(V, lam)``; checked on ``grid``.
    Hybrid case (``lam > 1``): ``V(x) = exp(lam x)`` on ``[0, 1)`` and ``x^lam``
    beyond; ``b`` is built the same way and the inequality
    ``lam U_lam V <= V - V^(1 - 1/lam) / 2 + c 1_[0, x*]`` is checked with the
    smallest grid radius ``x*`` and constant ``c`` that make it hold.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    grid = np.linspace(0.0, 20.0, 401) if grid is None else np.asarray(grid, dtype=float)
    n = ladder.n
    Phi = ladder_laplace_exponent(ladder, lam).value
    inv_norm = float(np.max(np.abs(np.linalg.inv(Phi)).sum(axis=1)))
    if kind == "exponential":
        _check_moments(ladder, lam, "exponential")
        qv = _exp_v_q_lambda(lam)
        f = lambda y, j: math.exp(lam * y)  # noqa: E731
    elif kind == "hybrid":
        if lam <= 1:
            raise ValueError("the hybrid Lyapunov function needs lambda > 1")
        _check_moments(ladder, lam, "power")
        V = _hybrid_v(lam)
        f = lambda y, j: V(y)  # noqa: E731
        hq = _hybrid_q_lambda(lam)
        qv = hq
    else:
        raise ValueError(f"unknown Lyapunov kind {kind!r}")

    def q_of(y, j):
        return qv(y)

    Q = np.asarray(ladder.Q)
    psi = np.zeros(n)
    for i in range(n):
        v = ladder.drifts[i] * f(0.0, i)
        jp = ladder.jumps[i]
        if jp is not None:
            v += jp.rate * jp.law._integrate_against(lambda y: q_of(float(y), i))
        for j in range(n):
            if j != i and Q[i, j] > 0 and ladder.F[i][j] is not None:
                v += Q[i, j] * ladder.F[i][j]._integrate_against(lambda y: q_of(float(y), j))
        psi[i] = v
    b = lam * inv_norm * float(psi.sum())
    vec = np.linalg.solve(Phi, psi)
    excess = np.empty((n, len(grid)))
    for i in range(n):
        for k, x in enumerate(grid):
            r = lam * (q_of(x, i) + math.exp(-lam * x) * vec[i])
            if kind == "exponential":
                excess[i, k] = r - (0.5 * math.exp(lam * x) + b)
            else:
                Vx = f(x, i)
                excess[i, k] = r - (Vx - 0.5 * Vx ** (1 - 1 / lam))
    if kind == "exponential":
        mx = float(excess.max())
        return LyapunovReport(kind, lam, 0.5, b, mx <= tol, mx, grid)
    worst = excess.max(axis=0)
    bad = np.nonzero(worst > tol)[0]
    radius = float(grid[bad[-1]]) if len(bad) else 0.0
    const = float(max(worst.max(), 0.0))
    return LyapunovReport(kind, lam, math.nan, b, bool(len(bad) == 0 or bad[-1] < len(grid) - 1), float(worst.max()),
                          grid, radius, const)


def subgeometric_rate(lam: float, t):
    """``Xi(t) = 2 (1 + t / (2 lam))^(1 - lam)`` for ``lam > 1``."""
    if lam <= 1:
        raise ValueError("lambda must exceed 1")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    out = 2.0 * (1.0 + t / (2.0 * lam)) ** (1.0 - lam)
    return float(out) if out.ndim == 0 else out
