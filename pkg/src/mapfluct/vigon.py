"""Inverse friendly equations linking the parent Lévy system to the ladder Lévy system.

The ladder jump intensities of a MAP are convolutions of the parent jump
measures with the potential measures of the dual ladder process. Both sides
are estimated here by simulation and compared bin by bin, after fitting one
positive scale per phase for the free normalization of local time.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import kernels
from .analytics import char_matrix_exponent, drift_dichotomy
from .laws import JumpLaw
from .model import (CompoundPoisson, LadderSpec, LevyComponentSpec, MapSpec, dualize, require_valid,
                    stationary_of_Q)
from .rng import as_generator
from .simulator import PotentialEstimate, SimulationError, estimate_ladder_spec, map_arrays

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(4)


# --------------------------------------------------------------------------
# right-hand side
# --------------------------------------------------------------------------


def _shift_masses(law: JumpLaw, factor: float, lo: float, hi: float):
    """Vectorized ``y -> factor * law((y + lo, y + hi])``."""
    return lambda y: factor * (np.asarray(law.tail(y + lo), dtype=float) - np.asarray(law.tail(y + hi), dtype=float))


def _component_law(component: LevyComponentSpec):
    """(rate, law) of a compound Poisson component, ``None`` without jumps."""
    j = component.jumps
    if j is None:
        return None
    if not isinstance(j, CompoundPoisson):
        raise TypeError("the convolution side needs compound Poisson components")
    return j.rate, j.law


def _cell_averages(fn, cells: np.ndarray) -> np.ndarray:
    """Average of ``fn`` over each cell ``[cells[c], cells[c+1])`` by a 4-point Gauss rule."""
    mid = 0.5 * (cells[1:] + cells[:-1])
    half = 0.5 * (cells[1:] - cells[:-1])
    ys = mid[:, None] + half[:, None] * _NODES[None, :]
    return 0.5 * (fn(ys.ravel()).reshape(ys.shape) @ _WEIGHTS)


def vigon_weights(spec: MapSpec, i: int, j: int, lo: float, hi: float, cell_edges) -> np.ndarray:
    """Weights ``W[k, cell]`` with ``RHS = sum_k sum_cell W[k, cell] Uhat_{k,i}(cell)``.

    ``i == j`` gives the ladder jump mass of phase ``i`` on ``(lo, hi]``;
    ``i != j`` gives the transitional ladder mass ``q+_ij F+_ij((lo, hi])``.
    """
    n = spec.n
    Q = np.asarray(spec.Q)
    pi = stationary_of_Q(Q)
    cells = np.asarray(cell_edges, dtype=float)
    W = np.zeros((n, len(cells) - 1))
    # (start phase of the dual potential, shifted mass function)
    target = i if i == j else j
    terms = []
    rl = _component_law(spec.components[target])
    if rl is not None:
        terms.append((target, _shift_masses(rl[1], rl[0] * pi[target] / pi[i], lo, hi)))
    for k in range(n):
        if k != target and Q[k, target] > 0 and spec.F[k][target] is not None:
            terms.append((k, _shift_masses(spec.F[k][target], pi[k] / pi[i] * Q[k, target], lo, hi)))
    for k, fn in terms:
        W[k] += _cell_averages(fn, cells)
    return W


def vigon_rhs(spec: MapSpec, dual_potential: PotentialEstimate, i: int, j: int, lo: float, hi: float) -> float:
    """Convolution side of the ladder Lévy system on the bin ``(lo, hi]``."""
    W = vigon_weights(spec, i, j, lo, hi, dual_potential.edges)
    U = np.asarray(dual_potential.mean)[:, :, i]  # (start, cell)
    if U.shape[0] != spec.n:
        raise ValueError("dual potential must be estimated from every start phase")
    cover = dual_potential.edges[-1]
    if cover < 1.0 and np.any(W[:, -1] > 0):
        raise ValueError("insufficient dual potential coverage")
    return float(np.sum(W * U))


def vigon_rhs_dual(spec: MapSpec, potential: PotentialEstimate, i: int, j: int, lo: float, hi: float) -> float:
    """Dual-direction identities: the dual ladder's jump masses from the parent's ascending ladder potential.

    They are the direct identities applied to the dual MAP, whose dual is the
    parent again, so ``potential`` holds ``U+_{k,i}`` of the parent ladder.
    """
    return vigon_rhs(dualize(spec), potential, i, j, lo, hi)


def _rhs_with_se(spec, dual_potential, i, j, lo, hi) -> tuple[float, float]:
    W = vigon_weights(spec, i, j, lo, hi, dual_potential.edges)
    val, var = 0.0, 0.0
    for k in range(spec.n):
        per = dual_potential.per_path[k][:, :, i] @ W[k]
        val += per.mean()
        var += per.var(ddof=1) / len(per)
    return float(val), math.sqrt(var)


def classical_vigon_rhs(component: LevyComponentSpec, potential_edges, potential_mass, lo: float, hi: float) -> float:
    """One-phase identity ``Pi+((lo, hi]) = int Pi((y + lo, y + hi]) Uhat(dy)`` on potential cells."""
    edges = np.asarray(potential_edges, dtype=float)
    mass = np.asarray(potential_mass, dtype=float)
    rl = _component_law(component)
    if rl is None:
        return 0.0
    rate, law = rl
    total = 0.0
    for c in range(len(edges) - 1):
        a, b = edges[c], edges[c + 1]
        ys = 0.5 * (a + b) + 0.5 * (b - a) * _NODES
        vals = [rate * (float(law.tail(y + lo)) - float(law.tail(y + hi))) for y in ys]
        total += mass[c] * 0.5 * float(np.dot(_WEIGHTS, vals))
    return float(total)


# --------------------------------------------------------------------------
# dual potentials by ladder epochs
# --------------------------------------------------------------------------


def estimate_dual_potential(spec: MapSpec, cell_edges, n_paths: int, rng, max_epochs: int = 10_000,
                            gap_cap: float = 40.0, max_horizon: float = 1e6, n_batches: int = 50) -> PotentialEstimate:
    """Potential measures of the ascending ladder of the dual MAP, one run per start phase.

    The dual must be unable to creep upward (every parent drift nonnegative);
    local time then counts ladder epochs, so ``Uhat_{k,i}(cell)`` is the
    expected number of epochs spent in phase ``i`` with the dual maximum in
    the cell. A path is stopped (killed) once it falls ``gap_cap`` below its
    maximum. Replicates are ``n_batches`` batch means, which keeps memory
    independent of ``n_paths``.
    """
    require_valid(spec)
    dual = dualize(spec)
    if any(c.drift > 0 for c in dual.components):
        raise SimulationError("dual ladder creeps upward; epoch counting does not apply")
    arr = map_arrays(dual)
    rng = as_generator(rng)
    edges = np.asarray(cell_edges, dtype=float)
    n_batches = max(2, min(int(n_batches), int(n_paths)))
    size = int(n_paths) // n_batches
    per = []
    for k in range(spec.n):
        rows, bad = [], 0
        for _ in range(n_batches):
            out = kernels.map_ladder_epochs(size, k, int(max_epochs), float(max_horizon), float(gap_cap),
                                            float(edges[-1]), arr.drift, *arr.dynamics(), *arr.table,
                                            np.array([0.0, 1.0]), edges, rng)
            occ, reason = out[5], out[6]
            bad += int(np.sum((reason == 1) | (reason == 4)))
            rows.append(occ.mean(axis=0))
        if bad:
            warnings.warn(f"{bad} dual ladder paths stopped before killing or leaving the grid")
        per.append(np.array(rows))
    means = np.array([r.mean(axis=0) for r in per])
    ses = np.array([r.std(axis=0, ddof=1) / math.sqrt(len(r)) for r in per])
    return PotentialEstimate(edges, means, ses, per)


# --------------------------------------------------------------------------
# full check
# --------------------------------------------------------------------------


@dataclass
class VigonRow:
    i: int
    j: int
    lo: float
    hi: float
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    scaled_rhs: float = math.nan
    residual: float = math.nan

    @property
    def usable(self) -> bool:
        return self.lhs > 3 * self.lhs_se and self.rhs > 3 * self.rhs_se


@dataclass
class VigonReport:
    """Both sides per (i, j, bin), fitted scales per phase and relative residuals."""

    rows: list[VigonRow]
    scales: np.ndarray
    fit_range: tuple[float, float]
    ladder_estimate: object = field(default=None, repr=False)
    dual_potential: object = field(default=None, repr=False)

    def in_range(self, row: VigonRow) -> bool:
        return self.fit_range[0] <= row.lo and row.hi <= self.fit_range[1]

    def ratios(self, diagonal_only: bool = False) -> np.ndarray:
        """``LHS / (scale * RHS)`` on usable bins inside the fit range."""
        return np.array([r.lhs / r.scaled_rhs for r in self.rows
                         if r.usable and self.in_range(r) and (r.i == r.j or not diagonal_only)])

    def to_rows(self) -> list[tuple]:
        return [(r.i, r.j, r.lo, r.hi, r.lhs, r.scaled_rhs, r.residual, r.lhs_se) for r in self.rows]


def fit_phase_scales(rows: list[VigonRow], n: int, fit_range) -> np.ndarray:
    """One positive scale per phase: inverse-variance weighted mean of ``log(LHS / RHS)``."""
    scales = np.ones(n)
    for i in range(n):
        num = den = 0.0
        for r in rows:
            if r.i != i or not r.usable or not (fit_range[0] <= r.lo and r.hi <= fit_range[1]):
                continue
            var = (r.lhs_se / r.lhs) ** 2 + (r.rhs_se / r.rhs) ** 2
            num += math.log(r.lhs / r.rhs) / var
            den += 1.0 / var
        if den > 0:
            scales[i] = math.exp(num / den)
    return scales


def vigon_check(spec: MapSpec, n_paths: int, rng, edges=None, potential_edges=None, local_time: float = 20.0,
                fit_range=(0.2, 2.0), gap_cap: float = 40.0, dual_paths: int | None = None) -> VigonReport:
    """Estimate both sides of the ladder Lévy system identities and compare them.

    The parent must lie in the creeping class (positive drifts, compound
    Poisson jumps) and drift to ``+inf``, so that the dual ladder is killed
    and its potential measure is finite.
    """
    require_valid(spec)
    if drift_dichotomy(spec).verdict != "Transient":
        raise ValueError("the check needs a parent drifting to +inf")
    rng = as_generator(rng)
    edges = np.linspace(0.0, 4.0, 41) if edges is None else np.asarray(edges, dtype=float)
    potential_edges = np.arange(0.0, 30.0 + 1e-9, 0.01) if potential_edges is None else potential_edges
    est = estimate_ladder_spec(spec, n_paths, rng, edges=edges, local_time=local_time)
    dual = estimate_dual_potential(spec, potential_edges, dual_paths or n_paths, rng, gap_cap=gap_cap)
    n = spec.n
    rows = []
    for i in range(n):
        for j in range(n):
            lhs, lse = est.jump_bin_intensity(i) if i == j else est.transition_bin_intensity(i, j)
            for b in range(len(edges) - 1):
                rhs, rse = _rhs_with_se(spec, dual, i, j, edges[b], edges[b + 1])
                rows.append(VigonRow(i, j, float(edges[b]), float(edges[b + 1]), float(lhs[b]), float(lse[b]), rhs, rse))
    scales = fit_phase_scales(rows, n, fit_range)
    for r in rows:
        r.scaled_rhs = scales[r.i] * r.rhs
        if r.usable:
            r.residual = r.lhs / r.scaled_rhs - 1.0
    return VigonReport(rows, scales, tuple(fit_range), est, dual)


# --------------------------------------------------------------------------
# analytic transfer of moments and densities
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TransferVerdict:
    phase: int
    holds: bool
    offending: tuple[str, ...]


def moment_transfer_check(spec: MapSpec, lam: float, mode: str = "exponential") -> list[TransferVerdict]:
    """Finiteness of the parent tail moments that carry over to the ladder jumps of each phase.

    Phase ``i`` needs ``int_1^inf g(x) Pi_i(dx)`` and every
    ``q_ki int_1^inf g(x) F_ki(dx)`` finite, with ``g(x) = exp(lam x)``
    (``mode='exponential'``) or ``x^lam`` (``mode='polynomial'``, parent
    drifting to ``+inf``).
    """
    if mode not in ("exponential", "polynomial"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "polynomial" and drift_dichotomy(spec).verdict != "Transient":
        raise ValueError("polynomial transfer needs a parent drifting to +inf")
    Q = np.asarray(spec.Q)
    out = []
    for i, comp in enumerate(spec.components):
        bad = []
        m = comp.jump_exponential_moment(lam, 1.0) if mode == "exponential" else comp.jump_power_moment(lam, 1.0)
        if not m.finite:
            bad.append(f"jumps of phase {i} ({_describe(comp.jumps)})")
        for k in range(spec.n):
            law = spec.F[k][i]
            if k == i or law is None or Q[k, i] <= 0:
                continue
            mm = law.exponential_moment(lam, 1.0) if mode == "exponential" else law.power_moment(lam, 1.0)
            if not mm.finite:
                bad.append(f"transitional jump {k}->{i} ({type(law).__name__})")
        out.append(TransferVerdict(i, not bad, tuple(bad)))
    return out


def _describe(jumps) -> str:
    if isinstance(jumps, CompoundPoisson):
        return type(jumps.law).__name__
    return type(jumps).__name__


@dataclass(frozen=True)
class AperiodicityCertificate:
    """Which aperiodicity routes the parent spec certifies for the overshoot process."""

    creeping_phases: tuple[int, ...]
    phase_intervals: dict
    pair_intervals: dict

    @property
    def routes(self) -> tuple[str, ...]:
        out = []
        if self.creeping_phases:
            out.append("creeping")
        if any(self.phase_intervals.values()) or any(self.pair_intervals.values()):
            out.append("density")
        return tuple(out)


def _positive_density_intervals(law: JumpLaw | None):
    if law is None:
        return []
    return [(max(a, 0.0), b) for a, b in law.density_intervals() if b > 0 and b > max(a, 0.0)]


def absolute_continuity_transfer(spec: MapSpec) -> AperiodicityCertificate:
    """Intervals of ``(0, inf)`` on which the parent jump laws have densities (inherited by the ladder)."""
    creeping = tuple(i for i, c in enumerate(spec.components)
                     if c.gaussian > 0 or (c.finite_activity and c.drift > 0)
                     or (c.jumps is not None and not c.finite_activity and c.unbounded_variation))
    phase_iv = {}
    for i, c in enumerate(spec.components):
        j = c.jumps
        law = j.law if isinstance(j, CompoundPoisson) else (getattr(j, "law", None))
        if j is not None and law is None:
            phase_iv[i] = [(0.0, math.inf)] if c.positive_jump_support() else []
        else:
            phase_iv[i] = _positive_density_intervals(law)
    Q = np.asarray(spec.Q)
    pair_iv = {}
    for k in range(spec.n):
        for i in range(spec.n):
            if k != i and Q[k, i] > 0:
                pair_iv[(k, i)] = _positive_density_intervals(spec.F[k][i])
    return AperiodicityCertificate(creeping, phase_iv, pair_iv)


# --------------------------------------------------------------------------
# Wiener–Hopf residual
# --------------------------------------------------------------------------


def ladder_exponent_complex(ladder: LadderSpec, z: complex) -> np.ndarray:
    """Ladder exponent at complex argument: ``diag(k + d z + c (1 - E e^{-zY})) - Q * G(z)``."""
    n = ladder.n
    Q = np.asarray(ladder.Q)
    M = np.zeros((n, n), dtype=complex)
    for i in range(n):
        v = ladder.killing[i] + ladder.drifts[i] * z
        jp = ladder.jumps[i]
        if jp is not None:
            v += jp.rate * (1.0 - complex(jp.law.mgf(-z)))
        M[i, i] = v - Q[i, i]
        for j in range(n):
            if j != i:
                g = 1.0 if ladder.F[i][j] is None else complex(ladder.F[i][j].mgf(-z))
                M[i, j] = -Q[i, j] * g
    return M


@dataclass(frozen=True)
class WienerHopfReport:
    thetas: np.ndarray
    scales: np.ndarray
    max_residual: float
    residuals: np.ndarray  # (theta, n, n)
    target: np.ndarray
    product: np.ndarray


def wiener_hopf_product(spec: MapSpec, ladder: LadderSpec, dual_ladder: LadderSpec, thetas):
    """Target ``-Psi(theta)`` and the factors ``A = Dpi^-1 Phihat(i theta)^T Dpi``, ``B = Phi(-i theta)``."""
    pi = stationary_of_Q(spec.Q)
    Dp, Dpi_inv = np.diag(pi), np.diag(1.0 / pi)
    tgt, A, B = [], [], []
    for th in thetas:
        tgt.append(-char_matrix_exponent(spec, th).value)
        A.append(Dpi_inv @ ladder_exponent_complex(dual_ladder, 1j * th).T @ Dp)
        B.append(ladder_exponent_complex(ladder, -1j * th))
    return np.array(tgt), np.array(A), np.array(B)


def wiener_hopf_residual(spec: MapSpec, ladder: LadderSpec, dual_ladder: LadderSpec, thetas) -> WienerHopfReport:
    """Residual of ``-Psi = Dpi^-1 Phihat^T Dpi D Phi`` with a fitted positive diagonal ``D``.

    ``D`` collects the per-phase scalings of local time of both ladders; it
    is fitted by nonnegative least squares over the grid and all entries.
    """
    thetas = np.asarray(thetas, dtype=float)
    tgt, A, B = wiener_hopf_product(spec, ladder, dual_ladder, thetas)
    n = spec.n
    # entry (r, c) is linear in D: sum_k A[r, k] B[k, c] D_k
    cols = np.einsum("trk,tkc->trck", A, B).reshape(-1, n)
    lhs = np.concatenate([cols.real, cols.imag])
    rhs = np.concatenate([tgt.reshape(-1).real, tgt.reshape(-1).imag])
    D, _ = optimize.nnls(lhs, rhs)
    prod = np.einsum("trk,k,tkc->trc", A, D, B)
    res = tgt - prod
    return WienerHopfReport(thetas, D, float(np.max(np.abs(res))), res, tgt, prod)


@dataclass(frozen=True)
class WienerHopfMonteCarlo:
    """Residual of the factorization with estimated ladders, against batch standard errors."""

    report: WienerHopfReport
    se: np.ndarray  # (theta, n, n), entrywise standard error of the estimated product

    @property
    def max_z(self) -> float:
        """Largest ``|residual| / SE`` over real and imaginary parts of all entries."""
        r, s = self.report.residuals, np.maximum(self.se, 1e-300)
        return float(max(np.max(np.abs(r.real) / s.real.clip(1e-300)), np.max(np.abs(r.imag) / s.imag.clip(1e-300))))


def wiener_hopf_mc_check(spec: MapSpec, n_paths: int, rng, thetas, n_batches: int = 10, edges=None,
                         local_time: float = 20.0, gap_cap: float = 40.0, max_epochs: int = 200,
                         max_horizon: float = 1e5) -> WienerHopfMonteCarlo:
    """Estimate both ladders of a parent drifting to ``+inf`` in batches and test the factorization.

    The ascending ladder comes from the parent (creeping class, time at the
    maximum as local time), the dual ladder from the dual MAP (ladder epochs).
    For an oscillating parent pass ``gap_cap=inf`` (the dual ladder is not
    killed) and bound the work with ``max_epochs`` and ``max_horizon``.
    Each batch gives independent estimates of both factors; the product
    ``A D B`` is averaged over batches and its spread gives the standard error
    (real and imaginary parts separately).
    """
    rng = as_generator(rng)
    edges = np.linspace(0.0, 8.0, 161) if edges is None else np.asarray(edges, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    dual = dualize(spec)
    size = max(1, int(n_paths) // int(n_batches))
    As, Bs = [], []
    for _ in range(int(n_batches)):
        up = estimate_ladder_spec(spec, size, rng, edges=edges, local_time=local_time, max_horizon=max_horizon).ladder
        dn = estimate_ladder_spec(dual, size, rng, edges=edges, gap_cap=gap_cap, max_epochs=max_epochs,
                                  max_horizon=max_horizon).ladder
        tgt, A, B = wiener_hopf_product(spec, up, dn, thetas)
        As.append(A)
        Bs.append(B)
    n = spec.n
    A_bar, B_bar = np.mean(As, axis=0), np.mean(Bs, axis=0)
    cols = np.einsum("trk,tkc->trck", A_bar, B_bar).reshape(-1, n)
    D, _ = optimize.nnls(np.concatenate([cols.real, cols.imag]),
                         np.concatenate([tgt.reshape(-1).real, tgt.reshape(-1).imag]))
    prods = np.array([np.einsum("trk,k,tkc->trc", A, D, B) for A, B in zip(As, Bs)])
    prod = prods.mean(axis=0)
    se = (prods.real.std(axis=0, ddof=1) + 1j * prods.imag.std(axis=0, ddof=1)) / math.sqrt(len(prods))
    res = tgt - prod
    rep = WienerHopfReport(thetas, D, float(np.max(np.abs(res))), res, tgt, prod)
    return WienerHopfMonteCarlo(rep, se)
