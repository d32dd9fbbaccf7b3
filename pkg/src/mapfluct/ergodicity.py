"""Empirical overshoot laws, total-variation distances, convergence-rate fits and β-mixing estimates."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .analytics import OvershootLawEval, stationary_distribution
from .lamperti import lamperti_stable_spec  # noqa: F401  (re-exported for the mixing experiments)
from .model import LadderSpec
from .rng import as_generator
from .simulator import run_ladder

N_BOOTSTRAP = 200


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Histogram of ``(O, J)`` samples with the atom at 0 kept apart from the first bin.

    ``zero_counts[i]`` counts samples equal to 0 in phase ``i``;
    ``counts[i, k]`` counts samples in ``(0, edges[k+1])`` ∩ ``[edges[k], edges[k+1])``.
    The last edge may be ``inf`` (overflow bin).
    """

    zero_counts: np.ndarray
    edges: np.ndarray
    counts: np.ndarray
    total: int

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        if e[0] != 0.0 or np.any(np.diff(e) <= 0):
            raise ValueError("edges must start at 0 and increase strictly")
        if int(np.sum(self.zero_counts) + np.sum(self.counts)) != int(self.total):
            raise ValueError("counts do not sum to the total")

    @property
    def n(self) -> int:
        return len(self.zero_counts)

    @classmethod
    def from_samples(cls, values, phases, n_phases: int, edges) -> "EmpiricalMeasure":
        values = np.asarray(values, dtype=float)
        phases = np.asarray(phases, dtype=int)
        if np.any(phases < 0) or np.any(phases >= n_phases):
            raise ValueError("samples must carry a live phase (killed paths are not part of a law)")
        if np.any(values < 0):
            raise ValueError("overshoots are nonnegative")
        edges = np.asarray(edges, dtype=float)
        zero = values == 0.0
        zc = np.bincount(phases[zero], minlength=n_phases)
        k = np.clip(np.searchsorted(edges, values[~zero], side="right") - 1, 0, len(edges) - 2)
        counts = np.zeros((n_phases, len(edges) - 1), dtype=np.int64)
        np.add.at(counts, (phases[~zero], k), 1)
        return cls(zc, edges, counts, len(values))

    def probabilities(self) -> np.ndarray:
        """Masses as ``(phase, 1 + bins)`` with the atom in column 0."""
        return np.column_stack([self.zero_counts, self.counts]) / float(self.total)


def law_probabilities(law: OvershootLawEval, edges) -> np.ndarray:
    """Masses of an analytic law on the empirical layout ``(phase, atom + bins)``; an infinite last edge takes the tail."""
    edges = np.asarray(edges, dtype=float)
    finite = edges if math.isfinite(edges[-1]) else edges[:-1]
    masses = law.bin_masses(finite)
    cols = [np.asarray(law.atoms, dtype=float)[:, None], masses]
    if not math.isfinite(edges[-1]):
        tail = np.array([law.continuous_mass(i) for i in range(law.n)]) - masses.sum(axis=1)
        cols.append(np.clip(tail, 0.0, None)[:, None])
    return np.concatenate(cols, axis=1)


def _coarsen(p: np.ndarray, edges: np.ndarray, common: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(edges, common)
    out = [p[:, :1]]
    for a, b in zip(idx[:-1], idx[1:]):
        out.append(p[:, 1 + a:1 + b].sum(axis=1, keepdims=True))
    return np.concatenate(out, axis=1)


def _as_layout(m, edges=None):
    if isinstance(m, EmpiricalMeasure):
        return m.probabilities(), np.asarray(m.edges, dtype=float)
    if isinstance(m, OvershootLawEval):
        if edges is None:
            raise ValueError("an analytic law needs a bin grid to be compared")
        return law_probabilities(m, edges), np.asarray(edges, dtype=float)
    raise TypeError(f"cannot compare {type(m).__name__}")


def tv_distance(a, b) -> float:
    """Total variation ``1/2 sum |mass difference|`` over atom and bins, per phase.

    Analytic laws are discretized on the other argument's grid; two
    empirical measures on different grids are coarsened to their common
    edges. Binning makes this a lower bound of the true distance.
    """
    ea = a.edges if isinstance(a, EmpiricalMeasure) else None
    eb = b.edges if isinstance(b, EmpiricalMeasure) else None
    pa, ga = _as_layout(a, eb)
    pb, gb = _as_layout(b, ea if ea is not None else eb)
    if pa.shape[0] != pb.shape[0]:
        raise ValueError("incompatible phases")
    if len(ga) != len(gb) or np.any(ga != gb):
        common = np.intersect1d(ga, gb)
        if common[0] != 0.0 or common[-1] != ga[-1] or common[-1] != gb[-1]:
            raise ValueError("grids share no common coarsening")
        pa, pb = _coarsen(pa, ga, common), _coarsen(pb, gb, common)
    return 0.5 * float(np.abs(pa - pb).sum())


def default_edges(rho: OvershootLawEval, n_bins: int = 200, tail_mass: float = 1e-4) -> np.ndarray:
    """``n_bins`` equal bins up to the ``1 - tail_mass`` quantile of ``rho`` plus an overflow bin."""
    cont = sum(rho.continuous_mass(i) for i in range(rho.n))
    hi = 1.0
    while sum(integrate.quad(lambda y, i=i: rho.density_fn(y, i), hi, math.inf, limit=200)[0]
              for i in range(rho.n)) > tail_mass * max(cont, 1e-300) and hi < 1e6:
        hi *= 1.5
    return np.concatenate([np.linspace(0.0, hi, n_bins + 1), [math.inf]])


# --------------------------------------------------------------------------
# convergence curves
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CurvePoint:
    t: float
    value: float
    se: float


def _bootstrap_tv_se(counts: np.ndarray, ref: np.ndarray, total: int, rng, n_boot: int) -> float:
    p = counts.ravel() / total
    boot = rng.multinomial(total, p, size=n_boot) / total
    tv = 0.5 * np.abs(boot - ref.ravel()[None, :]).sum(axis=1)
    return float(tv.std(ddof=1))


def tv_decay_curve(ladder: LadderSpec, start: tuple[float, int], t_grid, n_paths: int, rng, edges=None,
                   n_boot: int = N_BOOTSTRAP) -> list[CurvePoint]:
    """TV between the law of ``(O_t, J_t)`` from ``start = (x, i)`` and the stationary law, per ``t``.

    Standard errors come from a multinomial bootstrap of the binned counts.
    """
    rho = stationary_distribution(ladder)
    rng = as_generator(rng)
    edges = default_edges(rho) if edges is None else np.asarray(edges, dtype=float)
    ref = law_probabilities(rho, edges)
    t_grid = np.asarray(t_grid, dtype=float)
    order = np.argsort(t_grid)
    run = run_ladder(ladder, n_paths, rng, levels=t_grid[order], start_value=float(start[0]),
                     start_phase=int(start[1]))
    out = {}
    for col, k in enumerate(order):
        emp = EmpiricalMeasure.from_samples(run.overshoot[:, col], run.phase[:, col], ladder.n, edges)
        counts = np.column_stack([emp.zero_counts, emp.counts])
        tv = 0.5 * float(np.abs(counts / emp.total - ref).sum())
        out[k] = CurvePoint(float(t_grid[k]), tv, _bootstrap_tv_se(counts, ref, emp.total, rng, n_boot))
    return [out[k] for k in range(len(t_grid))]


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit of ``log TV`` against ``t`` (exponential) or ``log t`` (polynomial)."""

    model: str
    rate: float  # exponential: decay rate; polynomial: exponent of t
    intercept: float
    r_squared: float
    t_used: tuple[float, ...]


def fit_rate(curve, model: str = "exponential", min_points: int = 5) -> RateFit:
    """Fit a decay law to the points lying more than 3 standard errors above 0."""
    if model not in ("exponential", "polynomial"):
        raise ValueError(f"unknown model {model!r}")
    pts = [(p.t, p.value) for p in curve if p.value > 3 * p.se and p.value > 0 and (model == "exponential" or p.t > 0)]
    if len(pts) < min_points:
        raise ValueError(f"too few points above noise ({len(pts)} < {min_points})")
    t, v = np.array(pts).T
    x = t if model == "exponential" else np.log(t)
    y = np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    rate = -float(slope) if model == "exponential" else float(slope)
    return RateFit(model, rate, float(intercept), min(max(r2, 0.0), 1.0), tuple(float(s) for s in t))


# --------------------------------------------------------------------------
# beta mixing
# --------------------------------------------------------------------------


def sample_stationary(rho: OvershootLawEval, size: int, rng, grid_points: int = 4000) -> tuple[np.ndarray, np.ndarray]:
    """Exact-atom, inverse-CDF samples ``(values, phases)`` from a stationary law."""
    rng = as_generator(rng)
    n = rho.n
    cont = np.array([rho.continuous_mass(i) for i in range(n)])
    atoms = np.asarray(rho.atoms, dtype=float)
    w = np.concatenate([atoms, cont])
    w = w / w.sum()
    pick = rng.choice(2 * n, size=size, p=w)
    phases = pick % n
    values = np.zeros(size)
    hi = 1.0
    while any(integrate.quad(lambda y, i=i: rho.density_fn(y, i), hi, math.inf, limit=200)[0] > 1e-12 * max(c, 1e-300)
              for i, c in enumerate(cont)) and hi < 1e6:
        hi *= 1.5
    grid = np.linspace(0.0, hi, grid_points)
    for i in range(n):
        sel = pick == n + i
        if not np.any(sel):
            continue
        dens = np.array([rho.density_fn(y, i) for y in grid])
        cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
        cdf /= cdf[-1]
        values[sel] = np.interp(rng.random(int(sel.sum())), cdf, grid)
    return values, phases


def beta_mixing_stationary(ladder: LadderSpec, t_grid, n_starts: int, n_inner: int, rng,
                           edges=None) -> list[CurvePoint]:
    """``beta(rho, t) = E_rho[TV(P_t((x, i), .), rho)]`` by an outer average over stationary starts.

    Each start contributes the binned TV of ``n_inner`` paths to ``rho``. The
    inner estimate is biased upward by sampling noise (roughly
    ``sqrt(cells / n_inner)``), while too coarse bins merge a point-mass
    start with much of ``rho``; 100 bins balance the two.
    """
    rho = stationary_distribution(ladder)
    rng = as_generator(rng)
    edges = default_edges(rho, n_bins=100) if edges is None else np.asarray(edges, dtype=float)
    ref = law_probabilities(rho, edges)
    t_grid = np.asarray(t_grid, dtype=float)
    order = np.argsort(t_grid)
    xs, phs = sample_stationary(rho, n_starts, rng)
    tv = np.zeros((n_starts, len(t_grid)))
    for s in range(n_starts):
        run = run_ladder(ladder, n_inner, rng, levels=t_grid[order], start_value=float(xs[s]),
                         start_phase=int(phs[s]))
        for col, k in enumerate(order):
            emp = EmpiricalMeasure.from_samples(run.overshoot[:, col], run.phase[:, col], ladder.n, edges)
            tv[s, k] = 0.5 * float(np.abs(emp.probabilities() - ref).sum())
    mean = tv.mean(axis=0)
    se = tv.std(axis=0, ddof=1) / math.sqrt(n_starts)
    return [CurvePoint(float(t), float(m), float(e)) for t, m, e in zip(t_grid, mean, se)]


def stable_hitting_mixing_bound(alpha: float, delta: float, C: float, t: float, s: float) -> float:
    """Mixing bound ``C ((t + s) / t)^(-1 / (2 + delta))`` for stable processes observed at hitting times."""
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    if not (0 < delta <= 1):
        raise ValueError("delta must lie in (0, 1]")
    if t < 1:
        raise ValueError("t must be at least 1")
    if s < 0:
        raise ValueError("s must be nonnegative")
    return float(C * ((t + s) / t) ** (-1.0 / (2.0 + delta)))
