"""Exact path construction, first passage, overshoots and ladder statistics.

Paths are built from the path decomposition of a MAP: exponential holding
times of the modulator, a transitional jump at each switch and a fresh Lévy
segment in the current phase. Components with drift and compound Poisson
jumps give piecewise-linear paths that are simulated without
discretization; bulk Monte Carlo runs go through the kernels in
:mod:`mapfluct.kernels`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .laws import Binned, JumpLaw, sampling_table
from .model import (CompoundPoisson, LadderSpec, LevyComponentSpec, MapSpec, require_valid,
                    stationary_of_Q)
from .rng import as_generator
from .samplers import EventList, truncate_jumps


class HorizonExceeded(RuntimeError):
    """A passage did not happen before the maximal horizon."""


class SimulationError(RuntimeError):
    """The spec cannot be simulated as requested."""


# --------------------------------------------------------------------------
# flat arrays for the kernels
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class PhaseArrays:
    drift: np.ndarray
    c: np.ndarray
    jl: np.ndarray
    qout: np.ndarray
    tgt: np.ndarray
    tcum: np.ndarray
    ntg: np.ndarray
    fl: np.ndarray
    kill: np.ndarray
    table: tuple

    def dynamics(self):
        return (self.c, self.jl, self.qout, self.tgt, self.tcum, self.ntg, self.fl)


def _phase_arrays(drifts, rates, jump_laws, Q, F, killing) -> PhaseArrays:
    n = len(drifts)
    Q = np.asarray(Q, dtype=float)
    laws: list[JumpLaw] = []
    jl = np.full(n, -1, dtype=np.int64)
    for i, law in enumerate(jump_laws):
        if law is not None and rates[i] > 0:
            jl[i] = len(laws)
            laws.append(law)
    fl = np.full((n, n), -1, dtype=np.int64)
    for i in range(n):
        for j in range(n):
            if i != j and F[i][j] is not None and Q[i, j] > 0:
                fl[i, j] = len(laws)
                laws.append(F[i][j])
    table = sampling_table(laws).as_tuple()
    qout = np.zeros(n)
    tgt = np.zeros((n, max(n - 1, 1)), dtype=np.int64)
    tcum = np.ones((n, max(n - 1, 1)))
    ntg = np.zeros(n, dtype=np.int64)
    for i in range(n):
        targets = [j for j in range(n) if j != i and Q[i, j] > 0]
        qout[i] = sum(Q[i, j] for j in targets)
        ntg[i] = len(targets)
        acc = 0.0
        for m, j in enumerate(targets):
            tgt[i, m] = j
            acc += Q[i, j] / qout[i]
            tcum[i, m] = acc
        if targets:
            tcum[i, len(targets) - 1] = 1.0
    return PhaseArrays(np.asarray(drifts, dtype=float), np.asarray(rates, dtype=float), jl, qout, tgt, tcum,
                       ntg, fl, np.asarray(killing, dtype=float), table)


def map_arrays(spec: MapSpec) -> PhaseArrays:
    """Kernel arrays for a MAP with drift + compound Poisson components."""
    if not spec.exactly_simulable:
        raise SimulationError("exact kernels need drift + compound Poisson components without Gaussian part")
    rates = [0.0 if c.jumps is None else c.jumps.rate for c in spec.components]
    laws = [None if c.jumps is None else c.jumps.law for c in spec.components]
    return _phase_arrays([c.drift for c in spec.components], rates, laws, spec.Q, spec.F, [0.0] * spec.n)


def ladder_arrays(ladder: LadderSpec) -> PhaseArrays:
    rates = [ladder.jump_rate(i) for i in range(ladder.n)]
    laws = [None if j is None else j.law for j in ladder.jumps]
    return _phase_arrays(ladder.drifts, rates, laws, ladder.Q, ladder.F, ladder.killing)


def _truncated_spec(spec: MapSpec, eps: float, gaussian_substitution: bool = False) -> MapSpec:
    """Finite-activity approximation: jumps below ``eps`` replaced by their drift (and variance)."""
    comps = []
    for c in spec.components:
        if c.finite_activity:
            comps.append(c)
            continue
        tr = truncate_jumps(c, eps)
        gauss = math.sqrt(c.gaussian ** 2 + (tr.small_variance if gaussian_substitution else 0.0))
        jumps = CompoundPoisson(tr.rate, tr.law) if tr.law is not None else None
        comps.append(LevyComponentSpec(c.drift + tr.drift_shift, gauss, jumps, c.killing))
    return MapSpec(tuple(comps), spec.Q, spec.F, spec.labels)


# --------------------------------------------------------------------------
# path records
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Segment:
    """Stretch of a path spent in one phase, between two switches.

    The value moves with slope ``drift`` plus Gaussian noise of volatility
    ``vol`` and jumps by ``events.sizes`` at ``events.times`` (absolute).
    ``gauss`` holds the Brownian displacement accumulated at each event time
    and at the segment end (empty when ``vol == 0``).
    """

    start: float
    end: float
    phase: int
    start_value: float
    drift: float
    vol: float
    events: EventList
    gauss: np.ndarray = field(default_factory=lambda: np.empty(0))

    def value_at(self, t: float, left: bool = False) -> float:
        """Value at time ``t`` in ``[start, end]`` (left limit when ``left``)."""
        k = np.searchsorted(self.events.times, t, side="left" if left else "right")
        x = self.start_value + self.drift * (t - self.start) + float(np.sum(self.events.sizes[:k]))
        if self.vol > 0 and len(self.gauss):
            # linear interpolation of the Brownian part between knots
            knots = np.concatenate(([self.start], self.events.times, [self.end]))
            vals = np.concatenate(([0.0], self.gauss))
            x += float(np.interp(t, knots, vals))
        return x

    @property
    def end_value(self) -> float:
        return self.value_at(self.end, left=False)


@dataclass(frozen=True)
class Switch:
    time: float
    src: int
    dst: int
    jump: float


@dataclass(frozen=True)
class MapPath:
    """Piecewise path record: phase segments, switches and the horizon."""

    segments: tuple[Segment, ...]
    switches: tuple[Switch, ...]
    horizon: float

    def segment_at(self, t: float) -> Segment:
        for seg in self.segments:
            if seg.start <= t < seg.end:
                return seg
        return self.segments[-1]

    def value_at(self, t: float) -> float:
        return self.segment_at(t).value_at(t)

    def phase_at(self, t: float) -> int:
        return self.segment_at(t).phase

    @property
    def end_value(self) -> float:
        return self.segments[-1].end_value

    def knots(self) -> list[tuple[float, float, int]]:
        """(time, value, phase) at every start, jump (left limit and value) and end."""
        rows = []
        for seg in self.segments:
            rows.append((seg.start, seg.value_at(seg.start), seg.phase))
            for t in seg.events.times:
                rows.append((float(t), seg.value_at(t, left=True), seg.phase))
                rows.append((float(t), seg.value_at(t), seg.phase))
            rows.append((seg.end, seg.value_at(seg.end, left=True), seg.phase))
        return rows


def simulate_path(spec: MapSpec, T: float, rng, eps: float | None = None, start_phase: int = 0,
                  start_value: float = 0.0, max_segments: int = 10_000_000) -> MapPath:
    """One MAP path on ``[0, T]`` built segment by segment."""
    require_valid(spec)
    if not all(c.finite_activity for c in spec.components):
        if eps is None:
            raise SimulationError("infinite-activity component: supply a truncation cutoff eps")
        spec = _truncated_spec(spec, eps)
    rng = as_generator(rng)
    Q = np.asarray(spec.Q)
    segs, sws = [], []
    t, x, ph = 0.0, float(start_value), start_phase
    while True:
        if len(segs) >= max_segments:
            raise SimulationError("horizon overflow: too many segments")
        rate = -Q[ph, ph]
        hold = rng.exponential(1.0 / rate) if rate > 0 else math.inf
        end = min(T, t + hold)
        comp = spec.components[ph]
        if comp.jumps is not None:
            ev = _cpp_events_between(comp.jumps.rate, comp.jumps.law, t, end, rng)
        else:
            ev = EventList(np.empty(0), np.empty(0), end)
        gauss = np.empty(0)
        if comp.gaussian > 0:
            knots = np.concatenate(([t], ev.times, [end]))
            gauss = np.cumsum(comp.gaussian * np.sqrt(np.diff(knots)) * rng.standard_normal(len(knots) - 1))
        seg = Segment(t, end, ph, x, comp.drift, comp.gaussian, ev, gauss)
        segs.append(seg)
        x = seg.end_value
        if end >= T:
            break
        w = Q[ph].copy()
        w[ph] = 0.0
        nxt = int(rng.choice(spec.n, p=w / w.sum()))
        law = spec.F[ph][nxt]
        jump = float(law.sample(rng)) if law is not None else 0.0
        sws.append(Switch(end, ph, nxt, jump))
        x += jump
        t, ph = end, nxt
    return MapPath(tuple(segs), tuple(sws), float(T))


@dataclass(frozen=True)
class Endpoints:
    """State at a fixed horizon for many paths, with switch counts and time spent per phase."""

    value: np.ndarray
    phase: np.ndarray
    switches: np.ndarray
    occupation: np.ndarray


def simulate_endpoints(spec: MapSpec, T: float, n_paths: int, rng, start_phase: int = 0) -> Endpoints:
    """``(xi_T, J_T)`` of ``n_paths`` exact paths of a drift + compound Poisson spec started at 0."""
    require_valid(spec)
    if not spec.exactly_simulable:
        raise SimulationError("endpoint sampling needs drift + compound Poisson components")
    arr = map_arrays(spec)
    xi, ph, nsw, occ = kernels.map_endpoints(int(n_paths), int(start_phase), float(T), arr.drift, *arr.dynamics(),
                                             *arr.table, as_generator(rng))
    return Endpoints(xi, ph, nsw, occ)


def _cpp_events_between(rate, law, t0, t1, rng) -> EventList:
    k = rng.poisson(rate * (t1 - t0)) if t1 > t0 else 0
    times = np.sort(t0 + (t1 - t0) * (1.0 - rng.random(k)))
    sizes = law.sample(rng, k) if k else np.empty(0)
    return EventList(times, np.asarray(sizes, dtype=float), t1)


# --------------------------------------------------------------------------
# overshoots of the parent MAP
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class OvershootSample:
    level: float
    passage_time: float
    overshoot: float
    phase: int
    crept: bool


@dataclass(frozen=True)
class OvershootBatch:
    """Overshoots of many independent paths at common levels (rows are paths)."""

    levels: np.ndarray
    passage_time: np.ndarray
    overshoot: np.ndarray
    phase: np.ndarray
    crept: np.ndarray

    @property
    def censored(self) -> np.ndarray:
        return self.phase < 0

    def samples(self, path: int = 0) -> list[OvershootSample]:
        return [OvershootSample(float(l), float(t), float(o), int(j), bool(c)) for l, t, o, j, c in
                zip(self.levels, self.passage_time[path], self.overshoot[path], self.phase[path], self.crept[path])]


def _grid_passage(spec: MapSpec, levels, start_value, start_phase, rng, max_horizon, dt, eps):
    """Discretized passage for Gaussian or truncated components (crossings detected on the grid)."""
    if dt is None:
        raise SimulationError("components with a Gaussian part need a grid step dt")
    spec = _truncated_spec(spec, eps) if eps is not None else spec
    rng = as_generator(rng)
    Q = np.asarray(spec.Q)
    out = []
    li = 0
    t, x, ph = 0.0, float(start_value), start_phase
    while li < len(levels) and levels[li] < x:
        out.append(OvershootSample(levels[li], 0.0, x - levels[li], ph, x == levels[li]))
        li += 1
    from .samplers import sample_levy_increment
    while li < len(levels) and t < max_horizon:
        if rng.random() < -Q[ph, ph] * dt:
            w = Q[ph].copy()
            w[ph] = 0.0
            nxt = int(rng.choice(spec.n, p=w / w.sum()))
            x += float(spec.F[ph][nxt].sample(rng)) if spec.F[ph][nxt] is not None else 0.0
            ph = nxt
        x += sample_levy_increment(spec.components[ph], dt, rng)
        t += dt
        while li < len(levels) and levels[li] < x:
            out.append(OvershootSample(levels[li], t, x - levels[li], ph, False))
            li += 1
    if li < len(levels):
        raise HorizonExceeded(f"level {levels[li]} not passed before horizon {max_horizon}")
    return out


def sample_overshoots(spec: MapSpec, levels, n_paths: int, rng, start_phase: int = 0, start_value: float = 0.0,
                      max_horizon: float = 1e6) -> OvershootBatch:
    """First passages above sorted ``levels`` for ``n_paths`` exact paths (censored entries have phase -1)."""
    require_valid(spec)
    levels = np.asarray(levels, dtype=float)
    if np.any(np.diff(levels) < 0):
        raise ValueError("levels must be sorted ascending")
    arr = map_arrays(spec)
    rng = as_generator(rng)
    Tp, O, J, crept = kernels.map_passage(int(n_paths), int(start_phase), levels - start_value, float(max_horizon),
                                          arr.drift, *arr.dynamics(), *arr.table, rng)
    return OvershootBatch(levels, Tp, O, J, crept)


def first_passage(spec: MapSpec, level: float, rng, max_horizon: float = 1e6, start_phase: int = 0,
                  start_value: float = 0.0, dt: float | None = None, eps: float | None = None) -> OvershootSample:
    """First passage strictly above ``level``; exact for drift + compound Poisson specs."""
    return overshoot_series(spec, [level], rng, max_horizon, start_phase, start_value, dt, eps)[0]


def overshoot_series(spec: MapSpec, levels, rng, max_horizon: float = 1e6, start_phase: int = 0,
                     start_value: float = 0.0, dt: float | None = None,
                     eps: float | None = None) -> list[OvershootSample]:
    """Overshoots at several sorted levels along a single path."""
    levels = [float(v) for v in levels]
    if any(b < a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be sorted ascending")
    if spec.exactly_simulable:
        batch = sample_overshoots(spec, levels, 1, rng, start_phase, start_value, max_horizon)
        if batch.censored.any():
            lvl = levels[int(np.argmax(batch.censored[0]))]
            raise HorizonExceeded(f"level {lvl} not passed before horizon {max_horizon}")
        return batch.samples(0)
    return _grid_passage(spec, levels, start_value, start_phase, rng, max_horizon, dt, eps)


# --------------------------------------------------------------------------
# ladder statistics of a single path
# --------------------------------------------------------------------------


@dataclass
class LadderStats:
    """Ladder information read off one path of a creeping-class MAP."""

    time_at_max: np.ndarray
    jumps: list[tuple[int, float]] = field(default_factory=list)  # (phase, size) within a phase
    transitions: list[tuple[int, int, float]] = field(default_factory=list)  # (from, to, size >= 0)

    @property
    def switch_counts(self) -> np.ndarray:
        n = len(self.time_at_max)
        out = np.zeros((n, n), dtype=int)
        for i, j, _ in self.transitions:
            out[i, j] += 1
        return out


def _check_creeping_class(spec: MapSpec):
    for i, c in enumerate(spec.components):
        if not (c.exactly_simulable and c.drift > 0):
            raise SimulationError(
                f"phase {i} is outside the creeping class (needs positive drift and compound Poisson jumps)")


def extract_ladder_stats(path: MapPath, spec: MapSpec | None = None) -> LadderStats:
    """Running maximum, time at the maximum per phase and ladder events of a path.

    A ladder event happens whenever the running maximum is reached again or
    exceeded. It is attributed to the phase at the last time at the
    maximum and the phase at the event; equal phases with a positive size
    give a ladder jump, different phases a transitional ladder jump
    (possibly of size 0).
    """
    if spec is not None:
        _check_creeping_class(spec)
    if any(seg.vol > 0 or seg.drift <= 0 for seg in path.segments):
        raise SimulationError("path is outside the creeping class")
    n = 1 + max(max(seg.phase for seg in path.segments), max((s.dst for s in path.switches), default=0))
    stats = LadderStats(np.zeros(n))
    x = path.segments[0].start_value
    mx = x
    last = path.segments[0].phase

    def flow(t0, t1, ph):
        nonlocal x, mx, last
        a = path_drift[ph]
        gap = mx - x
        dur = t1 - t0
        climb = gap / a
        if dur >= climb:
            if gap > 0 and last != ph:
                stats.transitions.append((last, ph, 0.0))
            if gap > 0:
                last = ph
            stats.time_at_max[ph] += dur - climb
            x = mx + a * (dur - climb)
            mx = x
        else:
            x += a * dur

    def jump(size, ph):
        nonlocal x, mx, last
        x += size
        if x >= mx:
            h = x - mx
            if last == ph and h > 0:
                stats.jumps.append((ph, h))
            elif last != ph:
                stats.transitions.append((last, ph, h))
            mx = x
            last = ph

    path_drift = {seg.phase: seg.drift for seg in path.segments}
    for k, seg in enumerate(path.segments):
        t = seg.start
        for te, size in zip(seg.events.times, seg.events.sizes):
            flow(t, te, seg.phase)
            jump(float(size), seg.phase)
            t = te
        flow(t, seg.end, seg.phase)
        if k < len(path.switches):
            sw = path.switches[k]
            jump(sw.jump, sw.dst)
    return stats


# --------------------------------------------------------------------------
# ladder spec estimation
# --------------------------------------------------------------------------


@dataclass
class LadderEstimate:
    """Estimated ladder spec with standard errors and raw counts."""

    ladder: LadderSpec
    normalization: str  # 'time-at-max' or 'epochs'
    local_time: np.ndarray
    jump_rate_se: np.ndarray
    q_se: np.ndarray
    edges: np.ndarray
    pi_counts: np.ndarray
    f_counts: np.ndarray
    f_zero: np.ndarray
    censored: int
    jump_means: np.ndarray = None
    transition_means: np.ndarray = None

    def jump_bin_intensity(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Ladder jump intensity per bin (per unit local time) and its standard error."""
        counts = self.pi_counts[i, :-1]
        ell = self.local_time[i]
        return counts / ell, np.sqrt(counts) / ell

    def transition_bin_intensity(self, i: int, j: int) -> tuple[np.ndarray, np.ndarray]:
        """``q+_ij F+_ij`` mass per bin (per unit local time) and its standard error."""
        counts = self.f_counts[i, j, :-1]
        ell = self.local_time[i]
        return counts / ell, np.sqrt(counts) / ell


def _binned_law(edges, counts, zero=0.0, overflow_mean=None):
    """Piecewise-uniform law from histogram counts; the overflow bin gets a matching mean."""
    e = list(edges)
    m = list(counts[:-1])
    if counts[-1] > 0:
        top = e[-1] + max(2.0 * (overflow_mean - e[-1]), 1e-12) if overflow_mean is not None else 2 * e[-1]
        e.append(top)
        m.append(counts[-1])
    return Binned(tuple(e), tuple(m), zero)


def _ratio_se(num, den):
    """Delta-method standard error of ``sum(num) / sum(den)`` over i.i.d. replicates."""
    r = num.sum() / den.sum()
    n = len(num)
    if n < 2:
        return math.nan
    resid = num - r * den
    return math.sqrt(n / (n - 1) * np.sum(resid ** 2)) / den.sum()


def estimate_ladder_spec(spec: MapSpec, n_paths: int, rng, edges=None, local_time: float = 50.0,
                         max_horizon: float = 1e5, start_phase: int | None = None, min_events: int = 30,
                         max_epochs: int = 200, gap_cap: float = 50.0) -> LadderEstimate:
    """Estimate the ascending ladder MAP of a drift + compound Poisson spec by simulation.

    Creeping class (every drift positive): local time is the time spent at
    the running maximum, so the ladder drift in phase ``i`` equals the drift
    of the parent. Non-creeping class (every drift nonpositive): local time
    counts ladder epochs. Jump and transitional laws are binned on
    ``edges``; start phases cycle through the stationary law of ``Q``.
    """
    require_valid(spec)
    arr = map_arrays(spec)
    rng = as_generator(rng)
    n = spec.n
    drifts = np.array([c.drift for c in spec.components])
    if edges is None:
        edges = np.linspace(0.0, 5.0, 51)
    edges = np.asarray(edges, dtype=float)
    creeping = bool(np.all(drifts > 0))
    if not creeping and not np.all(drifts <= 0):
        raise SimulationError("mixed creeping and non-creeping phases: no consistent local time normalization")
    starts = _start_split(spec, n_paths, start_phase)
    nb = len(edges) - 1
    ell = np.zeros(n)
    pi_counts = np.zeros((n, nb + 1))
    f_counts = np.zeros((n, n, nb + 1))
    f_zero = np.zeros((n, n))
    pi_sum = np.zeros(n)
    f_sum = np.zeros((n, n))
    per_ell, per_pi, per_f, kills_all = [], [], [], np.zeros(n)
    censored = 0
    for ph, m in starts:
        if m == 0:
            continue
        if creeping:
            e, pc, fc, fz, ps, fs, npi, nf, cens = kernels.map_ladder_creeping(
                m, ph, float(local_time), float(max_horizon), arr.drift, *arr.dynamics(), *arr.table, edges, rng)
            censored += int(cens.sum())
        else:
            e, kills, pc, fc, fz, occ, reason = kernels.map_ladder_epochs(
                m, ph, int(max_epochs), float(max_horizon), float(gap_cap), math.inf, arr.drift, *arr.dynamics(),
                *arr.table, edges, np.empty(0), rng)
            censored += int(np.sum(reason == 1))
            kills_all += kills.sum(axis=0)
            ps = np.zeros(n)
            fs = np.zeros((n, n))
            npi = np.zeros((m, n))
            nf = np.zeros((m, n, n))
        ell += e.sum(axis=0)
        pi_counts += pc
        f_counts += fc
        f_zero += fz
        pi_sum += ps
        f_sum += fs
        per_ell.append(e)
        per_pi.append(npi)
        per_f.append(nf)
    if censored:
        warnings.warn(f"{censored} ladder paths hit the horizon; rates are censored")
    E = np.concatenate(per_ell)
    NPI = np.concatenate(per_pi)
    NF = np.concatenate(per_f)
    if np.any(ell <= 0):
        raise SimulationError("some phase never visited the maximum; increase paths or local time")
    jumps, rate_se = [], np.zeros(n)
    pi_mean = np.full(n, math.nan)
    for i in range(n):
        cnt = pi_counts[i].sum()
        if cnt < min_events and cnt > 0:
            warnings.warn(f"only {int(cnt)} ladder jumps in phase {i}; wide confidence intervals")
        if cnt > 0:
            over = pi_counts[i, -1]
            om = None
            if over > 0 and creeping:
                inside = np.sum(pi_counts[i, :-1] * 0.5 * (edges[:-1] + edges[1:]))
                om = (pi_sum[i] - inside) / over
            jumps.append(CompoundPoisson(cnt / ell[i], _binned_law(edges, pi_counts[i], 0.0, om)))
            pi_mean[i] = pi_sum[i] / cnt if creeping else math.nan
        else:
            jumps.append(None)
        rate_se[i] = _ratio_se(NPI[:, i], E[:, i]) if creeping else math.sqrt(cnt) / ell[i]
    Qp = np.zeros((n, n))
    q_se = np.zeros((n, n))
    Fp = [[None] * n for _ in range(n)]
    f_mean = np.full((n, n), math.nan)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            cnt = f_counts[i, j].sum() + f_zero[i, j]
            if cnt == 0:
                continue
            Qp[i, j] = cnt / ell[i]
            q_se[i, j] = _ratio_se(NF[:, i, j], E[:, i]) if creeping else math.sqrt(cnt) / ell[i]
            over = f_counts[i, j, -1]
            om = None
            if over > 0 and creeping:
                inside = np.sum(f_counts[i, j, :-1] * 0.5 * (edges[:-1] + edges[1:]))
                om = (f_sum[i, j] - inside) / over
            Fp[i][j] = _binned_law(edges, f_counts[i, j], f_zero[i, j], om)
            f_mean[i, j] = f_sum[i, j] / cnt if creeping else math.nan
    np.fill_diagonal(Qp, -Qp.sum(axis=1))
    killing = np.zeros(n) if creeping else kills_all / ell
    d = drifts if creeping else np.zeros(n)
    ladder = LadderSpec(tuple(d), tuple(jumps), Qp, Fp, tuple(killing))
    return LadderEstimate(ladder, "time-at-max" if creeping else "epochs", ell, rate_se, q_se, edges, pi_counts,
                          f_counts, f_zero, censored, pi_mean, f_mean)


def _start_split(spec, n_paths, start_phase):
    if start_phase is not None:
        return [(int(start_phase), int(n_paths))]
    pi = stationary_of_Q(spec.Q)
    counts = np.floor(pi * n_paths).astype(int)
    counts[np.argmax(pi)] += n_paths - counts.sum()
    return [(i, int(m)) for i, m in enumerate(counts)]


# --------------------------------------------------------------------------
# ladder subordinator simulation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SawtoothRun:
    levels: np.ndarray
    overshoot: np.ndarray
    phase: np.ndarray
    resolvent: np.ndarray
    occupation: np.ndarray

    @property
    def crept(self):
        return (self.overshoot == 0.0) & (self.phase >= 0)


def run_ladder(ladder: LadderSpec, n_paths: int, rng, levels=(), start_value: float = 0.0, start_phase: int = 0,
               res_lambda: float = 0.0, res_kappa=(), res_coef=None, occ_edges=(), h_stop: float | None = None,
               res_tol: float = 1e-15) -> SawtoothRun:
    """Bulk sawtooth simulation of a ladder subordinator (see :func:`kernels.ladder_sawtooth`)."""
    require_valid(ladder)
    arr = ladder_arrays(ladder)
    levels = np.asarray(levels, dtype=float)
    if np.any(np.diff(levels) < 0):
        raise ValueError("levels must be sorted ascending")
    occ_edges = np.asarray(occ_edges, dtype=float)
    kappa = np.asarray(res_kappa, dtype=float)
    coef = np.zeros((ladder.n, len(kappa))) if res_coef is None else np.asarray(res_coef, dtype=float)
    if h_stop is None:
        h_stop = max([0.0] + list(levels[-1:] + 1e-12) + list(occ_edges[-1:]))
        if res_lambda > 0:
            h_stop = max(h_stop, -math.log(res_tol) / res_lambda)
    rng = as_generator(rng)
    O, J, res, occ = kernels.ladder_sawtooth(
        int(n_paths), float(start_value), int(start_phase), arr.drift, *arr.dynamics(), arr.kill, *arr.table,
        levels, float(res_lambda), kappa, coef, occ_edges, float(h_stop), rng)
    return SawtoothRun(levels, O, J, res, occ)


def estimate_resolvent(ladder: LadderSpec, rate: float, coefs, x: float, i: int, lam: float, n_paths: int,
                       rng) -> tuple[float, float]:
    """Monte Carlo ``E int_0^inf exp(-lam t) f(O_t, J_t) dt`` for ``f(y, j) = coefs[j] exp(-rate y)``, with its SE."""
    coef = np.asarray(coefs, dtype=float).reshape(ladder.n, 1)
    run = run_ladder(ladder, n_paths, rng, start_value=x, start_phase=i, res_lambda=lam, res_kappa=[rate],
                     res_coef=coef)
    r = run.resolvent
    return float(r.mean()), float(r.std(ddof=1) / math.sqrt(len(r)))


def simulate_ladder_overshoot(ladder: LadderSpec, levels, rng, start_value: float = 0.0,
                              start_phase: int = 0) -> list[OvershootSample]:
    """Overshoots of one ladder path at the given levels (phase -1 after killing)."""
    run = run_ladder(ladder, 1, rng, levels, start_value, start_phase)
    return [OvershootSample(float(l), math.nan, float(o), int(j), bool(j >= 0 and o == 0.0))
            for l, o, j in zip(run.levels, run.overshoot[0], run.phase[0])]


@dataclass
class PotentialEstimate:
    """Estimated potential measures ``U[i, cell, j]`` (start phase i, target phase j) with errors.

    ``per_path[i]`` holds independent replicates, one row per path or per
    equal-size batch mean, so ``std / sqrt(rows)`` is a standard error.
    """

    edges: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    per_path: list = None

    def cumulative(self) -> tuple[np.ndarray, np.ndarray]:
        """``U([0, e_k))`` for each right edge, shape (start, edges, target), with errors."""
        n_start, n_cells, n = self.mean.shape
        cum = np.concatenate([np.zeros((n_start, 1, n)), np.cumsum(self.mean, axis=1)], axis=1)
        se = np.zeros_like(cum)
        if self.per_path is not None:
            for i, occ in enumerate(self.per_path):
                c = np.cumsum(occ, axis=1)
                se[i, 1:] = c.std(axis=0, ddof=1) / math.sqrt(len(occ))
        return cum, se

    def increment(self, i: int, j: int, a: int, b: int) -> tuple[float, float]:
        """``U_ij([e_a, e_b))`` and its standard error."""
        occ = self.per_path[i][:, a:b, j].sum(axis=1)
        return float(occ.mean()), float(occ.std(ddof=1) / math.sqrt(len(occ)))


def estimate_potential_measure(ladder: LadderSpec, edges, n_paths: int, rng, start_phases=None,
                               keep_paths: bool = True) -> PotentialEstimate:
    """Occupation of the ladder height per cell and phase, averaged over paths, per start phase."""
    edges = np.asarray(edges, dtype=float)
    rng = as_generator(rng)
    starts = range(ladder.n) if start_phases is None else start_phases
    means, ses, per = [], [], []
    for i in starts:
        run = run_ladder(ladder, n_paths, rng, start_phase=i, occ_edges=edges)
        occ = run.occupation
        means.append(occ.mean(axis=0))
        ses.append(occ.std(axis=0, ddof=1) / math.sqrt(n_paths))
        per.append(occ if keep_paths else None)
    return PotentialEstimate(edges, np.array(means), np.array(ses), per if keep_paths else None)
