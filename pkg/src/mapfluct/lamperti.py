"""Lamperti–Kiu transform between real self-similar paths and MAPs on two sign phases.

A real path is stored as pieces on which ``|Z|^alpha`` is affine in real
time (``log|Z|`` affine when ``alpha = 0``). Under the time change
``tau(t) = inf{s: int_0^s |Z_r|^(-alpha) dr > t}`` such a piece becomes a
piece on which ``log|Z|`` is affine in MAP time, so both directions are
exact. Phase index 0 carries the label -1 (negative values), index 1 the
label +1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .laws import SignFlipLog, stable_levy_constants
from .model import LampertiStableJumps, LevyComponentSpec, MapSpec
from .samplers import EventList
from .simulator import MapPath, Segment, Switch

SIGN_LABELS = (-1, 1)


class AbsorbedError(ValueError):
    """The real path touches 0, where the transform is undefined."""


def lamperti_stable_spec(alpha: float, rho: float) -> MapSpec:
    """MAP of the log-radius and sign of a strictly alpha-stable process, ``alpha`` in (0, 1).

    Phase ``+1`` has the log-transformed stable jumps that keep the sign,
    sign flips happen at rate ``c_minus / alpha`` (from ``+1``) and
    ``c_plus / alpha`` (from ``-1``) with log-radius jump density
    ``alpha e^x / (1 + e^x)^(alpha + 1)``. There is no drift and no Gaussian
    part.
    """
    if not (0 < alpha < 1):
        raise ValueError("alpha must lie in (0, 1)")
    if not (0 < rho < 1):
        raise ValueError("rho must lie in (0, 1)")
    cp, cm = stable_levy_constants(alpha, rho)
    if cp <= 0 or cm <= 0:
        raise ValueError("one-sided stable process: the sign never flips")
    q_up, q_down = cp / alpha, cm / alpha  # rates -1 -> +1 and +1 -> -1
    Q = np.array([[-q_up, q_up], [q_down, -q_down]])
    flip = SignFlipLog(alpha)
    comps = (LevyComponentSpec(0.0, 0.0, LampertiStableJumps(alpha, rho, side=-1)),
             LevyComponentSpec(0.0, 0.0, LampertiStableJumps(alpha, rho, side=1)))
    return MapSpec(comps, Q, [[None, flip], [flip, None]], SIGN_LABELS)


# --------------------------------------------------------------------------
# real paths
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RealPath:
    """Piecewise real path of a self-similar process of index ``alpha``.

    Piece ``k`` lasts ``durations[k]`` units of real time (so it covers
    ``[times[k], times[k+1])``) with sign ``signs[k]``; its log-radius runs from ``log_radius[k]`` to the left
    limit ``log_radius_end[k]`` with ``|Z|^alpha`` affine in real time
    (``log|Z|`` affine when ``alpha = 0``).
    """

    alpha: float
    durations: np.ndarray
    signs: np.ndarray
    log_radius: np.ndarray
    log_radius_end: np.ndarray

    def __post_init__(self):
        if len(self.durations) != len(self.signs):
            raise ValueError("need one duration per piece")
        if np.any(np.asarray(self.durations) < 0):
            raise ValueError("piece durations must be nonnegative")
        if np.any(np.asarray(self.signs) == 0):
            raise AbsorbedError("absorbed: the path touches 0")

    @property
    def times(self) -> np.ndarray:
        return np.concatenate(([0.0], np.cumsum(self.durations)))

    @property
    def horizon(self) -> float:
        return float(np.sum(self.durations))

    @classmethod
    def from_grid(cls, times, values, alpha: float) -> "RealPath":
        """Step path that holds ``values[k]`` on ``[times[k], times[k+1])``; the last value ends the record."""
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if np.any(values[:-1] == 0):
            raise AbsorbedError("absorbed: the path touches 0")
        lr = np.log(np.abs(values[:-1]))
        return cls(float(alpha), np.diff(times), np.sign(values[:-1]).astype(int), lr, lr.copy())

    def _piece_value(self, k: int, s: float) -> float:
        """Value at real time ``s`` after the start of piece ``k``."""
        x0, d, al = self.log_radius[k], self.log_radius_end[k] - self.log_radius[k], self.alpha
        dur = self.durations[k]
        frac = s / dur if dur > 0 else 0.0
        lr = x0 + (d * frac if al == 0 else math.log1p(math.expm1(al * d) * frac) / al)
        return self.signs[k] * math.exp(lr)

    def value_at(self, t: float) -> float:
        times = self.times
        k = int(np.searchsorted(times, t, side="right") - 1)
        k = min(max(k, 0), len(self.signs) - 1)
        return self._piece_value(k, t - times[k])

    def knots(self) -> list[tuple[float, float]]:
        """(time, value) at every piece start and at each piece end (left limit)."""
        out = []
        times = self.times
        for k in range(len(self.signs)):
            out.append((float(times[k]), float(self.signs[k] * math.exp(self.log_radius[k]))))
            out.append((float(times[k + 1]), float(self.signs[k] * math.exp(self.log_radius_end[k]))))
        return out


def _map_duration(x0: float, d: float, alpha: float, s: float) -> float:
    """MAP time ``int |Z_r|^(-alpha) dr`` of a piece of real duration ``s`` and log-radius change ``d``."""
    if alpha == 0:
        return s
    return s * math.exp(-alpha * x0) / special.exprel(alpha * d)


def _real_duration(x0: float, d: float, alpha: float, u: float) -> float:
    """Real time ``int exp(alpha xi_v) dv`` of a piece of MAP duration ``u`` and log-radius change ``d``."""
    if alpha == 0:
        return u
    return u * math.exp(alpha * x0) * special.exprel(alpha * d)


def _phase_of(sign: int) -> int:
    return SIGN_LABELS.index(int(sign))


def lamperti_kiu_forward(path: RealPath, slope_rtol: float = 1e-9) -> MapPath:
    """MAP path ``(log|Z|, sgn Z)`` in the time scale ``tau``; phases are indices of ``(-1, +1)``.

    Consecutive pieces with the same sign form one segment; each must end
    where the segment slope predicts (up to ``slope_rtol`` in log-radius).
    """
    al = path.alpha
    segs, sws = [], []
    u = 0.0
    cur = None  # [start, phase, start value, slope, event times, event sizes]
    prev_end = 0.0
    for k in range(len(path.signs)):
        x0, x1 = float(path.log_radius[k]), float(path.log_radius_end[k])
        ph = _phase_of(int(path.signs[k]))
        du = _map_duration(x0, x1 - x0, al, float(path.durations[k]))
        a = (x1 - x0) / du if du > 0 else 0.0
        if cur is not None and ph != cur[1]:
            segs.append(Segment(cur[0], u, cur[1], cur[2], cur[3], 0.0, EventList(np.array(cur[4]), np.array(cur[5]), u)))
            sws.append(Switch(u, cur[1], ph, x0 - prev_end))
            cur = None
        if cur is None:
            cur = [u, ph, x0, a, [], []]
        else:
            if abs(x1 - x0 - cur[3] * du) > slope_rtol * max(1.0, abs(x1)):
                raise ValueError("slope changes inside one sign phase are not representable")
            cur[4].append(u)
            cur[5].append(x0 - prev_end)
        prev_end = x1
        u += du
    segs.append(Segment(cur[0], u, cur[1], cur[2], cur[3], 0.0, EventList(np.array(cur[4]), np.array(cur[5]), u)))
    return MapPath(tuple(segs), tuple(sws), u)


def lamperti_kiu_inverse(path: MapPath, alpha: float) -> RealPath:
    """Real path ``J e^xi`` in the time scale ``sigma``; inverse of :func:`lamperti_kiu_forward`."""
    durs, signs, lr0, lr1 = [], [], [], []
    for seg in path.segments:
        if seg.vol > 0:
            raise ValueError("Gaussian segments have no exact piecewise representation")
        sg = SIGN_LABELS[seg.phase]
        cuts = [seg.start] + [float(t) for t in seg.events.times] + [seg.end]
        for a_t, b_t in zip(cuts[:-1], cuts[1:]):
            x0 = seg.value_at(a_t)
            x1 = seg.value_at(b_t, left=True)
            durs.append(_real_duration(x0, x1 - x0, alpha, b_t - a_t))
            signs.append(sg)
            lr0.append(x0)
            lr1.append(x1)
    return RealPath(float(alpha), np.array(durs), np.array(signs, dtype=int), np.array(lr0), np.array(lr1))


def map_path_distance(a: MapPath, b: MapPath) -> float:
    """Sup-norm distance between the knot lists (times and values) of two paths with equal structure."""
    ka, kb = a.knots(), b.knots()
    if len(ka) != len(kb) or any(p[2] != q[2] for p, q in zip(ka, kb)):
        return math.inf
    arr_a = np.array([(t, v) for t, v, _ in ka])
    arr_b = np.array([(t, v) for t, v, _ in kb])
    return float(np.max(np.abs(arr_a - arr_b))) if len(arr_a) else 0.0
