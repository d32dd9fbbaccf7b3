"""Samplers for the Lévy building blocks of a MAP path."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .laws import FiniteMixture, JumpLaw, Negated, Pareto, Truncated, stable_levy_constants
from .model import CompoundPoisson, LampertiStableJumps, LevyComponentSpec, StableJumps
from .rng import as_generator


@dataclass(frozen=True)
class EventList:
    """Jump times (strictly increasing, in ``(0, horizon]``) and sizes."""

    times: np.ndarray
    sizes: np.ndarray
    horizon: float

    def __post_init__(self):
        if len(self.times) != len(self.sizes):
            raise ValueError("times and sizes must have the same length")

    def __len__(self):
        return len(self.times)

    def shifted(self, t0: float) -> "EventList":
        return EventList(self.times + t0, self.sizes, self.horizon + t0)


def sample_cpp_events(rate: float, law: JumpLaw, T: float, rng) -> EventList:
    """Compound Poisson events on ``(0, T]``: Poisson count, uniform order statistics, i.i.d. sizes."""
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    rng = as_generator(rng)
    if T == 0 or rate == 0:
        return EventList(np.empty(0), np.empty(0), float(T))
    k = rng.poisson(rate * T)
    times = np.sort(T * (1.0 - rng.random(k)))  # uniform on (0, T]
    sizes = law.sample(rng, k) if k else np.empty(0)
    return EventList(times, np.asarray(sizes, dtype=float), float(T))


def sample_brownian_drift_bridge_free(a: float, b: float, dt: float, rng) -> float:
    """Increment ``a dt + b W_dt`` of a Brownian motion with drift."""
    if dt < 0:
        raise ValueError("dt must be nonnegative")
    if dt == 0:
        return 0.0
    if b == 0:
        return a * dt
    return a * dt + b * math.sqrt(dt) * as_generator(rng).standard_normal()


def stable_parameters(alpha: float, rho: float) -> tuple[float, float]:
    """Scale ``c`` and skewness ``beta`` of the strictly stable law with positivity ``rho``.

    The characteristic exponent is ``c |theta|^alpha (1 - i beta tan(pi alpha / 2) sgn theta)``.
    """
    if not (0 < alpha < 2):
        raise ValueError("alpha must lie in (0, 2)")
    lo = 0.0 if alpha <= 1 else 1.0 - 1.0 / alpha
    hi = 1.0 if alpha <= 1 else 1.0 / alpha
    if not (lo <= rho <= hi) or not (0 < rho < 1):
        raise ValueError(f"positivity parameter {rho} inadmissible for alpha={alpha}")
    if alpha == 1.0 and rho != 0.5:
        # strictly 1-stable laws with rho != 1/2 are shifted Cauchy laws outside this parametrization
        raise ValueError("asymmetric stable laws with alpha = 1 are unsupported")
    cp, cm = stable_levy_constants(alpha, rho)
    beta = (cp - cm) / (cp + cm)
    return math.cos(math.pi * alpha * (rho - 0.5)), beta


def sample_stable_increment(alpha: float, rho: float, dt: float, rng, size=None):
    """Strictly stable increment over time ``dt`` by the Chambers–Mallows–Stuck method."""
    c, beta = stable_parameters(alpha, rho)
    rng = as_generator(rng)
    U = rng.uniform(-0.5 * math.pi, 0.5 * math.pi, size)
    W = rng.standard_exponential(size)
    if alpha == 1.0:
        X = np.tan(U)
    else:
        zeta = beta * math.tan(0.5 * math.pi * alpha)
        B = math.atan(zeta) / alpha
        S = (1.0 + zeta * zeta) ** (0.5 / alpha)
        X = (S * np.sin(alpha * (U + B)) / np.cos(U) ** (1.0 / alpha)
             * (np.cos(U - alpha * (U + B)) / W) ** ((1.0 - alpha) / alpha))
    return (c * dt) ** (1.0 / alpha) * X


# --------------------------------------------------------------------------
# small-jump truncation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class TruncatedJumps:
    """Finite-activity part kept at cutoff ``eps`` and the moments of what was removed.

    ``drift_shift`` is added to the component drift so that the truncated
    process keeps the drift convention of the component.
    """

    eps: float
    rate: float
    law: JumpLaw | None
    drift_shift: float
    small_variance: float


def _logstable_small_moments(law: JumpLaw, eps: float) -> tuple[float, float]:
    pdf = law.pdf
    m1 = integrate.quad(lambda x: x * pdf(x), -eps, 0, limit=200)[0] + integrate.quad(
        lambda x: x * pdf(x), 0, eps, limit=200)[0]
    m2 = integrate.quad(lambda x: x * x * pdf(x), -eps, 0, limit=200)[0] + integrate.quad(
        lambda x: x * x * pdf(x), 0, eps, limit=200)[0]
    return m1, m2


def truncate_jumps(component: LevyComponentSpec, eps: float) -> TruncatedJumps:
    """Split the jump measure of ``component`` at ``|x| = eps``."""
    if not (0 < eps < 1):
        raise ValueError("cutoff eps must lie in (0, 1)")
    j = component.jumps
    if j is None:
        return TruncatedJumps(eps, 0.0, None, 0.0, 0.0)
    if isinstance(j, CompoundPoisson):
        # finite activity: nothing is removed unless mass sits in [-eps, eps]
        small = j.law.mass_between(-eps, eps) + j.law.atom_mass(-eps)
        if small == 0:
            return TruncatedJumps(eps, j.rate, j.law, 0.0, 0.0)
        inner = Truncated(j.law, -eps, eps)
        up, down = j.law.tail(eps), j.law.total_mass - j.law.tail(-eps) - j.law.atom_mass(-eps)
        parts = [(m, Truncated(j.law, lo, hi)) for m, lo, hi in ((up, eps, math.inf), (down, -math.inf, -eps)) if m > 0]
        big = FiniteMixture(tuple(m / (1 - small) for m, _ in parts), tuple(p for _, p in parts)) if parts else None
        return TruncatedJumps(eps, j.rate * (1 - small), big, j.rate * small * inner.mean(), 0.0)
    if isinstance(j, StableJumps):
        a, cp, cm = j.alpha, j.c_plus, j.c_minus
        up, down = j.tail(eps) if cp > 0 else 0.0, j.lower_tail(-eps) if cm > 0 else 0.0
        rate = up + down
        if not math.isfinite(rate):
            raise ValueError("jump measure is not integrable beyond the cutoff")
        parts, ws = [], []
        if up > 0:
            parts.append(Pareto(a, eps))
            ws.append(up / rate)
        if down > 0:
            parts.append(Negated(Pareto(a, eps)))
            ws.append(down / rate)
        law = FiniteMixture(tuple(ws), tuple(parts)) if len(parts) > 1 else (parts[0] if parts else None)
        var = (cp + cm) * eps ** (2 - a) / (2 - a)
        if a < 1:
            shift = (cp - cm) * eps ** (1 - a) / (1 - a)  # mean of the removed small jumps
        elif a > 1:
            shift = -(cp - cm) * eps ** (1 - a) / (a - 1)  # re-centre the kept big jumps
        else:
            shift = 0.0
        return TruncatedJumps(eps, rate, law, shift, var)
    if isinstance(j, LampertiStableJumps):
        base = j.law
        up = base.mass_between(eps, math.inf)
        down = base.mass_between(-math.inf, -eps)
        rate = up + down
        law = FiniteMixture((up / rate, down / rate), (Truncated(base, eps, math.inf), Truncated(base, -math.inf, -eps)))
        m1, m2 = _logstable_small_moments(base, eps)
        return TruncatedJumps(eps, rate, law, m1, m2)
    raise TypeError(f"unsupported jump spec {type(j).__name__}")


def _increment_from_truncation(component, tr: TruncatedJumps, dt, rng, gaussian_substitution):
    x = (component.drift + tr.drift_shift) * dt
    if tr.rate > 0 and tr.law is not None:
        k = rng.poisson(tr.rate * dt)
        if k:
            x += float(np.sum(tr.law.sample(rng, k)))
    var = component.gaussian ** 2 + (tr.small_variance if gaussian_substitution else 0.0)
    if var > 0:
        x += math.sqrt(var * dt) * rng.standard_normal()
    return x


def sample_levy_increment(component: LevyComponentSpec, dt: float, rng) -> float:
    """Exact increment over ``dt`` of a finite-activity component."""
    if not component.finite_activity:
        raise ValueError("component has infinite activity; use sample_truncated_levy_segment")
    rng = as_generator(rng)
    j = component.jumps
    x = component.drift * dt
    if j is not None:
        k = rng.poisson(j.rate * dt)
        if k:
            x += float(np.sum(j.law.sample(rng, k)))
    if component.gaussian > 0:
        x += component.gaussian * math.sqrt(dt) * rng.standard_normal()
    return x


def sample_truncated_levy_segment(component: LevyComponentSpec, eps: float, dt: float, rng,
                                  gaussian_substitution: bool = False) -> float:
    """Increment over ``dt`` with jumps ``|x| <= eps`` replaced by their mean (and optionally variance)."""
    rng = as_generator(rng)
    j = component.jumps
    if isinstance(j, CompoundPoisson):
        # draw exactly like the exact sampler, then drop the small jumps
        x = component.drift * dt
        k = rng.poisson(j.rate * dt)
        if k:
            sizes = j.law.sample(rng, k)
            small = np.abs(sizes) <= eps
            x += float(np.sum(sizes[~small]))
            tr = truncate_jumps(component, eps)
            x += tr.drift_shift * dt
        if component.gaussian > 0:
            x += component.gaussian * math.sqrt(dt) * rng.standard_normal()
        return x
    return _increment_from_truncation(component, truncate_jumps(component, eps), dt, rng, gaussian_substitution)


def coupled_truncation_increments(component: LevyComponentSpec, eps_list, dt: float, n: int, rng) -> np.ndarray:
    """Increments at several cutoffs driven by the same jumps.

    Jumps beyond the smallest cutoff are drawn once per replicate; the
    increment at cutoff ``eps`` keeps the jumps with ``|x| > eps`` and applies
    the drift correction of that cutoff. Returns an array of shape
    ``(len(eps_list), n)``.
    """
    rng = as_generator(rng)
    eps_list = [float(e) for e in eps_list]
    finest = truncate_jumps(component, min(eps_list))
    trs = [truncate_jumps(component, e) for e in eps_list]
    out = np.empty((len(eps_list), n))
    counts = rng.poisson(finest.rate * dt, n)
    sizes = finest.law.sample(rng, int(counts.sum())) if finest.law is not None and counts.sum() else np.empty(0)
    owner = np.repeat(np.arange(n), counts)
    for r, tr in enumerate(trs):
        keep = np.abs(sizes) > tr.eps
        out[r] = (component.drift + tr.drift_shift) * dt + np.bincount(owner[keep], weights=sizes[keep], minlength=n)
    return out
