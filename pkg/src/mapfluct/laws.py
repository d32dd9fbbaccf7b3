"""Parametric one-dimensional measures used as jump laws.

Every law exposes its upper tail, density, atoms, moments and transforms in
closed form where the family allows it, and falls back to adaptive
quadrature otherwise. Sampling goes through a flat table of "leaves" (one per
elementary piece with an explicit quantile function) so that the Python
sampler and the compiled path kernels share the exact same algorithm.

Most laws are probability measures. The log-stable family is an infinite
Lévy measure (it has a non-integrable singularity at 0); it can still be
restricted to a set bounded away from 0, which yields a finite law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate, special

from ._accel import njit

INF = math.inf

# leaf kinds understood by the compiled sampler
LEAF_EXP, LEAF_PARETO, LEAF_POINT, LEAF_UNIFORM, LEAF_LOGSTABLE_UP, LEAF_LOGSTABLE_DOWN, LEAF_SIGNFLIP = range(7)


@dataclass(frozen=True)
class Moment:
    """Tri-state moment: ``finite`` tells whether the integral converges."""

    finite: bool
    value: float = INF

    @classmethod
    def infinite(cls) -> "Moment":
        return cls(False, INF)


@dataclass(frozen=True)
class TailDecay:
    """Qualitative decay of one tail: 'bounded', 'exp' (with rate) or 'power' (with index)."""

    kind: str
    rate: float = INF

    def worse(self, other: "TailDecay") -> "TailDecay":
        order = {"power": 0, "exp": 1, "bounded": 2}
        if order[self.kind] != order[other.kind]:
            return self if order[self.kind] < order[other.kind] else other
        return self if self.rate <= other.rate else other


def _quad(f, a, b, **kw):
    opts = dict(epsabs=1e-13, epsrel=1e-12, limit=400)
    opts.update(kw)
    return integrate.quad(f, a, b, **opts)[0]


def _finite_product(g, pdf, x):
    # far out in a light tail the weight may overflow while the density underflows
    with np.errstate(over="ignore", invalid="ignore"):
        v = float(g(x) * pdf(x))
    return v if math.isfinite(v) else 0.0


class JumpLaw:
    """Base class; subclasses are frozen dataclasses."""

    # ---- structure -------------------------------------------------------
    @property
    def total_mass(self) -> float:
        return 1.0

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def atoms(self) -> list[tuple[float, float]]:
        return []

    def density_intervals(self) -> list[tuple[float, float]]:
        return []

    def upper_decay(self) -> TailDecay:
        raise NotImplementedError

    def lower_decay(self) -> TailDecay:
        raise NotImplementedError

    # ---- pointwise -------------------------------------------------------
    def pdf(self, x):
        raise NotImplementedError

    def tail(self, y):
        """Mass of ``(y, inf)``."""
        raise NotImplementedError

    def atom_mass(self, y) -> float:
        return float(sum(w for loc, w in self.atoms() if loc == y))

    def cdf(self, y):
        """Mass of ``(-inf, y]`` divided by the total mass."""
        m = self.total_mass
        if not math.isfinite(m):
            raise ValueError("cdf undefined for an infinite measure")
        return 1.0 - np.asarray(self.tail(y), dtype=float) / m

    def mass_between(self, lo: float, hi: float) -> float:
        """Mass of ``(lo, hi]``."""
        if hi <= lo:
            return 0.0
        return float(self.tail(lo) - self.tail(hi))

    def positive_mass(self) -> float:
        return float(self.tail(0.0))

    # ---- moments and transforms -----------------------------------------
    def mean(self) -> float:
        return self._numeric_moment(lambda x: x)

    def mgf(self, s):
        """``E[exp(s X)]`` for real or complex ``s`` (normalized to the total mass 1)."""
        return self._numeric_mgf(complex(s))

    def mgf_deriv(self, s):
        """``E[X exp(s X)]``."""
        return self._numeric_mgf(complex(s), power=1)

    def laplace(self, lam):
        """``E[exp(-lam X)]``."""
        return self.mgf(-lam)

    def exponential_moment(self, lam: float, lower: float | None = None) -> Moment:
        """``int_{(lower, inf)} exp(lam x) law(dx)``; whole line when ``lower`` is None."""
        decay = self.upper_decay()
        if lam > 0 and not (decay.kind == "bounded" or (decay.kind == "exp" and lam < decay.rate)):
            return Moment.infinite()
        if lower is None and lam < 0:
            low = self.lower_decay()
            if not (low.kind == "bounded" or (low.kind == "exp" and -lam < low.rate)):
                return Moment.infinite()
        return Moment(True, self._integrate_against(lambda x: np.exp(lam * x), lower))

    def power_moment(self, p: float, lower: float = 1.0) -> Moment:
        """``int_{(lower, inf)} x^p law(dx)`` for ``lower > 0``."""
        if lower <= 0:
            raise ValueError("lower must be positive")
        decay = self.upper_decay()
        if decay.kind == "power" and p >= decay.rate:
            return Moment.infinite()
        return Moment(True, self._integrate_against(lambda x: x ** p, lower))

    # ---- operations ------------------------------------------------------
    def negated(self) -> "JumpLaw":
        return Negated(self)

    def sample(self, rng: np.random.Generator, size=None):
        table = sampling_table([self])
        n = 1 if size is None else int(np.prod(size))
        out = sample_table_numpy(table, 0, rng, n)
        return out[0] if size is None else out.reshape(size)

    # ---- numeric fallbacks -----------------------------------------------
    def _integrate_against(self, g, lower=None) -> float:
        total = 0.0
        for a, b in self.density_intervals():
            if lower is not None:
                a = max(a, lower)
            if b <= a:
                continue
            total += _quad(lambda x: _finite_product(g, self.pdf, x), a, b)
        for loc, w in self.atoms():
            if lower is None or loc > lower:
                total += w * g(loc)
        return float(total)

    def _numeric_moment(self, g) -> float:
        up, low = self.upper_decay(), self.lower_decay()
        if up.kind == "power" and up.rate <= 1.0:
            if low.kind == "power" and low.rate <= 1.0:
                return math.nan
            return INF
        if low.kind == "power" and low.rate <= 1.0:
            return -INF
        return self._integrate_against(g) / self.total_mass

    def _numeric_mgf(self, s: complex, power: int = 0) -> complex:
        re, im = s.real, s.imag
        total = 0j
        for a, b in self.density_intervals():
            def base(x, a=a):
                return (x ** power) * math.exp(re * x) * float(self.pdf(x))

            if im == 0.0 or not math.isinf(b) or not math.isfinite(a):
                if im == 0.0:
                    total += _quad(base, a, b)
                else:
                    total += _quad(lambda x: base(x) * math.cos(im * x), a, b) + 1j * _quad(
                        lambda x: base(x) * math.sin(im * x), a, b)
            else:
                # oscillatory half-line integral (QAWF)
                w = abs(im)
                c = integrate.quad(base, a, INF, weight="cos", wvar=w, limlst=200)[0]
                sn = integrate.quad(base, a, INF, weight="sin", wvar=w, limlst=200)[0]
                total += c + 1j * math.copysign(1.0, im) * sn
        for loc, wt in self.atoms():
            total += wt * (loc ** power) * complex(math.exp(re * loc)) * complex(math.cos(im * loc), math.sin(im * loc))
        return total / self.total_mass


# --------------------------------------------------------------------------
# elementary families
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Exponential(JumpLaw):
    """Exponential law with the given rate."""

    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("Exponential rate must be positive")

    def support(self):
        return (0.0, INF)

    def density_intervals(self):
        return [(0.0, INF)]

    def upper_decay(self):
        return TailDecay("exp", self.rate)

    def lower_decay(self):
        return TailDecay("bounded")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def tail(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y >= 0, np.exp(-self.rate * np.maximum(y, 0.0)), 1.0)

    def mean(self):
        return 1.0 / self.rate

    def mgf(self, s):
        return self.rate / (self.rate - s)

    def mgf_deriv(self, s):
        return self.rate / (self.rate - s) ** 2

    def exponential_moment(self, lam, lower=None):
        if lam >= self.rate:
            return Moment.infinite()
        lo = 0.0 if lower is None else max(lower, 0.0)
        return Moment(True, self.rate * math.exp((lam - self.rate) * lo) / (self.rate - lam))


@dataclass(frozen=True)
class Pareto(JumpLaw):
    """Pareto law with tail ``(scale / y) ** index`` above ``scale``."""

    index: float
    scale: float = 1.0

    def __post_init__(self):
        if not (self.index > 0 and self.scale > 0):
            raise ValueError("Pareto index and scale must be positive")

    def support(self):
        return (self.scale, INF)

    def density_intervals(self):
        return [(self.scale, INF)]

    def upper_decay(self):
        return TailDecay("power", self.index)

    def lower_decay(self):
        return TailDecay("bounded")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        a, m = self.index, self.scale
        return np.where(x >= m, a * m ** a / np.maximum(x, m) ** (a + 1), 0.0)

    def tail(self, y):
        y = np.asarray(y, dtype=float)
        return np.where(y >= self.scale, (self.scale / np.maximum(y, self.scale)) ** self.index, 1.0)

    def mean(self):
        a = self.index
        return a * self.scale / (a - 1.0) if a > 1 else INF

    def power_moment(self, p, lower=1.0):
        if lower <= 0:
            raise ValueError("lower must be positive")
        a, m = self.index, self.scale
        if p >= a:
            return Moment.infinite()
        lo = max(lower, m)
        return Moment(True, a * m ** a * lo ** (p - a) / (a - p))


@dataclass(frozen=True)
class PointMass(JumpLaw):
    """Dirac mass at ``location``."""

    location: float

    def support(self):
        return (self.location, self.location)

    def atoms(self):
        return [(self.location, 1.0)]

    def upper_decay(self):
        return TailDecay("bounded")

    def lower_decay(self):
        return TailDecay("bounded")

    def pdf(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def tail(self, y):
        return np.where(np.asarray(y, dtype=float) < self.location, 1.0, 0.0)

    def mean(self):
        return self.location

    def mgf(self, s):
        return np.exp(s * self.location)

    def mgf_deriv(self, s):
        return self.location * np.exp(s * self.location)


def _expm1_ratio(z):
    """``(exp(z) - 1) / z`` with the removable singularity handled."""
    z = complex(z)
    if abs(z) < 1e-8:
        return 1.0 + z / 2.0
    return complex(np.expm1(z)) / z


def _expm1_ratio_deriv(z):
    """Derivative of ``(exp(z) - 1) / z``."""
    z = complex(z)
    if abs(z) < 1e-3:
        return 0.5 + z / 3.0 + z * z / 8.0 + z ** 3 / 30.0
    return (z * np.exp(z) - np.expm1(z)) / (z * z)


@dataclass(frozen=True)
class UniformInterval(JumpLaw):
    """Uniform law on ``[lo, hi]``."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ValueError("UniformInterval needs hi > lo")

    def support(self):
        return (self.lo, self.hi)

    def density_intervals(self):
        return [(self.lo, self.hi)]

    def upper_decay(self):
        return TailDecay("bounded")

    def lower_decay(self):
        return TailDecay("bounded")

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def tail(self, y):
        y = np.asarray(y, dtype=float)
        return np.clip((self.hi - y) / (self.hi - self.lo), 0.0, 1.0)

    def mean(self):
        return 0.5 * (self.lo + self.hi)

    def mgf(self, s):
        w = self.hi - self.lo
        val = np.exp(s * self.lo) * _expm1_ratio(s * w)
        return val if isinstance(s, complex) else (val.real if np.isrealobj(s) else val)

    def mgf_deriv(self, s):
        w = self.hi - self.lo
        z = s * w
        val = np.exp(s * self.lo) * (self.lo * _expm1_ratio(z) + w * _expm1_ratio_deriv(z))
        return val if isinstance(s, complex) else (val.real if np.isrealobj(s) else val)


@dataclass(frozen=True)
class Negated(JumpLaw):
    """Law of ``-X`` for ``X`` distributed as ``inner``."""

    inner: JumpLaw

    @property
    def total_mass(self):
        return self.inner.total_mass

    def negated(self):
        return self.inner

    def support(self):
        lo, hi = self.inner.support()
        return (-hi, -lo)

    def atoms(self):
        return [(-loc, w) for loc, w in self.inner.atoms()]

    def density_intervals(self):
        return sorted((-b, -a) for a, b in self.inner.density_intervals())

    def upper_decay(self):
        return self.inner.lower_decay()

    def lower_decay(self):
        return self.inner.upper_decay()

    def pdf(self, x):
        return self.inner.pdf(-np.asarray(x, dtype=float))

    def tail(self, y):
        # P(-X > y) = P(X < -y) = total - P(X >= -y)
        y = np.asarray(y, dtype=float)
        t = self.inner.tail(-y)
        closed = np.vectorize(lambda v: self.inner.atom_mass(v), otypes=[float])(-y) if self.inner.atoms() else 0.0
        return self.inner.total_mass - t - closed

    def mean(self):
        return -self.inner.mean()

    def mgf(self, s):
        return self.inner.mgf(-s)

    def mgf_deriv(self, s):
        return -self.inner.mgf_deriv(-s)


@dataclass(frozen=True)
class FiniteMixture(JumpLaw):
    """Weighted sum of laws; a probability law when the weights sum to 1."""

    weights: tuple[float, ...]
    laws: tuple[JumpLaw, ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "laws", tuple(self.laws))
        if len(self.weights) != len(self.laws) or not self.laws:
            raise ValueError("FiniteMixture needs matching non-empty weights and laws")
        if any(w < 0 for w in self.weights):
            raise ValueError("mixture weights must be nonnegative")

    @property
    def total_mass(self):
        return float(sum(w * law.total_mass for w, law in zip(self.weights, self.laws)))

    def negated(self):
        return FiniteMixture(self.weights, tuple(law.negated() for law in self.laws))

    def support(self):
        parts = [law.support() for w, law in zip(self.weights, self.laws) if w > 0]
        return (min(p[0] for p in parts), max(p[1] for p in parts))

    def atoms(self):
        merged: dict[float, float] = {}
        for w, law in zip(self.weights, self.laws):
            for loc, m in law.atoms():
                merged[loc] = merged.get(loc, 0.0) + w * m
        return sorted((k, v) for k, v in merged.items() if v > 0)

    def density_intervals(self):
        ivs = []
        for w, law in zip(self.weights, self.laws):
            if w > 0:
                ivs.extend(law.density_intervals())
        return _merge_intervals(ivs)

    def upper_decay(self):
        out = TailDecay("bounded")
        for w, law in zip(self.weights, self.laws):
            if w > 0:
                out = out.worse(law.upper_decay())
        return out

    def lower_decay(self):
        out = TailDecay("bounded")
        for w, law in zip(self.weights, self.laws):
            if w > 0:
                out = out.worse(law.lower_decay())
        return out

    def pdf(self, x):
        return sum(w * law.pdf(x) for w, law in zip(self.weights, self.laws))

    def tail(self, y):
        return sum(w * law.tail(y) for w, law in zip(self.weights, self.laws))

    def mean(self):
        means = [law.mean() for w, law in zip(self.weights, self.laws) if w > 0]
        ws = [w * law.total_mass for w, law in zip(self.weights, self.laws) if w > 0]
        if any(math.isnan(m) for m in means) or (INF in means and -INF in means):
            return math.nan
        return float(sum(w * m for w, m in zip(ws, means)) / sum(ws))

    def _combine(self, method, s):
        tm = self.total_mass
        return sum(w * law.total_mass * getattr(law, method)(s) for w, law in zip(self.weights, self.laws)) / tm

    def mgf(self, s):
        return self._combine("mgf", s)

    def mgf_deriv(self, s):
        return self._combine("mgf_deriv", s)

    def exponential_moment(self, lam, lower=None):
        parts = [law.exponential_moment(lam, lower) for law in self.laws]
        if any(not p.finite for w, p in zip(self.weights, parts) if w > 0):
            return Moment.infinite()
        return Moment(True, float(sum(w * p.value for w, p in zip(self.weights, parts))))

    def power_moment(self, p, lower=1.0):
        parts = [law.power_moment(p, lower) for law in self.laws]
        if any(not q.finite for w, q in zip(self.weights, parts) if w > 0):
            return Moment.infinite()
        return Moment(True, float(sum(w * q.value for w, q in zip(self.weights, parts))))


@dataclass(frozen=True)
class Binned(JumpLaw):
    """Piecewise-uniform law on bins plus an atom at ``edges[0]``.

    Used for estimated ladder laws. ``masses`` and ``atom`` are normalized to
    total mass 1 on construction.
    """

    edges: tuple[float, ...]
    masses: tuple[float, ...]
    atom: float = 0.0

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=float)
        m = np.asarray(self.masses, dtype=float)
        if e.ndim != 1 or len(e) != len(m) + 1 or np.any(np.diff(e) <= 0):
            raise ValueError("Binned needs strictly increasing edges and one mass per bin")
        if np.any(m < 0) or self.atom < 0:
            raise ValueError("Binned masses must be nonnegative")
        tot = m.sum() + self.atom
        if not tot > 0:
            raise ValueError("Binned law has zero mass")
        object.__setattr__(self, "edges", tuple(float(v) for v in e))
        object.__setattr__(self, "masses", tuple(float(v) for v in m / tot))
        object.__setattr__(self, "atom", float(self.atom / tot))

    def _uniforms(self):
        e = self.edges
        return [(w, UniformInterval(e[k], e[k + 1])) for k, w in enumerate(self.masses) if w > 0]

    def _as_mixture(self):
        parts = self._uniforms()
        if self.atom > 0:
            parts.append((self.atom, PointMass(self.edges[0])))
        return FiniteMixture(tuple(w for w, _ in parts), tuple(law for _, law in parts))

    def support(self):
        return self._as_mixture().support()

    def atoms(self):
        return [(self.edges[0], self.atom)] if self.atom > 0 else []

    def density_intervals(self):
        return _merge_intervals([(u.lo, u.hi) for _, u in self._uniforms()])

    def upper_decay(self):
        return TailDecay("bounded")

    def lower_decay(self):
        return TailDecay("bounded")

    def pdf(self, x):
        return self._as_mixture().pdf(x)

    def tail(self, y):
        return self._as_mixture().tail(y)

    def mean(self):
        return self._as_mixture().mean()

    def mgf(self, s):
        return self._as_mixture().mgf(s)

    def mgf_deriv(self, s):
        return self._as_mixture().mgf_deriv(s)


@dataclass(frozen=True)
class LogStable(JumpLaw):
    """Lévy measure ``exp(x) * pi(side * (exp(x) - 1)) dx`` of a log-transformed stable process.

    ``pi`` is the stable Lévy density ``c_plus u^(-alpha-1)`` for ``u > 0`` and
    ``c_minus |u|^(-alpha-1)`` for ``u < 0`` with the constants fixed by the
    stability index ``alpha`` in (0, 1) and positivity ``rho``. ``side`` is
    ``+1`` (phase of positive values) or ``-1``. The measure is infinite near
    0; moments and transforms refer to the measure, not a normalized law.
    """

    alpha: float
    rho: float
    side: int = 1

    def __post_init__(self):
        if not (0 < self.alpha < 1):
            raise ValueError("LogStable requires alpha in (0, 1)")
        if not (0 < self.rho < 1):
            raise ValueError("LogStable requires rho in (0, 1)")
        if self.side not in (1, -1):
            raise ValueError("side must be +1 or -1")

    @property
    def stable_constants(self) -> tuple[float, float]:
        return stable_levy_constants(self.alpha, self.rho)

    @property
    def _c_up_down(self):
        cp, cm = self.stable_constants
        return (cp, cm) if self.side == 1 else (cm, cp)

    @property
    def total_mass(self):
        return INF

    def support(self):
        return (-INF, INF)

    def density_intervals(self):
        return [(-INF, 0.0), (0.0, INF)]

    def upper_decay(self):
        return TailDecay("exp", self.alpha)

    def lower_decay(self):
        return TailDecay("exp", 1.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        up, down = self._c_up_down
        a = self.alpha
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            xp = np.maximum(x, 0.0)
            xn = np.minimum(x, 0.0)
            # e^x (e^x - 1)^(-a-1) = e^(-a x) (1 - e^(-x))^(-a-1) for x > 0
            pos = up * np.exp(-a * xp) * (-np.expm1(-xp)) ** (-a - 1)
            neg = down * np.exp(xn) * (-np.expm1(xn)) ** (-a - 1)
        out = np.where(x > 0, pos, np.where(x < 0, neg, INF))
        return out if out.ndim else float(out)

    def tail(self, y):
        """Mass of ``(y, inf)``; infinite for ``y <= 0``."""
        y = np.asarray(y, dtype=float)
        up, _ = self._c_up_down
        a = self.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            val = up * np.expm1(np.maximum(y, 1e-300)) ** (-a) / a
        return np.where(y > 0, val, INF)

    def lower_tail(self, y):
        """Mass of ``(-inf, y)`` for ``y < 0``."""
        y = np.asarray(y, dtype=float)
        _, down = self._c_up_down
        a = self.alpha
        with np.errstate(divide="ignore", invalid="ignore"):
            val = down * ((-np.expm1(np.minimum(y, -1e-300))) ** (-a) - 1.0) / a
        return np.where(y < 0, val, INF)

    def mass_between(self, lo, hi):
        if hi <= lo:
            return 0.0
        if lo >= 0:
            return float(self.tail(lo) - (self.tail(hi) if math.isfinite(hi) else 0.0))
        if hi <= 0:
            return float(self.lower_tail(hi) - (self.lower_tail(lo) if math.isfinite(lo) else 0.0))
        return INF

    def positive_mass(self):
        return INF

    def mean(self):
        """First moment ``int x Pi(dx)`` (finite since alpha < 1)."""
        f = lambda x: x * self.pdf(x)
        return _quad(f, 0, 1) + _quad(f, 1, INF) + _quad(f, -1, 0) + _quad(f, -INF, -1)

    def exponential_moment(self, lam, lower=None):
        if lower is None or lower <= 0:
            raise ValueError("LogStable is an infinite measure; give lower > 0")
        if lam >= self.alpha:
            return Moment.infinite()
        return Moment(True, self.truncated_exponential_integral(lam, lower, INF))

    def truncated_exponential_integral(self, lam: float, lower: float, upper: float) -> float:
        """``int_lower^upper exp(lam x) Pi(dx)``, for probing divergence numerically."""
        # Pi(dx) = c e^(-a x) (1 - e^(-x))^(-a-1) dx on x > 0, evaluated without overflow
        up, _ = self._c_up_down
        a = self.alpha
        g = lambda x: up * math.exp((lam - a) * x) * (-math.expm1(-x)) ** (-a - 1)
        if math.isinf(upper):
            return _quad(g, lower, INF)
        total, k = 0.0, lower
        while k < upper:
            nxt = min(upper, k + 25.0)
            total += _quad(g, k, nxt)
            k = nxt
        return total

    def char_integral(self, theta: float) -> complex:
        """``int (exp(i theta x) - 1) Pi(dx)`` (no compensation: finite variation)."""
        if theta == 0:
            return 0j
        pdf = self.pdf
        re = lambda x: (math.cos(theta * x) - 1.0) * pdf(x)
        im = lambda x: math.sin(theta * x) * pdf(x)
        pts = [(-INF, -1.0), (-1.0, 0.0), (0.0, 1.0), (1.0, INF)]
        r = sum(_quad(re, a, b) for a, b in pts)
        i = sum(_quad(im, a, b) for a, b in pts)
        return complex(r, i)

    def negated(self):
        return Negated(self)


@dataclass(frozen=True)
class SignFlipLog(JumpLaw):
    """Law with density ``alpha exp(x) / (1 + exp(x))^(alpha + 1)`` on the real line.

    It is the law of ``log|1 + U|`` for a stable jump ``U < -1`` that flips
    the sign of a unit starting point; the upper tail is
    ``(1 + exp(y))^(-alpha)``.
    """

    alpha: float

    def __post_init__(self):
        if not (0 < self.alpha < 2):
            raise ValueError("alpha must lie in (0, 2)")

    def support(self):
        return (-INF, INF)

    def density_intervals(self):
        return [(-INF, INF)]

    def upper_decay(self):
        return TailDecay("exp", self.alpha)

    def lower_decay(self):
        return TailDecay("exp", 1.0)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        a = self.alpha
        # alpha e^x (1 + e^x)^(-a-1), written to avoid overflow for large x
        xp, xn = np.maximum(x, 0.0), np.minimum(x, 0.0)
        out = np.where(x > 0, a * np.exp(-a * xp) * (1.0 + np.exp(-xp)) ** (-a - 1),
                       a * np.exp(xn) * (1.0 + np.exp(xn)) ** (-a - 1))
        return out if out.ndim else float(out)

    def tail(self, y):
        y = np.asarray(y, dtype=float)
        a = self.alpha
        out = np.where(y > 0, np.exp(-a * y) * (1.0 + np.exp(-np.abs(y))) ** (-a), (1.0 + np.exp(np.minimum(y, 0.0))) ** (-a))
        return out if out.ndim else float(out)

    def mean(self):
        return float(special.digamma(1.0) - special.digamma(self.alpha))

    def mgf(self, s):
        # alpha B(1 + s, alpha - s) for -1 < Re s < alpha
        s = complex(s)
        a = self.alpha
        if not (-1.0 < s.real < a):
            return complex(INF)
        return complex(a * np.exp(special.loggamma(1.0 + s) + special.loggamma(a - s) - special.loggamma(1.0 + a)))

    def mgf_deriv(self, s):
        s = complex(s)
        a = self.alpha
        if not (-1.0 < s.real < a):
            return complex(INF)
        return self.mgf(s) * complex(special.digamma(1.0 + s) - special.digamma(a - s))


@dataclass(frozen=True)
class Truncated(JumpLaw):
    """``inner`` conditioned on ``(lower, upper]`` (renormalized to mass 1).

    For an infinite ``inner`` measure this is the normalized restriction, which
    requires the interval to stay away from the singularity.
    """

    inner: JumpLaw
    lower: float = -INF
    upper: float = INF

    def __post_init__(self):
        if not self.upper > self.lower:
            raise ValueError("Truncated needs upper > lower")
        m = self.inner.mass_between(self.lower, self.upper) + self._lower_atom()
        if not (m > 0 and math.isfinite(m)):
            raise ValueError("truncation interval must carry finite positive mass")

    def _lower_atom(self):
        return 0.0  # (lower, upper] excludes the lower end point

    @property
    def _norm(self):
        return self.inner.mass_between(self.lower, self.upper)

    def support(self):
        lo, hi = self.inner.support()
        return (max(lo, self.lower), min(hi, self.upper))

    def atoms(self):
        m = self._norm
        return [(loc, w / m) for loc, w in self.inner.atoms() if self.lower < loc <= self.upper]

    def density_intervals(self):
        out = []
        for a, b in self.inner.density_intervals():
            a2, b2 = max(a, self.lower), min(b, self.upper)
            if b2 > a2:
                out.append((a2, b2))
        return out

    def upper_decay(self):
        return TailDecay("bounded") if math.isfinite(self.upper) else self.inner.upper_decay()

    def lower_decay(self):
        return TailDecay("bounded") if math.isfinite(self.lower) else self.inner.lower_decay()

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        inside = (x > self.lower) & (x <= self.upper)
        with np.errstate(invalid="ignore"):
            vals = self.inner.pdf(np.where(inside, x, 0.5 * (max(self.lower, -1e300) + min(self.upper, 1e300))))
        return np.where(inside, vals / self._norm, 0.0)

    def tail(self, y):
        y = np.asarray(y, dtype=float)
        lo = np.maximum(y, self.lower)
        out = np.vectorize(lambda v: self.inner.mass_between(v, self.upper), otypes=[float])(lo)
        return np.where(y < self.upper, out / self._norm, 0.0)

    def mean(self):
        if isinstance(self.inner, Exponential) and self.lower <= 0:
            return float(self.mgf_deriv(0.0).real)
        return super().mean()

    def mgf(self, s):
        if isinstance(self.inner, Exponential) and self.lower <= 0 and math.isfinite(self.upper):
            # int_0^c mu e^{(s-mu)x} dx / (1 - e^{-mu c})
            mu, c = self.inner.rate, self.upper
            z = (s - mu) * c
            return mu * c * _expm1_ratio(z) / (-math.expm1(-mu * c))
        return super().mgf(s)


def _merge_intervals(ivs):
    ivs = sorted(ivs)
    out: list[list[float]] = []
    for a, b in ivs:
        if out and a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return [tuple(v) for v in out]


def stable_levy_constants(alpha: float, rho: float) -> tuple[float, float]:
    """Lévy density constants ``(c_plus, c_minus)`` of the normalized strictly stable law."""
    g = special.gamma(alpha + 1.0) / math.pi
    return g * math.sin(math.pi * alpha * rho), g * math.sin(math.pi * alpha * (1.0 - rho))


def stable_tail_constants(alpha: float, c_plus: float, c_minus: float) -> tuple[float, float]:
    """Masses of ``(1, inf)`` and ``(-inf, -1)`` under the power-law stable Lévy density."""
    return c_plus / alpha, c_minus / alpha


# --------------------------------------------------------------------------
# flat sampling tables
# --------------------------------------------------------------------------


def _leaves(law: JumpLaw, lo: float, hi: float, sign: float) -> list[tuple]:
    """Decompose ``law`` restricted to ``(lo, hi]`` (outer variable) into leaves.

    Each leaf is ``(weight, kind, p0, p1, p2, sign, u_lo, u_hi)`` where the
    weight is the (unnormalized) mass of the piece and a draw is
    ``sign * quantile(kind, p, u_lo + (u_hi - u_lo) * U)``.
    """
    # interval in the law's own variable
    a, b = (lo, hi) if sign > 0 else (-hi, -lo)
    if isinstance(law, Negated):
        return _leaves(law.inner, lo, hi, -sign)
    if isinstance(law, FiniteMixture):
        out = []
        for w, sub in zip(law.weights, law.laws):
            if w > 0:
                out.extend((w * leaf[0],) + leaf[1:] for leaf in _leaves(sub, lo, hi, sign))
        return out
    if isinstance(law, Binned):
        return _leaves(law._as_mixture(), lo, hi, sign)
    if isinstance(law, Truncated):
        # the truncation bounds live in the law's own variable
        a2, b2 = max(a, law.lower), min(b, law.upper)
        if b2 <= a2:
            return []
        lo2, hi2 = (a2, b2) if sign > 0 else (-b2, -a2)
        norm = law._norm
        return [(leaf[0] / norm,) + leaf[1:] for leaf in _leaves(law.inner, lo2, hi2, sign)]
    if isinstance(law, PointMass):
        inside = a < law.location <= b if sign > 0 else a <= law.location < b
        return [(1.0, LEAF_POINT, law.location, 0.0, 0.0, sign, 0.0, 1.0)] if inside else []
    if isinstance(law, Exponential):
        F = lambda y: 0.0 if y <= 0 else (1.0 if math.isinf(y) else -math.expm1(-law.rate * y))
        ulo, uhi = F(a), F(b)
        return [(uhi - ulo, LEAF_EXP, law.rate, 0.0, 0.0, sign, ulo, uhi)] if uhi > ulo else []
    if isinstance(law, Pareto):
        F = lambda y: 0.0 if y <= law.scale else (1.0 if math.isinf(y) else 1.0 - (law.scale / y) ** law.index)
        ulo, uhi = F(a), F(b)
        return [(uhi - ulo, LEAF_PARETO, law.index, law.scale, 0.0, sign, ulo, uhi)] if uhi > ulo else []
    if isinstance(law, UniformInterval):
        F = lambda y: min(max((y - law.lo) / (law.hi - law.lo), 0.0), 1.0)
        ulo, uhi = F(a), F(b)
        return [(uhi - ulo, LEAF_UNIFORM, law.lo, law.hi, 0.0, sign, ulo, uhi)] if uhi > ulo else []
    if isinstance(law, SignFlipLog):
        al = law.alpha
        F = lambda y: 0.0 if y == -INF else (1.0 if y == INF else 1.0 - float(law.tail(y)))
        ulo, uhi = F(a), F(b)
        return [(uhi - ulo, LEAF_SIGNFLIP, al, 0.0, 0.0, sign, ulo, uhi)] if uhi > ulo else []
    if isinstance(law, LogStable):
        out = []
        al = law.alpha
        up, down = law._c_up_down
        pa, pb = max(a, 0.0), b
        if pb > pa:
            if pa <= 0:
                raise ValueError("cannot sample a LogStable measure near 0; truncate away from 0")
            s_lo = math.expm1(pa) ** (-al)
            s_hi = 0.0 if math.isinf(pb) else math.expm1(pb) ** (-al)
            out.append((up * (s_lo - s_hi) / al, LEAF_LOGSTABLE_UP, al, s_lo, s_hi, sign, 0.0, 1.0))
        na, nb = a, min(b, 0.0)
        if nb > na:
            if nb >= 0:
                raise ValueError("cannot sample a LogStable measure near 0; truncate away from 0")
            r_lo = 1.0 if math.isinf(na) else (-math.expm1(na)) ** (-al)
            r_hi = (-math.expm1(nb)) ** (-al)
            out.append((down * (r_hi - r_lo) / al, LEAF_LOGSTABLE_DOWN, al, r_lo, r_hi, sign, 0.0, 1.0))
        return out
    raise TypeError(f"no sampler for {type(law).__name__}")


@dataclass(frozen=True)
class SamplingTable:
    """Flat leaf arrays for several laws; law ``k`` owns rows ``start[k]:stop[k]``."""

    cumw: np.ndarray  # cumulative normalized weight within each law
    kind: np.ndarray
    params: np.ndarray  # (rows, 3)
    sign: np.ndarray
    ulo: np.ndarray
    uhi: np.ndarray
    start: np.ndarray
    stop: np.ndarray

    def as_tuple(self):
        return (self.cumw, self.kind, self.params, self.sign, self.ulo, self.uhi, self.start, self.stop)


def sampling_table(laws: Sequence[JumpLaw | None]) -> SamplingTable:
    """Build one table for a list of laws (``None`` entries get an empty range)."""
    rows, start, stop = [], [], []
    for law in laws:
        start.append(len(rows))
        if law is not None:
            leaves = _leaves(law, -INF, INF, 1.0)
            tot = sum(leaf[0] for leaf in leaves)
            if not (tot > 0 and math.isfinite(tot)):
                raise ValueError(f"law {law!r} has no finite positive mass to sample")
            acc = 0.0
            for k, leaf in enumerate(leaves):
                acc += leaf[0] / tot
                rows.append((1.0 if k == len(leaves) - 1 else acc,) + leaf[1:])
        stop.append(len(rows))
    if not rows:
        rows.append((1.0, LEAF_POINT, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0))
    arr = list(zip(*rows))
    return SamplingTable(
        cumw=np.array(arr[0], dtype=np.float64),
        kind=np.array(arr[1], dtype=np.int64),
        params=np.column_stack([np.array(arr[2]), np.array(arr[3]), np.array(arr[4])]).astype(np.float64),
        sign=np.array(arr[5], dtype=np.float64),
        ulo=np.array(arr[6], dtype=np.float64),
        uhi=np.array(arr[7], dtype=np.float64),
        start=np.array(start, dtype=np.int64),
        stop=np.array(stop, dtype=np.int64),
    )


@njit
def leaf_quantile(kind, p0, p1, p2, u):
    """Quantile of a leaf at ``u`` in (0, 1)."""
    if kind == 0:
        return -math.log1p(-u) / p0
    if kind == 1:
        return p1 * (1.0 - u) ** (-1.0 / p0)
    if kind == 2:
        return p0
    if kind == 3:
        return p0 + u * (p1 - p0)
    if kind == 4:
        s = p1 - u * (p1 - p2)
        return math.log1p(s ** (-1.0 / p0))
    if kind == 5:
        r = p1 + u * (p2 - p1)
        return math.log(1.0 - r ** (-1.0 / p0))
    # kind 6: log((1 - u)^(-1/alpha) - 1)
    return math.log(math.expm1(-math.log1p(-u) / p0))


@njit
def draw_from_table(cumw, kind, params, sign, ulo, uhi, start, stop, law, rng):
    """One draw from law ``law`` of a sampling table."""
    a = start[law]
    b = stop[law]
    k = a
    if b - a > 1:
        v = rng.random()
        while k < b - 1 and cumw[k] < v:
            k += 1
    u = ulo[k] + (uhi[k] - ulo[k]) * rng.random()
    return sign[k] * leaf_quantile(kind[k], params[k, 0], params[k, 1], params[k, 2], u)


def sample_table_numpy(table: SamplingTable, law: int, rng: np.random.Generator, n: int) -> np.ndarray:
    """Vectorized draws from one law of a table."""
    a, b = int(table.start[law]), int(table.stop[law])
    if b == a:
        raise ValueError("empty law")
    if b - a > 1:
        k = a + np.searchsorted(table.cumw[a:b - 1], rng.random(n), side="left")
    else:
        k = np.full(n, a)
    u = table.ulo[k] + (table.uhi[k] - table.ulo[k]) * rng.random(n)
    out = np.empty(n)
    p = table.params
    for kind in np.unique(table.kind[k]):
        m = table.kind[k] == kind
        kk = k[m]
        uu = u[m]
        if kind == LEAF_EXP:
            x = -np.log1p(-uu) / p[kk, 0]
        elif kind == LEAF_PARETO:
            x = p[kk, 1] * (1.0 - uu) ** (-1.0 / p[kk, 0])
        elif kind == LEAF_POINT:
            x = p[kk, 0].copy()
        elif kind == LEAF_UNIFORM:
            x = p[kk, 0] + uu * (p[kk, 1] - p[kk, 0])
        elif kind == LEAF_LOGSTABLE_UP:
            s = p[kk, 1] - uu * (p[kk, 1] - p[kk, 2])
            x = np.log1p(s ** (-1.0 / p[kk, 0]))
        elif kind == LEAF_LOGSTABLE_DOWN:
            r = p[kk, 1] + uu * (p[kk, 2] - p[kk, 1])
            x = np.log(1.0 - r ** (-1.0 / p[kk, 0]))
        else:
            x = np.log(np.expm1(-np.log1p(-uu) / p[kk, 0]))
        out[m] = table.sign[kk] * x
    return out
