"""Experiment configuration: parsing, defaults and (de)serialization of specs and laws."""

from __future__ import annotations

import copy
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import laws
from .model import (CompoundPoisson, LadderSpec, LampertiStableJumps, LevyComponentSpec, MapSpec, StableJumps)

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

SCHEMA_VERSION = 1
DEFAULT_SEED = 20240917

KINDS = ("simulate", "overshoot", "resolvent-check", "stationary-check", "ladder-estimate", "vigon-check",
         "wiener-hopf-check", "tv-decay", "mixing", "lamperti")


class ConfigError(ValueError):
    """Malformed configuration; ``report`` carries a serialized validation report when available."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report


# --------------------------------------------------------------------------
# laws and specs
# --------------------------------------------------------------------------

LAW_KINDS = {
    "exponential": laws.Exponential,
    "pareto": laws.Pareto,
    "point": laws.PointMass,
    "uniform": laws.UniformInterval,
    "negated": laws.Negated,
    "mixture": laws.FiniteMixture,
    "binned": laws.Binned,
    "logstable": laws.LogStable,
    "signflip": laws.SignFlipLog,
    "truncated": laws.Truncated,
}
_LAW_NAMES = {cls: name for name, cls in LAW_KINDS.items()}


def _encode_float(v: float):
    return v if math.isfinite(v) else ("inf" if v > 0 else "-inf" if v < 0 else "nan")


def _decode_float(v) -> float:
    return float(v)


def law_to_dict(law: laws.JumpLaw | None):
    if law is None:
        return None
    name = _LAW_NAMES.get(type(law))
    if name is None:
        raise ConfigError(f"law {type(law).__name__} has no configuration form")
    out = {"kind": name}
    for f in dataclasses.fields(law):
        v = getattr(law, f.name)
        if isinstance(v, laws.JumpLaw):
            out[f.name] = law_to_dict(v)
        elif isinstance(v, tuple) and v and isinstance(v[0], laws.JumpLaw):
            out[f.name] = [law_to_dict(x) for x in v]
        elif isinstance(v, tuple):
            out[f.name] = [_encode_float(float(x)) for x in v]
        elif isinstance(v, float):
            out[f.name] = _encode_float(v)
        else:
            out[f.name] = v
    return out


def law_from_dict(d) -> laws.JumpLaw | None:
    if d is None or d == "none" or d == {}:
        return None
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(f"a law needs a 'kind' field, got {d!r}")
    cls = LAW_KINDS.get(d["kind"])
    if cls is None:
        raise ConfigError(f"unknown law kind {d['kind']!r}; known: {sorted(LAW_KINDS)}")
    kw = {}
    names = {f.name for f in dataclasses.fields(cls)}
    for k, v in d.items():
        if k == "kind":
            continue
        if k not in names:
            raise ConfigError(f"law {d['kind']!r} has no field {k!r}")
        if k in ("inner",):
            kw[k] = law_from_dict(v)
        elif k == "laws":
            kw[k] = tuple(law_from_dict(x) for x in v)
        elif isinstance(v, list):
            kw[k] = tuple(_decode_float(x) for x in v)
        elif isinstance(v, (int, float, str)) and k not in ("side",):
            kw[k] = _decode_float(v)
        else:
            kw[k] = v
    try:
        return cls(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid law {d!r}: {exc}") from exc


def _jumps_to_dict(j):
    if j is None:
        return None
    if isinstance(j, CompoundPoisson):
        return {"type": "cpp", "rate": j.rate, "law": law_to_dict(j.law)}
    if isinstance(j, StableJumps):
        return {"type": "stable", "alpha": j.alpha, "c_plus": j.c_plus, "c_minus": j.c_minus}
    if isinstance(j, LampertiStableJumps):
        return {"type": "lamperti-stable", "alpha": j.alpha, "rho": j.rho, "side": j.side, "negate": j.negate}
    raise ConfigError(f"jump spec {type(j).__name__} has no configuration form")


def _jumps_from_dict(d):
    if d is None or d == "none" or d == {}:
        return None
    t = d.get("type")
    if t == "cpp":
        return CompoundPoisson(float(d["rate"]), law_from_dict(d["law"]))
    if t == "stable":
        return StableJumps(float(d["alpha"]), float(d["c_plus"]), float(d["c_minus"]))
    if t == "lamperti-stable":
        return LampertiStableJumps(float(d["alpha"]), float(d["rho"]), int(d.get("side", 1)), bool(d.get("negate", False)))
    raise ConfigError(f"unknown jump type {t!r}")


def _grid_from(F, n):
    if F is None:
        return None
    if len(F) != n or any(len(row) != n for row in F):
        raise ConfigError(f"F must be an {n}x{n} grid")
    return [[law_from_dict(x) for x in row] for row in F]


def spec_to_dict(spec: MapSpec | LadderSpec) -> dict:
    Q = [[float(v) for v in row] for row in spec.Q]
    F = [[law_to_dict(x) for x in row] for row in spec.F]
    if isinstance(spec, LadderSpec):
        return {"type": "ladder", "drifts": list(spec.drifts), "killing": list(spec.killing), "Q": Q, "F": F,
                "jumps": [_jumps_to_dict(j) for j in spec.jumps]}
    comps = [{"drift": c.drift, "gaussian": c.gaussian, "jumps": _jumps_to_dict(c.jumps), "killing": c.killing}
             for c in spec.components]
    out = {"type": "map", "components": comps, "Q": Q, "F": F}
    if spec.labels is not None:
        out["labels"] = list(spec.labels)
    return out


def spec_from_dict(d: dict) -> MapSpec | LadderSpec:
    """Build a spec; ``type`` is ``map``, ``ladder`` or ``lamperti-stable`` (parameters ``alpha``, ``rho``)."""
    try:
        t = d.get("type", "map")
        if t == "lamperti-stable":
            from .lamperti import lamperti_stable_spec
            return lamperti_stable_spec(float(d["alpha"]), float(d["rho"]))
        Q = d["Q"]
        if t == "ladder":
            n = len(d["drifts"])
            jumps = d.get("jumps") or [None] * n
            return LadderSpec(tuple(float(v) for v in d["drifts"]), tuple(_jumps_from_dict(j) for j in jumps), Q,
                              _grid_from(d.get("F"), n), tuple(float(v) for v in d.get("killing") or [0.0] * n))
        if t == "map":
            comps = tuple(LevyComponentSpec(float(c.get("drift", 0.0)), float(c.get("gaussian", 0.0)),
                                            _jumps_from_dict(c.get("jumps")), float(c.get("killing", 0.0)))
                          for c in d["components"])
            labels = d.get("labels")
            return MapSpec(comps, Q, _grid_from(d.get("F"), len(comps)), tuple(labels) if labels else None)
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed spec: {exc!r}") from exc
    raise ConfigError(f"unknown spec type {t!r}")


# --------------------------------------------------------------------------
# experiment configuration
# --------------------------------------------------------------------------

# every parameter a kind reads, with its default; the manifest echoes the resolved values
DEFAULTS: dict[str, dict] = {
    "simulate": {"horizon": 10.0, "start_phase": 0, "start_value": 0.0, "eps": None},
    "overshoot": {"levels": [1.0, 2.0, 5.0], "start_phase": 0, "max_horizon": 1e6},
    "resolvent-check": {"lam": 1.0, "rate": 1.0, "coefs": None, "x": [0.0, 0.7], "phases": None,
                        "abs_tol": 0.01, "se_factor": 3.0},
    "stationary-check": {"t": 50.0, "start_value": 0.0, "start_phase": 1, "n_bins": 200, "tv_tol": 0.03,
                         "atom_tol": 0.01},
    "ladder-estimate": {"edges": [0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0, 4.0], "local_time": 50.0,
                        "max_horizon": 1e5, "gap_cap": 50.0},
    "vigon-check": {"edges": [round(0.1 * k, 10) for k in range(41)], "fit_range": [0.2, 2.0],
                    "local_time": 20.0, "ratio_range": [0.9, 1.1], "gap_cap": 40.0},
    "wiener-hopf-check": {"thetas": [0.2, 0.6, 1.0, 1.4, 1.8, 2.2, 2.6, 3.0], "batches": 10, "z_tol": 3.0,
                          "local_time": 20.0, "gap_cap": 40.0},
    "tv-decay": {"t_grid": [2.0, 5.0, 10.0, 20.0, 40.0], "start_value": 0.0, "start_phase": 1,
                 "model": "exponential", "n_bins": 200},
    "mixing": {"t_grid": [0.0, 2.0, 5.0, 10.0, 20.0, 40.0], "starts": 100, "n_bins": 100, "se_factor": 3.0},
    "lamperti": {"alpha": 0.5, "rho": 0.5, "round_trips": 100, "horizon": 5.0, "round_trip_tol": 1e-9},
}
DEFAULT_PATHS = {"simulate": 10, "overshoot": 10_000, "resolvent-check": 200_000, "stationary-check": 100_000,
                 "ladder-estimate": 20_000, "vigon-check": 100_000, "wiener-hopf-check": 40_000,
                 "tv-decay": 100_000, "mixing": 20_000, "lamperti": 100}
_NEEDS_SPEC = {"simulate": "map", "overshoot": "map", "resolvent-check": "ladder", "stationary-check": "ladder",
               "ladder-estimate": "map", "vigon-check": "map", "wiener-hopf-check": "map", "tv-decay": "ladder",
               "mixing": "ladder", "lamperti": None}


@dataclass
class ExperimentConfig:
    kind: str
    spec: dict | None
    seed: int = DEFAULT_SEED
    paths: int = 0
    out: str = "mapfluct-out"
    params: dict = field(default_factory=dict)
    schema_version: int = SCHEMA_VERSION

    def build_spec(self):
        if self.spec is None:
            return None
        return spec_from_dict(self.spec)

    def resolved(self) -> dict:
        """Full configuration with every default made explicit."""
        return {"schema_version": self.schema_version, "kind": self.kind, "seed": self.seed, "paths": self.paths,
                "out": self.out, "spec": self.spec, "params": self.params}


def read_config_file(path) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        if p.suffix.lower() == ".toml":
            return tomllib.loads(text)
        return json.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {p}: {exc}") from exc


def resolve_config(raw: dict, kind: str | None = None, seed: int | None = None, paths: int | None = None,
                   out: str | None = None, base_dir=None) -> ExperimentConfig:
    """Merge a raw config with command-line overrides and per-kind defaults."""
    raw = copy.deepcopy(raw or {})
    version = raw.pop("schema_version", None)
    if version is None:
        raise ConfigError("missing 'schema_version'")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    cfg_kind = raw.pop("kind", None)
    if kind is not None and cfg_kind is not None and kind != cfg_kind:
        raise ConfigError(f"config is for {cfg_kind!r}, command asks for {kind!r}")
    kind = kind or cfg_kind
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; known: {', '.join(KINDS)}")
    spec = raw.pop("spec", None)
    spec_file = raw.pop("spec_file", None)
    if spec is not None and spec_file is not None:
        raise ConfigError("give either 'spec' or 'spec_file', not both")
    if spec_file is not None:
        sp = Path(spec_file)
        if base_dir is not None and not sp.is_absolute():
            sp = Path(base_dir) / sp
        spec = read_config_file(sp)
    need = _NEEDS_SPEC[kind]
    if need is not None:
        if spec is None:
            raise ConfigError(f"{kind} needs a spec")
        if spec.get("type", "map") not in ((need, "lamperti-stable") if need == "map" else (need,)):
            raise ConfigError(f"{kind} needs a {need} spec, got {spec.get('type', 'map')!r}")
    params = dict(DEFAULTS[kind])
    given = raw.pop("params", {}) or {}
    unknown = set(given) - set(params)
    if unknown:
        raise ConfigError(f"unknown parameters for {kind}: {sorted(unknown)}")
    params.update(given)
    cfg_seed = raw.pop("seed", DEFAULT_SEED)
    cfg_paths = raw.pop("paths", DEFAULT_PATHS[kind])
    cfg_out = raw.pop("out", "mapfluct-out")
    if raw:
        raise ConfigError(f"unknown top-level keys: {sorted(raw)}")
    seed = int(cfg_seed if seed is None else seed)
    paths = int(cfg_paths if paths is None else paths)
    if seed < 0 or paths <= 0:
        raise ConfigError("seed must be nonnegative and paths positive")
    return ExperimentConfig(kind, spec, seed, paths, out or cfg_out, params, SCHEMA_VERSION)
