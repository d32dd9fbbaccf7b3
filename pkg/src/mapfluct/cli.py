"""Command line: ``mapfluct <kind> --config <path> [--seed N] [--paths N] [--out DIR]``."""

from __future__ import annotations

import argparse
import math
import sys
import traceback
from pathlib import Path

import numpy as np
from scipy import integrate

from . import __version__
from .analytics import TestFunction, drift_dichotomy, resolvent, stationary_distribution
from .config import KINDS, ConfigError, ExperimentConfig, read_config_file, resolve_config, spec_to_dict
from .ergodicity import (EmpiricalMeasure, beta_mixing_stationary, default_edges, fit_rate, law_probabilities,
                         tv_decay_curve)
from .io import (CURVE_HEADER, LAW_HEADER, OVERSHOOT_HEADER, PATH_HEADER, curve_rows, overshoot_rows, path_rows,
                 write_csv, write_json)
from .lamperti import (lamperti_kiu_forward, lamperti_kiu_inverse, lamperti_stable_spec, map_path_distance)
from .laws import Exponential
from .model import CompoundPoisson, LevyComponentSpec, MapSpec, validate
from .rng import RngStream
from .simulator import (estimate_ladder_spec, estimate_resolvent, run_ladder, sample_overshoots, simulate_path)
from .vigon import vigon_check, wiener_hopf_mc_check

EXIT_OK, EXIT_ASSERTION, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


def _rng(cfg: ExperimentConfig, index: int = 0):
    return RngStream(cfg.seed).child(index).generator()


# --------------------------------------------------------------------------
# experiments: each returns a summary dict; ``passed`` marks assertion-style runs
# --------------------------------------------------------------------------


def _simulate(cfg, spec, out):
    p = cfg.params
    rows = []
    for k in range(cfg.paths):
        path = simulate_path(spec, float(p["horizon"]), _rng(cfg, k), eps=p["eps"],
                             start_phase=int(p["start_phase"]), start_value=float(p["start_value"]))
        rows.extend(path_rows(path, k))
    write_csv(out / "paths.csv", PATH_HEADER, rows)
    return {"paths": cfg.paths, "knots": len(rows)}


def _overshoot(cfg, spec, out):
    p = cfg.params
    batch = sample_overshoots(spec, sorted(p["levels"]), cfg.paths, _rng(cfg), start_phase=int(p["start_phase"]),
                              max_horizon=float(p["max_horizon"]))
    write_csv(out / "overshoots.csv", OVERSHOOT_HEADER, overshoot_rows(batch))
    live = ~batch.censored
    return {"censored": int(batch.censored.sum()),
            "creep_fraction": [float(batch.crept[:, k][live[:, k]].mean()) if live[:, k].any() else math.nan
                               for k in range(len(batch.levels))],
            "mean_overshoot": [float(batch.overshoot[:, k][live[:, k]].mean()) if live[:, k].any() else math.nan
                               for k in range(len(batch.levels))]}


def _resolvent_check(cfg, ladder, out):
    p = cfg.params
    lam, rate = float(p["lam"]), float(p["rate"])
    coefs = p["coefs"] or [1.0] * ladder.n
    f = TestFunction.exponential(rate, ladder.n, coefs)
    phases = p["phases"] if p["phases"] is not None else list(range(ladder.n))
    rows, worst_z, worst_abs, ok = [], 0.0, 0.0, True
    idx = 0
    for x in p["x"]:
        for i in phases:
            mc, se = estimate_resolvent(ladder, rate, coefs, float(x), int(i), lam, cfg.paths, _rng(cfg, idx))
            idx += 1
            exact = resolvent(ladder, f, float(x), int(i), lam)
            diff = abs(mc - exact)
            z = diff / se if se > 0 else (0.0 if diff == 0 else math.inf)
            worst_z, worst_abs = max(worst_z, z), max(worst_abs, diff)
            ok &= diff <= float(p["se_factor"]) * se and diff <= float(p["abs_tol"])
            rows.append((float(x), int(i), mc, se, exact, z))
    write_csv(out / "resolvent.csv", ("x", "phase", "monte_carlo", "se", "formula", "z"), rows)
    return {"passed": bool(ok), "max_abs_error": worst_abs, "max_abs_error_over_se": worst_z}


def _stationary_check(cfg, ladder, out):
    p = cfg.params
    rho = stationary_distribution(ladder)
    edges = default_edges(rho, int(p["n_bins"]))
    run = run_ladder(ladder, cfg.paths, _rng(cfg), levels=[float(p["t"])], start_value=float(p["start_value"]),
                     start_phase=int(p["start_phase"]))
    emp = EmpiricalMeasure.from_samples(run.overshoot[:, 0], run.phase[:, 0], ladder.n, edges)
    ref = law_probabilities(rho, edges)
    tv = 0.5 * float(np.abs(emp.probabilities() - ref).sum())
    atom_freq = emp.zero_counts / emp.total
    atom_err = float(np.max(np.abs(atom_freq - rho.atoms)))
    rows = []
    probs = emp.probabilities()
    for i in range(ladder.n):
        rows.append((i, 0.0, 0.0, probs[i, 0], ref[i, 0]))
        for k in range(len(edges) - 1):
            rows.append((i, edges[k], edges[k + 1], probs[i, k + 1], ref[i, k + 1]))
    write_csv(out / "stationary.csv", ("phase", "lo", "hi", "empirical", "stationary"), rows)
    write_csv(out / "stationary_law.csv", LAW_HEADER, rho.to_rows(edges[:-1]))
    ok = tv <= float(p["tv_tol"]) and atom_err <= float(p["atom_tol"])
    return {"passed": bool(ok), "tv": tv, "atom_frequency": atom_freq, "stationary_atoms": rho.atoms,
            "max_atom_error": atom_err}


def _ladder_estimate(cfg, spec, out):
    p = cfg.params
    est = estimate_ladder_spec(spec, cfg.paths, _rng(cfg), edges=p["edges"], local_time=float(p["local_time"]),
                               max_horizon=float(p["max_horizon"]), gap_cap=float(p["gap_cap"]))
    rows = []
    e = est.edges
    for i in range(spec.n):
        for j in range(spec.n):
            vals, ses = est.jump_bin_intensity(i) if i == j else est.transition_bin_intensity(i, j)
            for k in range(len(e) - 1):
                rows.append((i, j, e[k], e[k + 1], vals[k], ses[k]))
    write_csv(out / "ladder_bins.csv", ("phase", "target", "lo", "hi", "intensity", "se"), rows)
    write_json(out / "ladder_spec.json", spec_to_dict(est.ladder))
    return {"normalization": est.normalization, "local_time": est.local_time, "censored": est.censored,
            "ladder_drifts": list(est.ladder.drifts), "ladder_killing": list(est.ladder.killing),
            "ladder_Q": est.ladder.Q}


def _vigon_check(cfg, spec, out):
    p = cfg.params
    rep = vigon_check(spec, cfg.paths, _rng(cfg), edges=np.asarray(p["edges"], dtype=float),
                      local_time=float(p["local_time"]), fit_range=tuple(p["fit_range"]), gap_cap=float(p["gap_cap"]))
    write_csv(out / "vigon.csv", ("phase", "target", "lo", "hi", "lhs", "scaled_rhs", "residual", "lhs_se"),
              rep.to_rows())
    r = rep.ratios()
    lo, hi = p["ratio_range"]
    ok = len(r) > 0 and bool(np.all((r >= lo) & (r <= hi)))
    return {"passed": ok, "scales": rep.scales, "ratio_min": float(r.min()) if len(r) else math.nan,
            "ratio_max": float(r.max()) if len(r) else math.nan, "bins_used": int(len(r))}


def _wiener_hopf_check(cfg, spec, out):
    p = cfg.params
    res = wiener_hopf_mc_check(spec, cfg.paths, _rng(cfg), p["thetas"], n_batches=int(p["batches"]),
                               local_time=float(p["local_time"]), gap_cap=float(p["gap_cap"]))
    rows = []
    rep = res.report
    for t, th in enumerate(rep.thetas):
        for r in range(spec.n):
            for c in range(spec.n):
                rows.append((th, r, c, rep.target[t, r, c].real, rep.target[t, r, c].imag, rep.product[t, r, c].real,
                             rep.product[t, r, c].imag, res.se[t, r, c].real, res.se[t, r, c].imag))
    write_csv(out / "wiener_hopf.csv", ("theta", "row", "col", "target_re", "target_im", "product_re", "product_im",
                                        "se_re", "se_im"), rows)
    return {"passed": res.max_z <= float(p["z_tol"]), "max_residual": rep.max_residual, "max_residual_over_se": res.max_z,
            "diagonal_scales": rep.scales}


def _tv_decay(cfg, ladder, out):
    p = cfg.params
    rho = stationary_distribution(ladder)
    curve = tv_decay_curve(ladder, (float(p["start_value"]), int(p["start_phase"])), p["t_grid"], cfg.paths,
                           _rng(cfg), edges=default_edges(rho, int(p["n_bins"])))
    write_csv(out / "tv_curve.csv", CURVE_HEADER, curve_rows(curve))
    try:
        fit = fit_rate(curve, p["model"])
        fit_rec = {"model": fit.model, "rate": fit.rate, "intercept": fit.intercept, "r_squared": fit.r_squared,
                   "t_used": list(fit.t_used)}
    except ValueError as exc:
        fit_rec = {"model": p["model"], "error": str(exc)}
    return {"fit": fit_rec}


def _mixing(cfg, ladder, out):
    p = cfg.params
    rho = stationary_distribution(ladder)
    curve = beta_mixing_stationary(ladder, p["t_grid"], int(p["starts"]), cfg.paths, _rng(cfg),
                                   edges=default_edges(rho, int(p["n_bins"])))
    write_csv(out / "beta_curve.csv", CURVE_HEADER, curve_rows(curve))
    f = float(p["se_factor"])
    order = sorted(curve, key=lambda c: c.t)
    mono = all(b.value <= a.value + f * math.hypot(a.se, b.se) for a, b in zip(order[:-1], order[1:]))
    return {"passed": bool(mono), "nonincreasing": bool(mono), "beta": {str(c.t): c.value for c in curve}}


def _random_two_phase_spec(rng) -> MapSpec:
    comps = tuple(LevyComponentSpec(float(rng.uniform(-1, 1)), 0.0,
                                    CompoundPoisson(float(rng.uniform(0.5, 3)), Exponential(float(rng.uniform(0.5, 3)))))
                  for _ in range(2))
    a, b = rng.uniform(0.3, 2, size=2)
    laws = [[None, Exponential(float(rng.uniform(0.5, 2))).negated()], [Exponential(float(rng.uniform(0.5, 2))), None]]
    return MapSpec(comps, [[-a, a], [b, -b]], laws)


def _lamperti(cfg, spec, out):
    p = cfg.params
    alpha, rho = float(p["alpha"]), float(p["rho"])
    ls = lamperti_stable_spec(alpha, rho)
    flip = ls.F[0][1]
    f_mass = integrate.quad(flip.pdf, -math.inf, math.inf, epsabs=1e-13, epsrel=1e-12, limit=400)[0]
    plus = ls.components[1]
    half = plus.jump_exponential_moment(alpha / 2, 1.0)
    full = plus.jump_exponential_moment(alpha, 1.0)
    law = plus.jumps.law
    partial = [integrate.quad(lambda x: math.exp(alpha * x) * float(law.pdf(x)), 1.0, M, limit=400)[0]
               for M in (10.0, 100.0, 1000.0)]
    verdict = drift_dichotomy(ls).verdict
    rng = _rng(cfg)
    errs, rows = [], []
    for k in range(int(p["round_trips"])):
        path = simulate_path(_random_two_phase_spec(rng), float(p["horizon"]), rng)
        back = lamperti_kiu_forward(lamperti_kiu_inverse(path, alpha))
        errs.append(map_path_distance(path, back))
        rows.append((k, errs[-1]))
    write_csv(out / "round_trip.csv", ("path", "sup_error"), rows)
    checks = {"flip_mass_is_one": abs(f_mass - 1.0) <= 1e-8, "moment_finite_below_alpha": half.finite,
              "moment_infinite_at_alpha": (not full.finite) and partial[2] > 5 * partial[1] and partial[1] > 5 * partial[0],
              "transient": verdict == "Transient",
              "round_trip": max(errs) <= float(p["round_trip_tol"]) if errs else True}
    return {"passed": all(checks.values()), "checks": checks, "flip_mass": f_mass, "q": ls.Q,
            "partial_moment_integrals": partial, "max_round_trip_error": max(errs) if errs else 0.0}


_RUNNERS = {"simulate": _simulate, "overshoot": _overshoot, "resolvent-check": _resolvent_check,
            "stationary-check": _stationary_check, "ladder-estimate": _ladder_estimate, "vigon-check": _vigon_check,
            "wiener-hopf-check": _wiener_hopf_check, "tv-decay": _tv_decay, "mixing": _mixing, "lamperti": _lamperti}


def run(cfg: ExperimentConfig) -> tuple[int, dict]:
    """Execute one experiment, writing ``manifest.json``, CSV tables and ``summary.json`` under ``cfg.out``."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "manifest.json", {"config": cfg.resolved(), "version": __version__})
    try:
        spec = cfg.build_spec()
        if spec is not None:
            report = validate(spec)
            if not report.ok:
                raise ConfigError("spec failed validation", report.to_dict())
    except ConfigError as exc:
        summary = {"status": "config-error", "error": str(exc), "validation": exc.report}
        write_json(out / "summary.json", summary)
        return EXIT_CONFIG, summary
    try:
        summary = _RUNNERS[cfg.kind](cfg, spec, out)
    except Exception as exc:  # any failure inside an experiment is a runtime error
        summary = {"status": "runtime-error", "error": f"{type(exc).__name__}: {exc}",
                   "traceback": traceback.format_exc()}
        write_json(out / "summary.json", summary)
        return EXIT_RUNTIME, summary
    passed = summary.get("passed", True)
    summary["status"] = "ok" if passed else "assertion-failed"
    write_json(out / "summary.json", summary)
    return (EXIT_OK if passed else EXIT_ASSERTION), summary


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mapfluct", description="Markov additive process fluctuation experiments.")
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--config", help="JSON or TOML experiment config")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--paths", type=int)
    ap.add_argument("--out", help="output directory")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        raw = read_config_file(args.config) if args.config else {"schema_version": 1}
        base = Path(args.config).parent if args.config else None
        cfg = resolve_config(raw, kind=args.kind, seed=args.seed, paths=args.paths, out=args.out, base_dir=base)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        if args.out:
            write_json(Path(args.out) / "summary.json", {"status": "config-error", "error": str(exc),
                                                         "validation": exc.report})
        return EXIT_CONFIG
    code, summary = run(cfg)
    print(f"{cfg.kind}: {summary['status']} -> {cfg.out}")
    if code == EXIT_RUNTIME:
        print(summary["error"], file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
