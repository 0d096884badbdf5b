"""Command-line driver: one subcommand per experiment plus a summary table.

Configuration is a flat JSON object; command-line flags override file values,
which override the per-experiment defaults.  Exit status: 0 when every gate
passes, 1 on a failed gate, 2 on an invalid configuration, 3 when the
computation itself raises.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .geometry import CuspParams

EXPERIMENTS = ("green-profile", "conformal-check", "barrier-check", "hopf-certify", "exhaustion-sim",
               "capacity-scan")

# per-experiment defaults: cusp parameters first, then the numeric knobs
DEFAULTS = {
    "conformal-check": {"C": 1.0, "alpha": 0.5, "R": 1.0, "n_pairs": 100_000, "n_boundary": 10_000,
                        "fit_s_min": 1e-6, "fit_s_max": 1e-4, "profile_points": 300},
    "green-profile": {"C": 0.5, "alpha": 0.7, "R": 1.0, "t_min": 0.003, "t_max": 0.1, "t_count": 12,
                      "growth": 0.2, "h_max": 0.02},
    "barrier-check": {"C": 1.0, "alpha": 0.5, "B": 1.0, "u0": 0.1, "scan_h": 2e-4, "scan_radius": 0.05,
                      "e2_samples": 1000, "green_check": True},
    "hopf-certify": {"C": 0.5, "alpha": 0.7, "R": 1.0, "samples": 4000, "x_min": 0.003, "h_max": 0.02},
    "exhaustion-sim": {"C": 1.0, "alpha": 0.5, "beta": 150.0, "phi_A": 1.0, "depth": 5e-4, "start": 0.5,
                       "grid_h": 0.02, "n_angles": 256},
    "capacity-scan": {"C": 1.0, "alpha": 0.5, "n": 2, "k_min": 2, "k_max": 6, "resolution": 16,
                      "calibration_h": 0.2, "mc_trials": 100_000, "mc_check": True},
}

EXIT_OK, EXIT_GATE, EXIT_CONFIG, EXIT_COMPUTE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: CuspParams
    seed: int = 42
    output_dir: str = ""
    knobs: dict = field(default_factory=dict)

    @classmethod
    def from_flat(cls, flat: dict) -> "ExperimentConfig":
        flat = dict(flat)
        exp = flat.pop("experiment", None)
        if exp not in EXPERIMENTS:
            raise ConfigError(f"experiment: must be one of {', '.join(EXPERIMENTS)}, got {exp!r}")
        defaults = DEFAULTS[exp]
        seed = flat.pop("seed", 42)
        if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
            raise ConfigError(f"seed: must be an unsigned 64-bit integer, got {seed!r}")
        out = flat.pop("output_dir", "") or ""
        knobs = {}
        for key, default in defaults.items():
            value = flat.pop(key, default)
            knobs[key] = _coerce(key, value, default)
        if flat:
            raise ConfigError(f"{sorted(flat)[0]}: unknown field for {exp}")
        C, alpha = knobs.pop("C"), knobs.pop("alpha")
        if not (0 < alpha < 1):
            raise ConfigError(f"alpha: must lie in the open interval (0, 1), got {alpha!r}")
        if not C > 0:
            raise ConfigError(f"C: must be positive, got {C!r}")
        try:
            params = CuspParams(C, alpha)
        except ValueError as e:
            raise ConfigError(f"C/alpha: {e}") from None
        cfg = cls(exp, params, seed, str(out), knobs)
        _validate_knobs(cfg)
        return cfg

    def to_flat(self) -> dict:
        return {"experiment": self.experiment, "C": self.params.C, "alpha": self.params.alpha,
                "seed": self.seed, "output_dir": self.output_dir, **self.knobs}


def _coerce(key, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{key}: must be true or false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not (isinstance(value, int) or (isinstance(value, float) and value.is_integer())):
            raise ConfigError(f"{key}: must be an integer, got {value!r}")
        return int(value)
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigError(f"{key}: must be a finite real, got {value!r}")
    return float(value)


def _validate_knobs(cfg: ExperimentConfig) -> None:
    k = cfg.knobs

    def need(cond, key, msg):
        if not cond:
            raise ConfigError(f"{key}: {msg}, got {k[key]!r}")

    positive = [n for n, v in k.items() if isinstance(v, (int, float)) and not isinstance(v, bool)]
    for n in positive:
        if n not in ("start",):
            need(k[n] > 0, n, "must be positive")
    e = cfg.experiment
    if e == "green-profile":
        need(k["t_min"] < k["t_max"] < k["R"] / 2, "t_max", "need t_min < t_max < R/2")
        need(k["t_count"] >= 3, "t_count", "need at least 3 points")
    elif e == "conformal-check":
        need(k["n_pairs"] >= 1000, "n_pairs", "need at least 1000 pairs")
        need(k["fit_s_min"] < k["fit_s_max"], "fit_s_max", "must exceed fit_s_min")
    elif e == "barrier-check":
        need(k["scan_radius"] < k["u0"], "scan_radius", "must lie below u0")
    elif e == "hopf-certify":
        need(k["samples"] >= 8, "samples", "need at least 8 samples")
        need(k["x_min"] < k["R"], "x_min", "must lie below R")
    elif e == "exhaustion-sim":
        need(0 < k["start"] < 1, "start", "must lie in (0, 1)")
    elif e == "capacity-scan":
        need(1 <= k["n"] <= 3, "n", "must be 1, 2 or 3")
        need(k["k_min"] <= k["k_max"], "k_max", "must be at least k_min")
        need(k["mc_trials"] >= 10_000, "mc_trials", "need at least 10^4 trials")


@dataclass
class Outcome:
    results: dict
    gates: dict
    key_metric: dict
    tables: dict = field(default_factory=dict)  # name -> (header, rows)
    plot: tuple = ((), ())

    @property
    def passed(self) -> bool:
        return all(self.gates.values())


# ---------------------------------------------------------------- experiments


def run_conformal(cfg: ExperimentConfig, workers: int) -> Outcome:
    from .conformal import boundary_polar, collision_scan, f_map, hopf_constant, image_profile, injectivity_radius

    p, k = cfg.params, cfg.knobs
    R = min(k["R"], injectivity_radius(p))
    scan = collision_scan(p, R, n_pairs=k["n_pairs"], seed=cfg.seed)
    # boundary samples on both walls, log-spaced toward the vertex
    s_top = _wall_parameter_at_radius(p, R)
    s = np.geomspace(s_top * 1e-6, s_top, k["n_boundary"] // 2)
    th = np.concatenate([boundary_polar(p, c, s).theta_tilde for c in (p.wall_scale, -p.wall_scale)])
    max_theta = float(np.max(np.abs(th)))
    A = hopf_constant(p)
    f1 = complex(f_map(p, 1.0))
    sg = np.geomspace(min(0.5, 0.9 * injectivity_radius(p, 1.0)), k["fit_s_min"], k["profile_points"])
    sg = np.unique(np.concatenate([sg, [k["fit_s_min"], k["fit_s_max"]]]))[::-1]
    prof = image_profile(p, sg, window=(k["fit_s_min"], k["fit_s_max"]))
    gates = {
        "no_collisions": bool(scan["ok"]),
        "angle_bound": max_theta <= math.pi / 2 + 1e-9,
        "F_at_one": f1 == complex(math.exp(-A)),
        "profile_fit_residual": prof.a2_fit.residual <= 0.10,
        "profile_consistency": 0.95 <= prof.consistency <= 1.05,
    }
    results = {
        "A": A, "R": R, "collision_scan": scan, "max_abs_theta_tilde": max_theta,
        "F_at_one": [f1.real, f1.imag], "exp_minus_A": math.exp(-A),
        "a1_fit": prof.a1_fit.coefficient, "a1_residual": prof.a1_fit.residual,
        "a2_fit": prof.a2_fit.coefficient, "a2_residual": prof.a2_fit.residual,
        "consistency": prof.consistency,
    }
    rows = [tuple(float(v) for v in r) for r in prof.rows()]
    return Outcome(results, gates,
                   {"name": "A2_fit/(A1_fit*A^2)", "value": prof.consistency, "expected": "[0.95, 1.05]"},
                   {"image_profile": (("s", "y_tilde", "x_tilde", "log_r_tilde", "theta_tilde"), rows)},
                   (("s", "pi/2 - theta_tilde"), list(zip(prof.s.tolist(), prof.deficit.tolist()))))


def _wall_parameter_at_radius(p: CuspParams, R: float) -> float:
    from scipy.optimize import brentq

    c = p.wall_scale
    return brentq(lambda s: s * s + c * c * s ** (2 / p.alpha) - R * R, 1e-300, R)


def run_green_profile(cfg: ExperimentConfig, workers: int) -> Outcome:
    from .green import axis_green_profile

    k = cfg.knobs
    t = np.geomspace(k["t_min"], k["t_max"], k["t_count"])
    prof = axis_green_profile(cfg.params, k["R"], t, growth=k["growth"], h_max=k["h_max"])
    gates = {
        "decay_constant_within_20pct": prof.decay_relative_error <= 0.20,
        "conformal_invariance": prof.invariance_ok,
        "mapped_ratio_spread_le_3": prof.mapped_ratio_spread <= 3.0,
    }
    results = {
        "A": prof.A, "decay_constant": prof.decay_constant, "relative_error": prof.decay_relative_error,
        "mapped_ratio_range": [prof.mapped_ratio_low, prof.mapped_ratio_high],
        "mapped_decade": list(prof.mapped_decade), "unknowns": list(prof.unknowns),
        "resolvable_rows": sum(r.resolvable for r in prof.rows), "rows": len(prof.rows),
    }
    header = ("t", "g_direct", "g_direct_err", "g_image", "g_image_err", "bound", "ratio")
    rows = [tuple(float(v) for v in r) for r in prof.csv_rows()]
    return Outcome(results, gates,
                   {"name": "decay constant", "value": prof.decay_constant,
                    "expected": f"A = {prof.A:.4f} within 20%"},
                   {"axis_profile": (header, rows)},
                   (("t", "g_direct"), [(r.t, r.g_direct.value) for r in prof.rows]))


def run_barrier(cfg: ExperimentConfig, workers: int) -> Outcome:
    from .barrier import HBProfile, check_ln_conditions, e2_samples, green_bound_check, phi_eval, phi_subharmonicity_scan

    k = cfg.knobs
    prof = HBProfile(k["B"], k["u0"])
    cond = check_ln_conditions(prof)
    h = k["scan_h"]
    scan = phi_subharmonicity_scan(prof, k["scan_radius"], h)
    scan_half = phi_subharmonicity_scan(prof, k["scan_radius"], h / 2)
    v, v2 = scan.max_violation, scan_half.max_violation
    improvement = abs(v) / abs(v2) if v2 != 0 else math.inf
    e2 = e2_samples(prof, k["scan_radius"], k["e2_samples"])
    e2_max = float(np.max(phi_eval(prof, e2)))
    gates = {f"condition_{i + 1}": bool(c) for i, c in enumerate(cond.conditions_ok)}
    gates.update({
        "scan_floor": v >= -1e-4,
        "scan_improves_3x": improvement >= 3.0,
        "phi_nonpositive_on_E2": e2_max <= 1e-9,
    })
    results = {"conditions": [bool(c) for c in cond.conditions_ok], "condition_details": _jsonable(cond.details),
               "scan": scan.to_json(), "scan_half": scan_half.to_json(), "scan_improvement": improvement,
               "phi_max_on_E2": e2_max}
    if k["green_check"]:
        gb = green_bound_check(cfg.params)
        gates["green_bound"] = gb.details["violations"] == 0 and gb.M > 0
        results["green_bound"] = {"M": gb.M, "region": _jsonable(gb.region), "details": _jsonable(gb.details)}
    return Outcome(results, gates,
                   {"name": "min discrete Laplacian of phi", "value": v, "expected": ">= -1e-4, 3x better at h/2"},
                   {"scan": (("h", "min_laplacian", "tolerance", "points"),
                             [(h, v, scan.tolerance, scan.points), (h / 2, v2, scan_half.tolerance, scan_half.points)])},
                   (("y", "phi_on_E2"), list(zip(e2.imag.tolist(), phi_eval(prof, e2).tolist()))))


def run_hopf(cfg: ExperimentConfig, workers: int) -> Outcome:
    from .domains import TruncatedCusp
    from .green import cusp_grid, green_fd
    from .hopf import hopf_certify

    p, k = cfg.params, cfg.knobs
    R = k["R"]
    G = green_fd(TruncatedCusp(p, R), R / 2, grid=cusp_grid(p, R, k["x_min"], h_max=k["h_max"]))
    n = k["samples"]
    cert = hopf_certify(p, R, G, n, seed=cfg.seed, x_min=k["x_min"])
    cert2 = hopf_certify(p, R, G, 2 * n, seed=cfg.seed, x_min=k["x_min"])
    scaled = hopf_certify(p, R, lambda z: 4.0 * G(z), n, seed=cfg.seed, x_min=k["x_min"])
    drift = abs(cert2.best_constant / cert.best_constant - 1)
    gates = {
        "positive_constant": cert.best_constant > 0,
        "stable_under_doubling": drift <= 0.10,
        "exact_homogeneity": scaled.best_constant == 4.0 * cert.best_constant,
    }
    results = {"certificate": cert.to_json(), "doubled": cert2.to_json(), "relative_drift": drift,
               "green_unknowns": G.fine.unknowns}
    return Outcome(results, gates,
                   {"name": "best constant", "value": cert.best_constant, "expected": "> 0, stable within 10%"},
                   {"certificates": (("samples", "best_constant", "witness_re", "witness_im", "witness_delta"),
                                     [(c.sample_count, c.best_constant, c.witness.real, c.witness.imag, c.witness_delta)
                                      for c in (cert, cert2)])},
                   (("samples", "best_constant"), [(n, cert.best_constant), (2 * n, cert2.best_constant)]))


def run_exhaustion(cfg: ExperimentConfig, workers: int) -> Outcome:
    from .exhaustion import (DiskModel, ExhaustionParams, RecursionRangeError, lambda_of, log_alpha_sequence,
                             patch_decay_sim, sequence_table)

    k = cfg.knobs
    ep = ExhaustionParams.slow_model(beta=k["beta"], A=k["phi_A"], alpha=cfg.params.alpha,
                                     depth=k["depth"], start=k["start"])
    table = sequence_table(ep)
    chk = table.checks
    nu = np.arange(1, len(table) + 1)
    c0 = table.c0
    t_scan = np.geomspace(-table.alphas[-1], -table.alphas[0], 1000)
    lam = lambda_of(table, t_scan)
    rep = patch_decay_sim(ep, table, model=DiskModel(grid_h=k["grid_h"], n_angles=k["n_angles"]))
    # the recommended constants run out of double range almost at once
    default = ExhaustionParams()
    L2 = float(log_alpha_sequence(default, 2)[1])
    try:
        log_alpha_sequence(default, 10)
        overflow_index = None
    except RecursionRangeError as e:
        overflow_index = e.index
    inc = table.increments
    gates = {
        "halving": not chk.halving_failures and chk.halving_max_error <= 1e-12,
        "odd_bound": not chk.odd_bound_failures,
        "tau_increments": bool(np.all((inc >= 0.5 - 1e-12) & (inc <= 1.0))),
        "tau_lower_bound": bool(np.all(table.tau_at_breaks >= nu / 2 - c0 - 1e-12)),
        "lambda_monotone": bool(np.all(np.diff(lam) <= 0)),
    }
    gates.update({f"patch_{name}": ok for name, ok in rep.checks.items()})
    results = {"params": ep.to_json(), "table_length": len(table), "c0": c0,
               "halving_max_error": chk.halving_max_error, "patch": _jsonable(rep.to_json()),
               "default_constants": {"log_inv_abs_alpha2": L2, "overflow_index": overflow_index}}
    rows = [(int(i), float(a), float(b), float(t)) for i, a, b, t in table.rows()]
    return Outcome(results, gates,
                   {"name": "c3", "value": rep.c3, "expected": "> 0, kappa_nu >= c3, final bound holds"},
                   {"sequence": (("nu", "alpha_nu", "a_nu", "tau_a_nu"), rows),
                    "decay": (("nu", "M_nu"), [(i + 1, m) for i, m in enumerate(rep.M_series)])},
                   (("nu", "M_nu"), [(i + 1, m) for i, m in enumerate(rep.M_series)]))


def run_capacity(cfg: ExperimentConfig, workers: int) -> Outcome:
    from .capacity import ball_capacity, capacity_hitting_mc, capacity_variational, shell_family, wiener_report, _shell_capacity

    p, k = cfg.params, cfg.knobs
    m = 2 * k["n"] if k["n"] >= 2 else 4
    ball = lambda r: (lambda *x: sum(c * c for c in x) <= r * r)
    cal = [capacity_variational(ball(r), 4, r, k["calibration_h"], symmetric=True) for r in (1.0, 2.0)]
    cal_ratio = cal[1].value / cal[0].value
    gates = {"ball_doubling_ratio": abs(cal_ratio / 4 - 1) <= 0.10}
    results = {"calibration": {"ratio": cal_ratio, "B1": cal[0].to_json(), "B2": cal[1].to_json(),
                               "B1_exact": ball_capacity(4, 1.0)}}
    rows, plot = [], []
    rep = wiener_report(p, k["n"], range(k["k_min"], k["k_max"] + 1), resolution=k["resolution"], workers=workers)
    planar = wiener_report(p, 1)
    results["wiener"] = _jsonable(rep.to_json())
    results["planar_verdict"] = planar.thinness
    gates["planar_not_thin"] = planar.thinness == "not_thin"
    if k["n"] >= 2:
        ratios = rep.consecutive_ratios
        gates["verdict_thin"] = rep.thinness == "thin"
        gates["box_bound"] = all(r.box_bound_ok for r in rep.rows)
        sums = {r.k: r.partial_sum for r in rep.rows}
        if 3 in sums and 6 in sums:
            gates["tail_dominance"] = sums[6] - sums[3] <= sums[3]
        if k["n"] == 2 and cfg.params.alpha == 0.5:
            gates["term_ratio_in_0.4_0.6"] = all(0.4 <= r <= 0.6 for r in ratios)
        rows = [tuple(float(v) for v in r) for r in rep.csv_rows()]
        plot = [(r.k, r.term) for r in rep.rows]
        if k["mc_check"]:
            shells = shell_family(p, k["n"], range(k["k_min"], min(k["k_min"] + 3, k["k_max"]) + 1))
            mc = []
            for i, (a, b) in enumerate(zip(shells, shells[1:])):
                L = 4 * a.box().reach
                pa = capacity_hitting_mc(a.box(), m, L, 8 * L, k["mc_trials"], seed=cfg.seed + 2 * i)
                pb = capacity_hitting_mc(b.box(), m, L, 8 * L, k["mc_trials"], seed=cfg.seed + 2 * i + 1)
                r, e = pb.ratio_to(pa)
                va, vb = _shell_capacity(a, "box", k["resolution"]), _shell_capacity(b, "box", k["resolution"])
                vr = vb.value / va.value
                ve = vr * (va.error / va.value + vb.error / vb.value)
                mc.append({"k": a.k, "mc_ratio": r, "mc_error": e, "grid_ratio": vr, "grid_error": ve,
                           "agree": bool(abs(r - vr) <= 3 * (e + ve))})
            results["mc_cross_check"] = mc
            gates["mc_agreement"] = all(x["agree"] for x in mc)
    return Outcome(results, gates,
                   {"name": "fitted Wiener term ratio", "value": rep.fitted_term_ratio,
                    "expected": f"{rep.predicted_ratio:.4g}, verdict thin"},
                   {"wiener": (("k", "cap", "weight", "term", "partial_sum"), rows)},
                   (("k", "term"), plot))


RUNNERS = {
    "conformal-check": run_conformal,
    "green-profile": run_green_profile,
    "barrier-check": run_barrier,
    "hopf-certify": run_hopf,
    "exhaustion-sim": run_exhaustion,
    "capacity-scan": run_capacity,
}


# ---------------------------------------------------------------- output


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if obj is None or isinstance(obj, (str, int)):
        return obj
    if hasattr(obj, "to_json"):
        return _jsonable(obj.to_json())
    return repr(obj)


def report_dict(cfg: ExperimentConfig, out: Outcome, timestamp: str) -> dict:
    return {
        "experiment": cfg.experiment,
        "config": {k: v for k, v in cfg.to_flat().items() if k != "output_dir"},
        "timestamp": timestamp,
        "passed": out.passed,
        "gates": {k: bool(v) for k, v in out.gates.items()},
        "key_metric": _jsonable(out.key_metric),
        "results": _jsonable(out.results),
    }


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    path.write_text(buf.getvalue(), encoding="utf-8", newline="\n")


def _write_plot(path: Path, title: str, header, rows) -> None:
    lines = [f"# {title}", "# " + " ".join(header)]
    lines += [" ".join(repr(float(v)) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def run(cfg: ExperimentConfig, workers: int = 1) -> tuple[int, dict]:
    out_dir = Path(cfg.output_dir or f"runs/{cfg.experiment}")
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        outcome = RUNNERS[cfg.experiment](cfg, workers)
    except (ConfigError, ValueError, RuntimeError, MemoryError, ArithmeticError) as e:
        print(f"{cfg.experiment}: computation failed: {e}", file=sys.stderr)
        return EXIT_COMPUTE, {}
    stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    rep = report_dict(cfg, outcome, stamp)
    (out_dir / "report.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n", encoding="utf-8",
                                         newline="\n")
    for name, (header, rows) in outcome.tables.items():
        _write_csv(out_dir / f"{name}.csv", header, rows)
    ph, prows = outcome.plot
    _write_plot(out_dir / "plot.dat", cfg.experiment, ph, prows)
    status = "pass" if outcome.passed else "FAIL"
    failed = [k for k, v in outcome.gates.items() if not v]
    print(f"{cfg.experiment}: {status} in {time.perf_counter() - t0:.1f}s -> {out_dir}"
          + (f" (failed: {', '.join(failed)})" if failed else ""), file=sys.stderr)
    return (EXIT_OK if outcome.passed else EXIT_GATE), rep


def emit_summary(paths) -> tuple[int, list[tuple]]:
    """One row per report: experiment, key metric, value, expected, pass/fail/parse_error."""
    paths = list(paths)
    if not paths:
        return EXIT_CONFIG, []
    rows, status = [], EXIT_OK
    for p in paths:
        try:
            rep = json.loads(Path(p).read_text(encoding="utf-8"))
            km = rep["key_metric"]
            verdict = "pass" if rep["passed"] else "fail"
            rows.append((rep["experiment"], km["name"], km["value"], km["expected"], verdict))
            if not rep["passed"]:
                status = EXIT_GATE
        except (OSError, ValueError, KeyError, TypeError):
            rows.append((str(p), "", "", "", "parse_error"))
            status = EXIT_GATE
    return status, rows


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cusplab", description="Potential-theory experiments near cusp points.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", type=Path)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", type=str)
        sp.add_argument("--c", type=float, dest="C")
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a numeric knob, e.g. --set t_count=8")
    sm = sub.add_parser("summary")
    sm.add_argument("reports", nargs="*", type=Path)
    sm.add_argument("--out", type=str, help="directory to scan for */report.json and to write summary.csv")
    return ap


def config_from_args(args) -> ExperimentConfig:
    flat = {}
    if args.config is not None:
        try:
            flat = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            raise ConfigError(f"config: cannot read {args.config}: {e}") from None
        if not isinstance(flat, dict):
            raise ConfigError("config: must be a flat JSON object")
        if flat.get("experiment", args.command) != args.command:
            raise ConfigError(f"experiment: config file is for {flat['experiment']!r}, not {args.command!r}")
    flat["experiment"] = args.command
    for key in ("seed", "C", "alpha"):
        v = getattr(args, key)
        if v is not None:
            flat[key] = v
    if args.out is not None:
        flat["output_dir"] = args.out
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"{item}: expected KEY=VALUE")
        try:
            flat[key] = json.loads(value)
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {value!r}") from None
    return ExperimentConfig.from_flat(flat)


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "summary":
        paths = list(args.reports)
        if args.out:
            paths += sorted(Path(args.out).glob("*/report.json"))
        code, rows = emit_summary(paths)
        if code == EXIT_CONFIG:
            print("summary: no reports given", file=sys.stderr)
            return code
        header = ("experiment", "metric", "value", "expected", "status")
        if args.out:
            _write_csv(Path(args.out) / "summary.csv", header, rows)
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return code
    if args.workers < 1:
        print("workers: must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = config_from_args(args)
    except ConfigError as e:
        print(f"invalid configuration: {e}", file=sys.stderr)
        return EXIT_CONFIG
    code, _ = run(cfg, args.workers)
    return code


if __name__ == "__main__":
    sys.exit(main())
