"""Acceptance gates, one test per criterion.

Each experiment is run once through the command-line driver with its default
configuration; the reports are cached for the session and rerun with two
worker threads for the reproducibility check.
"""
import json
import math
import time

import pytest

from cusplab.cli import EXPERIMENTS, ExperimentConfig, run
from cusplab.domains import Disk
from cusplab.green import WosConfig, green_disk, green_fd, green_wos

pytestmark = pytest.mark.acceptance

_RUNS: dict = {}


@pytest.fixture(scope="session")
def runs_dir(tmp_path_factory):
    return tmp_path_factory.mktemp("acceptance")


def experiment(name, runs_dir, workers=1):
    key = (name, workers)
    if key not in _RUNS:
        out = runs_dir / f"{name}-w{workers}"
        cfg = ExperimentConfig.from_flat({"experiment": name, "output_dir": str(out)})
        t0 = time.perf_counter()
        code, rep = run(cfg, workers)
        _RUNS[key] = (code, rep, time.perf_counter() - t0, out)
    return _RUNS[key]


def gates_ok(rep, names):
    return {n: bool(rep["gates"][n]) for n in names}


def test_conformal_construction(runs_dir, criterion_log):
    code, rep, elapsed, _ = experiment("conformal-check", runs_dir)
    r = rep["results"]
    g = gates_ok(rep, ["no_collisions", "angle_bound", "F_at_one"])
    ok = all(g.values()) and r["collision_scan"]["pairs"] == 100_000 and elapsed < 10
    criterion_log(1, "conformal construction", ok,
                  f"pairs={r['collision_scan']['pairs']} max|theta~|={r['max_abs_theta_tilde']:.12f} "
                  f"F(1)==exp(-A): {g['F_at_one']} {elapsed:.1f}s")
    assert ok, g


def test_image_boundary_asymptotics(runs_dir, criterion_log):
    code, rep, elapsed, _ = experiment("conformal-check", runs_dir)
    r = rep["results"]
    ok = r["a2_residual"] <= 0.10 and 0.95 <= r["consistency"] <= 1.05 and elapsed < 5
    criterion_log(2, "image-boundary asymptotics", ok,
                  f"residual={r['a2_residual']:.4f} A2/(A1 A^2)={r['consistency']:.4f} {elapsed:.1f}s")
    assert ok


def test_barrier(runs_dir, criterion_log):
    code, rep, elapsed, _ = experiment("barrier-check", runs_dir)
    r = rep["results"]
    v = r["scan"]["max_violation"]
    ok = (all(r["conditions"]) and v >= -1e-4 and r["scan_improvement"] >= 3.0
          and r["phi_max_on_E2"] <= 1e-9 and elapsed < 30)
    criterion_log(3, "barrier profile and scaffold", ok,
                  f"conditions={r['conditions']} scan_min={v:.3g} improvement={r['scan_improvement']:.2f} "
                  f"phi_max_E2={r['phi_max_on_E2']:.3g} {elapsed:.1f}s")
    assert all(r["conditions"]), f"profile conditions {r['conditions']}"
    assert ok


def test_green_oracles(criterion_log):
    t0 = time.perf_counter()
    D, a = Disk(1.0), 0.3 + 0.1j
    points = [0.0, 0.5 + 0.2j, -0.4 - 0.3j, 0.1 + 0.6j, 0.7 - 0.1j]
    fd = green_fd(D, a, grid_h=0.02)
    worst_fd = worst_wos = 0.0
    ok = True
    for z in points:
        exact = green_disk(1.0, z, a).value
        f = fd.estimate(z)
        w = green_wos(D, z, a, WosConfig(trials=100_000, seed=42))
        ok &= abs(f.value - exact) <= f.error
        ok &= abs(w.value - exact) <= 3 * w.error
        worst_fd = max(worst_fd, abs(f.value - exact) / f.error)
        worst_wos = max(worst_wos, abs(w.value - exact) / w.error)
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 60
    criterion_log(4, "Green solvers vs disk", ok,
                  f"max |FD-exact|/err={worst_fd:.2f} max |WoS-exact|/stderr={worst_wos:.2f} {elapsed:.1f}s")
    assert ok


def test_axis_decay(runs_dir, criterion_log):
    code, rep, elapsed, _ = experiment("green-profile", runs_dir)
    r = rep["results"]
    lo, hi = r["mapped_ratio_range"]
    ok = code == 0 and r["relative_error"] <= 0.20 and rep["gates"]["conformal_invariance"] and hi / lo <= 3 \
        and elapsed < 600
    criterion_log(5, "axis Green decay", ok,
                  f"fit={r['decay_constant']:.4f} A={r['A']:.4f} rel_err={r['relative_error']:.3f} "
                  f"mapped spread={hi / lo:.2f} {elapsed:.1f}s")
    assert ok


def test_hopf_certificate(runs_dir, criterion_log):
    code, rep, elapsed, _ = experiment("hopf-certify", runs_dir)
    r = rep["results"]
    c = r["certificate"]["best_constant"]
    ok = c > 0 and r["relative_drift"] <= 0.10 and rep["gates"]["exact_homogeneity"] and elapsed < 120
    criterion_log(6, "Hopf certificate", ok,
                  f"constant={c:.4g} drift={r['relative_drift']:.4f} homogeneous={rep['gates']['exact_homogeneity']} "
                  f"{elapsed:.1f}s")
    assert ok


def test_exhaustion_recursion(runs_dir, criterion_log):
    code, rep, elapsed, _ = experiment("exhaustion-sim", runs_dir)
    g = gates_ok(rep, ["halving", "tau_increments", "tau_lower_bound", "lambda_monotone"])
    # the whole experiment includes the grid model; the scalar part alone is far below a second
    from cusplab.exhaustion import ExhaustionParams, lambda_of, sequence_table

    t0 = time.perf_counter()
    table = sequence_table(ExhaustionParams.slow_model())
    lambda_of(table, -table.alphas[len(table) // 2])
    scalar = time.perf_counter() - t0
    ok = all(g.values()) and rep["results"]["halving_max_error"] <= 1e-12 and scalar < 1
    criterion_log(7, "exhaustion recursion", ok,
                  f"{g} halving_err={rep['results']['halving_max_error']:.2g} {scalar:.2f}s")
    assert ok


def test_patch_decay(runs_dir, criterion_log):
    code, rep, elapsed, _ = experiment("exhaustion-sim", runs_dir)
    p = rep["results"]["patch"]
    names = ["overlap_below_3", "sandwich", "kappa_above_c3", "c3_positive", "contraction", "final_bound"]
    g = {n: bool(p["checks"][n]) for n in names}
    ok = all(g.values()) and elapsed < 300
    criterion_log(8, "patch-and-decay model", ok,
                  f"c1={p['c1']:.3g} c2={p['c2']:.3g} c3={p['c3']:.3g} l={p['l']} "
                  f"final ratio={p['final_bound_max_ratio']:.3f} {elapsed:.1f}s")
    assert ok, g


def test_capacity_and_wiener(runs_dir, criterion_log):
    code, rep, elapsed, _ = experiment("capacity-scan", runs_dir)
    r = rep["results"]
    ratio = r["calibration"]["ratio"]
    terms = r["wiener"]["consecutive_ratios"]
    ok = (abs(ratio / 4 - 1) <= 0.10 and all(0.4 <= t <= 0.6 for t in terms)
          and r["wiener"]["thinness"] == "thin" and r["planar_verdict"] == "not_thin" and elapsed < 900)
    criterion_log(9, "capacity and Wiener series", ok,
                  f"ball ratio={ratio:.3f} term ratios={[round(t, 4) for t in terms]} "
                  f"n=2 {r['wiener']['thinness']}, n=1 {r['planar_verdict']} {elapsed:.1f}s")
    assert ok


def _without_timestamp(path):
    rep = json.loads(path.read_text(encoding="utf-8"))
    rep.pop("timestamp")
    return json.dumps(rep, sort_keys=True)


def test_reproducibility(runs_dir, criterion_log):
    mismatched = []
    for name in EXPERIMENTS:
        one = experiment(name, runs_dir, 1)[3]
        two = experiment(name, runs_dir, 2)[3]
        files = sorted(p.name for p in one.iterdir())
        if files != sorted(p.name for p in two.iterdir()):
            mismatched.append(f"{name}: file sets differ")
            continue
        for f in files:
            if f == "report.json":
                same = _without_timestamp(one / f) == _without_timestamp(two / f)
            else:
                same = (one / f).read_bytes() == (two / f).read_bytes()
            if not same:
                mismatched.append(f"{name}/{f}")
    ok = not mismatched
    criterion_log(10, "reproducibility across worker counts", ok,
                  f"{len(EXPERIMENTS)} experiments, mismatches: {mismatched or 'none'}")
    assert ok
