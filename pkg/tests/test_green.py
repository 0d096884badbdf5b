import math

import numpy as np
import pytest

from cusplab.domains import Annulus, Disk, TruncatedCusp
from cusplab.geometry import CuspParams
from cusplab.green import (
    GreenEstimate,
    WosConfig,
    comparison_lemma_bound,
    cusp_grid,
    green_disk,
    green_fd,
    green_wos,
)


def test_disk_closed_form():
    assert green_disk(1.0, 0.5, 0.0).value == pytest.approx(math.log(0.5), rel=1e-15)
    # symmetric in z and a
    assert green_disk(2.0, 0.3 + 0.4j, -1.1j).value == pytest.approx(green_disk(2.0, -1.1j, 0.3 + 0.4j).value)
    assert abs(green_disk(1.0, 0.999999, 0.2).value) < 1e-5
    with pytest.raises(ValueError):
        green_disk(1.0, 0.2, 0.2)


def test_estimate_validation():
    with pytest.raises(ValueError):
        GreenEstimate(-1.0, -0.1, "finite_difference")
    with pytest.raises(ValueError):
        GreenEstimate(-1.0, 0.1, "guess")


@pytest.fixture(scope="module")
def disk_fd():
    return green_fd(Disk(1.0), 0.0, grid_h=0.02)


def test_fd_reproduces_the_disk(disk_fd):
    for z in (0.5, 0.3 + 0.6j, -0.7j):
        est = disk_fd.estimate(z)
        exact = green_disk(1.0, z, 0.0).value
        assert abs(est.value - exact) <= max(est.error, 1e-6)
    assert disk_fd.estimate(0.5).value == pytest.approx(-0.6931, abs=1e-3)


def test_fd_sign_and_outside_values(disk_fd):
    g = disk_fd.node_values()
    inside = disk_fd.fine.inside
    assert np.all(g[~inside] == 0.0)
    assert np.all(g[inside & np.isfinite(g)] <= 0.0)


def test_fd_rejects_source_near_the_boundary():
    with pytest.raises(ValueError, match="boundary"):
        green_fd(Disk(1.0), 0.95, grid_h=0.02)


def test_wos_reproduces_the_disk():
    cfg = WosConfig(trials=20_000, seed=3)
    est = green_wos(Disk(1.0), 0.5, 0.0, cfg)
    assert abs(est.value - math.log(0.5)) <= 3 * est.error
    est = green_wos(Disk(1.0), 0.2 + 0.5j, -0.3, cfg)
    assert abs(est.value - green_disk(1.0, 0.2 + 0.5j, -0.3).value) <= 3 * est.error


def test_wos_is_thread_count_independent():
    base = WosConfig(trials=10_000, seed=11, block=1000)
    a = green_wos(Annulus(0.2, 1.0), 0.5, -0.6, base)
    b = green_wos(Annulus(0.2, 1.0), 0.5, -0.6, WosConfig(trials=10_000, seed=11, block=1000, workers=3))
    assert a == b


def test_wos_reports_stuck_walks():
    with pytest.raises(RuntimeError, match="max_steps"):
        green_wos(Disk(1.0), 0.3j, 0.5, WosConfig(trials=2000, max_steps=2))


def test_wos_config_validation():
    with pytest.raises(ValueError):
        green_wos(Disk(1.0), 0.0, 0.5, WosConfig(trials=10))
    with pytest.raises(ValueError):
        green_wos(Disk(1.0), 0.0, 0.5, WosConfig(epsilon_shell=0.5))


def test_comparison_bound():
    g = GreenEstimate(-0.8, 0.0, "disk_closed_form")
    assert comparison_lemma_bound(-np.ones(10), 1.0, math.e, g) == pytest.approx(-0.8)
    with pytest.raises(ValueError):
        comparison_lemma_bound(np.array([-1.0, 0.0]), 1.0, 2.0, g)
    with pytest.raises(ValueError):
        comparison_lemma_bound(-np.ones(3), 2.0, 1.0, g)


def test_green_decreases_as_the_domain_grows():
    # g = log|z - a| + harmonic part, and the harmonic part drops on a larger domain
    p = CuspParams(0.5, 0.7)
    small = green_fd(TruncatedCusp(p, 1.0), 0.5, grid=cusp_grid(p, 1.0, 0.01, h_max=0.02))
    big = green_fd(TruncatedCusp(p, 2.0), 0.5, grid=cusp_grid(p, 2.0, 0.01, h_max=0.02))
    z = np.array([0.05, 0.1, 0.2, 0.3, 0.7, 0.8]) + 0j
    gs, es = small.values(z)
    gb, eb = big.values(z)
    assert np.all(gb <= gs + 3 * (es + eb))
    assert np.all(gb < gs)
