import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cusplab.conformal import hopf_constant
from cusplab.domains import TruncatedCusp
from cusplab.geometry import CuspParams, boundary_distance_planar
from cusplab.green import cusp_grid, green_fd
from cusplab.hopf import certificate_samples, hopf_bound, hopf_certify, log_hopf_bound

GENTLE = CuspParams(0.5, 0.7)


def test_bound_value():
    assert hopf_bound(CuspParams(1, 0.5), 1.0) == pytest.approx(-math.exp(-math.pi / 2), rel=1e-14)
    assert hopf_bound(CuspParams(1, 0.5), 1.0) == pytest.approx(-0.20788, abs=1e-5)
    with pytest.raises(ValueError):
        hopf_bound(CuspParams(1, 0.5), 0.0)


def test_log_path_survives_underflow():
    p = CuspParams(1, 0.25)
    lg = log_hopf_bound(p, 0.01)
    assert math.isfinite(lg)
    assert lg == pytest.approx(-(math.pi / 6) / 0.01**3, rel=1e-14)
    assert hopf_bound(p, 0.01) == 0.0


def test_log_path_matches_extended_precision():
    mpmath = pytest.importorskip("mpmath")
    p = CuspParams(1, 0.5)
    with mpmath.workdps(40):
        ref = -mpmath.exp(-mpmath.pi / 2 / mpmath.mpf("0.3"))
    assert hopf_bound(p, 0.3) == pytest.approx(float(ref), rel=1e-14)


@settings(max_examples=40, deadline=None)
@given(C=st.floats(0.2, 3.0), alpha=st.floats(0.3, 0.9))
def test_bound_negative_and_increasing(C, alpha):
    p = CuspParams(C, alpha)
    d = np.geomspace(1e-3, 1.0, 1000)
    lg = log_hopf_bound(p, d)
    assert np.all(np.diff(lg) > 0)
    v = hopf_bound(p, d)
    assert np.all(v <= 0)
    ok = lg > -700
    assert np.all(v[ok] < 0)


def test_constant_candidate():
    R = 1.0
    z = certificate_samples(GENTLE, R, 64, 1)
    d = boundary_distance_planar(GENTLE, R, z)
    cert = hopf_certify(GENTLE, R, lambda w: -np.ones(w.shape), 64, seed=1)
    expected = math.exp(hopf_constant(GENTLE) / d.max() ** GENTLE.gap)
    assert cert.best_constant == pytest.approx(expected, rel=1e-12)


def test_rejects_nonnegative_candidates():
    with pytest.raises(ValueError, match="negative"):
        hopf_certify(GENTLE, 1.0, lambda w: np.zeros(w.shape), 32)


def test_sample_prefix_is_stable():
    a = certificate_samples(GENTLE, 1.0, 200, 9)
    b = certificate_samples(GENTLE, 1.0, 400, 9)
    n_axis = 200 // 8
    assert np.array_equal(a[n_axis:], b[400 // 8 : 400 // 8 + 200 - n_axis])


@pytest.fixture(scope="module")
def green_candidate():
    return green_fd(TruncatedCusp(GENTLE, 1.0), 0.5, grid=cusp_grid(GENTLE, 1.0, 0.003, h_max=0.02))


@settings(max_examples=10, deadline=None)
@given(scale=st.sampled_from([0.25, 0.5, 2.0, 8.0, 1024.0]))
def test_homogeneity_is_exact(green_candidate, scale):
    base = hopf_certify(GENTLE, 1.0, green_candidate, 500, seed=3, x_min=0.003)
    scaled = hopf_certify(GENTLE, 1.0, lambda w: scale * green_candidate(w), 500, seed=3, x_min=0.003)
    assert scaled.best_constant == scale * base.best_constant


def test_green_candidate_is_certified(green_candidate):
    a = hopf_certify(GENTLE, 1.0, green_candidate, 2000, seed=5, x_min=0.003)
    b = hopf_certify(GENTLE, 1.0, green_candidate, 4000, seed=5, x_min=0.003)
    assert a.best_constant > 0
    assert abs(b.best_constant / a.best_constant - 1) <= 0.10
    assert a.to_json()["samples"] == 2000


@pytest.mark.xfail(strict=True, reason="the minimum ratio sits away from the tip; near-tip ratios are ~15x larger")
def test_witness_binds_near_the_vertex(green_candidate):
    R = 1.0
    z = certificate_samples(GENTLE, R, 4000, 42, 0.003)
    d = boundary_distance_planar(GENTLE, R, z)
    log_ratio = np.log(-green_candidate(z)) - log_hopf_bound(GENTLE, d)
    near = np.abs(z) < 0.1 * R
    assert np.exp(log_ratio[near].min() - log_ratio.min()) <= 2.0
