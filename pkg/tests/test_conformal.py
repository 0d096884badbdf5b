import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cusplab.conformal import (
    angle_deficit,
    boundary_point,
    boundary_polar,
    collision_scan,
    f_inverse,
    f_map,
    hopf_constant,
    image_profile,
    injectivity_radius,
    log_f_map,
    sample_cusp_points,
)
from cusplab.geometry import CuspParams, planar_cusp_contains

P = CuspParams(1.0, 0.5)


@pytest.mark.parametrize(
    "C, alpha, expected",
    [(1.0, 0.5, math.pi / 2), (2.0, 0.5, 2 * math.pi), (1.0, 2 / 3, math.pi)],
)
def test_hopf_constant(C, alpha, expected):
    assert hopf_constant(CuspParams(C, alpha)) == pytest.approx(expected, rel=1e-14)


def test_f_map_values():
    assert f_map(P, 1.0) == complex(math.exp(-math.pi / 2))
    assert f_map(P, 0.5) == pytest.approx(math.exp(-math.pi), rel=1e-14)
    assert math.exp(-math.pi) == pytest.approx(0.043214, abs=1e-6)
    with pytest.raises(ValueError):
        f_map(P, 0.0)


def test_real_axis_is_real_and_increasing():
    x = np.linspace(1e-2, 0.999, 1000)
    w = f_map(P, x)
    assert np.all(w.imag == 0)
    assert np.all(w.real > 0)
    assert np.all(np.diff(w.real) > 0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_conjugate_symmetry(seed):
    z = sample_cusp_points(P, 0.5, 64, seed)
    z = z[z.imag > 0]
    a = log_f_map(P, np.conj(z))
    b = np.conj(log_f_map(P, z))
    assert np.allclose(a, b, rtol=1e-12, atol=0)


def test_inverse_roundtrip():
    z = sample_cusp_points(P, 0.5, 400, 3)
    z = z[np.abs(z) > 0.05]  # keep F(z) well away from underflow
    assert np.allclose(f_inverse(P, f_map(P, z)), z, rtol=1e-10)
    assert np.isnan(f_inverse(P, 0.0))


def test_boundary_polar_axis_curve():
    s = np.array([0.1, 0.3])
    bp = boundary_polar(P, 0.0, s)
    assert np.all(bp.theta == 0) and np.all(bp.theta_tilde == 0)
    assert np.array_equal(bp.r, s)
    assert np.allclose(bp.r_tilde, np.exp(-math.pi / 2 / s), rtol=1e-14)


def test_boundary_angle_tends_to_right_angle():
    for c in (P.wall_scale, -P.wall_scale):
        th = boundary_polar(P, c, 1e-6).theta_tilde
        assert abs(abs(float(th)) - math.pi / 2) < 1e-2
    with pytest.raises(ValueError):
        boundary_polar(P, 1.5 * P.wall_scale, 0.1)


def test_polar_consistency_with_the_map():
    rng = np.random.default_rng(7)
    c = rng.uniform(-P.wall_scale, P.wall_scale, 1000)
    s = rng.uniform(0.05, 0.5, 1000)
    z = s + 1j * c * s ** (1 / P.alpha)
    G = log_f_map(P, z)
    for ci, si, g in zip(c[:50], s[:50], G[:50]):
        bp = boundary_polar(P, ci, si)
        assert float(bp.log_r_tilde) == pytest.approx(g.real, rel=1e-10, abs=1e-12)
        assert float(bp.theta_tilde) == pytest.approx(g.imag, rel=1e-10, abs=1e-12)
    assert boundary_point(P, 0.5, 0.25) == 0.25 + 0.5j * 0.0625


def test_angle_bound_over_wall_samples():
    s = np.geomspace(1e-8, 0.5, 5000)
    th = np.concatenate([boundary_polar(P, c, s).theta_tilde for c in (P.wall_scale, -P.wall_scale)])
    assert np.max(np.abs(th)) <= math.pi / 2 + 1e-9


def test_deficit_matches_double_precision_where_it_is_accurate():
    s = np.array([0.1, 0.3])
    direct = math.pi / 2 - boundary_polar(P, P.wall_scale, s).theta_tilde
    assert np.allclose(angle_deficit(P, s), direct, rtol=1e-10)


def test_collision_scan_small():
    R = injectivity_radius(P)
    out = collision_scan(P, R, n_pairs=5000, seed=1)
    assert out["ok"] and out["pairs"] == 5000


def test_samples_lie_in_the_cusp():
    z = sample_cusp_points(P, 0.8, 2000, 5)
    assert np.all(planar_cusp_contains(P, 0.8, z))


def test_image_profile_examples():
    s = np.geomspace(0.4, 1e-6, 200)
    prof = image_profile(P, s)
    i = np.argmin(np.abs(s - 1e-4))
    ratio = -prof.log_y_tilde[i] / (prof.A / s[i] ** P.gap)
    assert ratio <= 1.05
    a = image_profile(P, np.geomspace(1e-4, 1e-5, 40), window=(1e-5, 1e-4)).a1_fit.coefficient
    b = image_profile(P, np.geomspace(1e-5, 1e-6, 40), window=(1e-6, 1e-5)).a1_fit.coefficient
    assert a > 0 and abs(a / b - 1) <= 0.02
    with pytest.raises(ValueError):
        image_profile(P, np.geomspace(1e-6, 1e-4, 10))  # ascending
