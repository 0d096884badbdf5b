import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cusplab.geometry import (
    CuspFrame,
    CuspParams,
    axis_distance_bounds,
    boundary_distance_planar,
    cusp_contains,
    holder_to_cusp,
    planar_cusp_contains,
)

params_st = st.builds(
    CuspParams,
    C=st.floats(0.1, 10.0),
    alpha=st.floats(0.05, 0.95),
)


def planar_frame(C=1.0, alpha=0.5, radius=1.0):
    return CuspFrame(np.zeros(2), np.array([1.0, 0.0]), CuspParams(C, alpha), radius)


@pytest.mark.parametrize("C, alpha", [(0.0, 0.5), (-1.0, 0.5), (1.0, 0.0), (1.0, 1.0), (1.0, math.nan)])
def test_params_reject_invalid(C, alpha):
    with pytest.raises(ValueError):
        CuspParams(C, alpha)


def test_frame_requires_unit_axis():
    with pytest.raises(ValueError, match="unit"):
        CuspFrame(np.zeros(2), np.array([1.0, 1e-5]), CuspParams(1, 0.5), 1.0)
    with pytest.raises(ValueError):
        CuspFrame(np.zeros(2), np.array([1.0, 0.0]), CuspParams(1, 0.5), 0.0)


def test_frame_json_roundtrip():
    f = CuspFrame(np.array([0.5, -1.0, 0, 2]), np.array([0, 0, 0.6, 0.8]), CuspParams(2.0, 0.3), 0.7)
    g = CuspFrame.from_json(f.to_json())
    assert g.to_json() == f.to_json()


def test_vertex_and_axis_points():
    f = planar_frame()
    assert not cusp_contains(f, np.zeros(2))
    assert cusp_contains(f, np.array([0.3, 0.0]))
    assert not cusp_contains(f, np.array([1.0, 0.0]))  # outside the truncation


def test_wall_point_is_excluded():
    # 0.04 = |0.0016|^(1/2): exactly on the wall
    f = planar_frame()
    assert not cusp_contains(f, np.array([0.04, 0.0016]))
    assert cusp_contains(f, np.array([0.04, 0.0015]))


def test_complex_input_matches_real_pairs():
    f = CuspFrame(np.zeros(4), np.array([0, 0, 1.0, 0]), CuspParams(1, 0.5), 1.0)
    z = np.array([0.01 + 0.0j, 0.3 + 0.0j])
    assert cusp_contains(f, z) == cusp_contains(f, np.array([0.01, 0, 0.3, 0]))


def test_rejects_nonfinite_points():
    with pytest.raises(ValueError):
        cusp_contains(planar_frame(), np.array([np.nan, 0.0]))


@settings(max_examples=60, deadline=None)
@given(
    dim=st.sampled_from([2, 4, 6]),
    seed=st.integers(0, 2**32 - 1),
    C=st.floats(0.2, 5.0),
    alpha=st.floats(0.1, 0.9),
)
def test_rotation_invariance(dim, seed, C, alpha):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    p = rng.standard_normal(dim)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    f = CuspFrame(p, v, CuspParams(C, alpha), 1.5)
    g = CuspFrame(Q @ p, Q @ v / np.linalg.norm(Q @ v), CuspParams(C, alpha), 1.5)
    # points along the axis plus random offsets so both outcomes occur
    z = p + rng.uniform(0, 1.2, 200)[:, None] * v + 0.3 * rng.standard_normal((200, dim)) ** 3
    a = cusp_contains(f, z)
    b = cusp_contains(g, z @ Q.T)
    # ignore points within rounding distance of the wall
    d = z - p
    along = d @ v
    gap = along - C * np.linalg.norm(d - along[:, None] * v, axis=1) ** alpha
    near = (np.abs(gap) < 1e-9) | (np.abs(np.linalg.norm(d, axis=1) - 1.5) < 1e-9)
    assert np.array_equal(a[~near], b[~near])
    assert not cusp_contains(f, p)


@settings(max_examples=40, deadline=None)
@given(params_st)
def test_vertex_never_inside(p):
    assert not cusp_contains(CuspFrame(np.zeros(2), np.array([0.0, 1.0]), p, 1.0), np.zeros(2))


def test_axis_bound_examples():
    lo, hi = axis_distance_bounds(CuspParams(1, 0.5), 0.01)
    assert lo == pytest.approx(2.5e-5, rel=1e-12)
    assert hi == pytest.approx(1e-4, rel=1e-12)
    lo, _ = axis_distance_bounds(CuspParams(0.5, 0.5), 1.0)
    assert lo == pytest.approx(0.5)
    for t in (0.0, -1.0, 1.5):
        with pytest.raises(ValueError):
            axis_distance_bounds(CuspParams(1, 0.5), t)


@settings(max_examples=100, deadline=None)
@given(params_st, st.floats(1e-6, 0.5))
def test_axis_bounds_scale_exactly(p, t):
    lo, hi = axis_distance_bounds(p, t)
    lo2, hi2 = axis_distance_bounds(p, 2 * t)
    f = 2 ** (1 / p.alpha)
    assert lo <= hi
    assert lo2 == pytest.approx(f * lo, rel=1e-12)
    assert hi2 == pytest.approx(f * hi, rel=1e-12)


def test_brute_force_distance_within_axis_bounds():
    p = CuspParams(1, 0.5)
    t = np.geomspace(1e-3, 1e-1, 20)
    d = boundary_distance_planar(p, 1.0, t + 0j)
    for ti, di in zip(t, d):
        lo, hi = axis_distance_bounds(p, ti)
        assert lo * (1 - 1e-6) <= di <= hi * (1 + 1e-6)


def test_distance_examples():
    p = CuspParams(1, 0.5)
    d = boundary_distance_planar(p, 1.0, 0.01)
    assert 2.5e-5 <= d <= 1e-4
    # near the arc: walls are 0.5 - 0.25 away in y, arc is 0.1 away
    assert boundary_distance_planar(p, 0.6, 0.5) == pytest.approx(0.1, abs=1e-8)
    with pytest.raises(ValueError):
        boundary_distance_planar(p, 1.0, 0.01 + 0.5j)


def test_distance_shrinks_towards_the_wall():
    p = CuspParams(1, 0.5)
    # wall point (0.25, 0.0625); x - sqrt(y) has gradient (1, -2) there
    x0, y0 = 0.25, 0.0625
    n = np.array([1.0, -2.0])
    n /= np.linalg.norm(n)
    eps = np.array([1e-2, 5e-3, 2e-3, 1e-3, 1e-4])
    z = (x0 + eps * n[0]) + 1j * (y0 + eps * n[1])
    assert np.all(planar_cusp_contains(p, 1.0, z))
    d = boundary_distance_planar(p, 1.0, z)
    assert np.all(np.diff(d) < 0)
    assert d[-1] < 2e-4


@pytest.mark.parametrize(
    "pieces, expected",
    [
        ([(1, 0.5), (2, 0.7)], (2, 0.5)),
        ([(1, 0.5)], (1, 0.5)),
        ([(3, 0.9), (0.5, 0.3), (1, 0.6)], (3, 0.3)),
    ],
)
def test_holder_to_cusp(pieces, expected):
    p = holder_to_cusp(pieces)
    assert (p.C, p.alpha) == expected


def test_holder_to_cusp_rejects_empty():
    with pytest.raises(ValueError):
        holder_to_cusp([])
