import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cusplab.barrier import (
    GenericProfile,
    HBProfile,
    barrier_bound_constant,
    check_ln_conditions,
    e2_samples,
    hb_eval,
    integral_to,
    monotone_limit,
    phi_eval,
    phi_on_axis,
    phi_subharmonicity_scan,
)


def test_profile_values():
    p = HBProfile(1.0, 0.2)
    assert hb_eval(p, 0.0) == 0.0
    assert float(hb_eval(HBProfile(2.0, 0.5), math.exp(-1))) == pytest.approx(2 / math.e, rel=1e-14)
    assert float(integral_to(p, math.exp(-2))) == pytest.approx(0.5, rel=1e-14)
    with pytest.raises(ValueError):
        hb_eval(p, 0.2)


@pytest.mark.parametrize("x", [1e-8, 1e-4, 1e-2, 0.09])
def test_closed_integral_matches_quadrature(x):
    p = HBProfile(1.3, 0.1)
    assert float(integral_to(p, x, "quad")) == pytest.approx(float(integral_to(p, x)), rel=1e-10)


def test_phi_values_and_axis_identity():
    p = HBProfile(1.0, 0.2)
    x = math.exp(-2)
    assert float(phi_eval(p, x)) == pytest.approx(2 * x, rel=1e-12)
    assert float(phi_eval(p, 0.0)) == 0.0
    xs = np.geomspace(1e-10, 0.19, 500)
    closed = xs + 2 * xs / np.log(1 / xs)
    assert np.allclose(phi_eval(p, xs + 0j), closed, rtol=1e-12, atol=0)
    assert np.allclose(phi_on_axis(p, xs), closed, rtol=1e-12, atol=0)


def test_monotone_limit_root():
    L = -math.log(monotone_limit())
    assert L**3 + 2 * L**2 - 6 * L - 24 == pytest.approx(0, abs=1e-10)
    assert monotone_limit() == pytest.approx(0.054684, abs=1e-6)


def test_conditions_hold_below_the_monotone_limit():
    rep = check_ln_conditions(HBProfile(1.0, 0.05))
    assert rep.conditions_ok == (True, True, True, True)


def test_condition_four_fails_past_the_monotone_limit():
    rep = check_ln_conditions(HBProfile(1.0, 0.1))
    assert rep.conditions_ok[:3] == (True, True, True)
    assert not rep.conditions_ok[3]
    lo, hi = rep.details["condition4_violation_range"]
    assert lo >= monotone_limit() * 0.99


def test_decreasing_profile_fails_condition_three():
    rep = check_ln_conditions(GenericProfile(lambda u: -u, 0.1))
    assert not rep.conditions_ok[2]


def test_generic_profile_agrees_with_closed_form():
    hb = HBProfile(1.0, 0.05)
    g = GenericProfile(hb.h, 0.05)
    u = np.geomspace(1e-6, 0.04, 20)
    assert np.allclose(g.dh(u), hb.dh(u), rtol=1e-6)
    assert np.allclose(g.integral_to(u), hb.integral_to(u), rtol=1e-8)


def test_scan_is_exact_on_a_harmonic_function():
    p = HBProfile(1.0, 0.1)
    res = phi_subharmonicity_scan(p, 0.05, 1e-3, func=lambda z: np.real(z))
    assert abs(res.max_violation) <= 1e-12 * max(1.0, res.scale)


def test_coarse_scans_stay_above_the_floor():
    p = HBProfile(1.0, 0.1)
    for h in (1e-3, 5e-4):
        res = phi_subharmonicity_scan(p, 0.05, h)
        assert res.max_violation >= -1e-4
        assert res.points > 1000


@settings(max_examples=25, deadline=None)
@given(B=st.floats(0.2, 1.0), u0=st.floats(0.01, 0.6))
def test_phi_nonpositive_on_the_profile_curve(B, u0):
    # for larger B the sign only holds on a smaller disk
    p = HBProfile(B, u0)
    z = e2_samples(p, 0.5 * u0, 200)
    assert np.max(phi_eval(p, z)) <= 1e-9


def test_bound_constant():
    p = HBProfile(1.0, 0.1)
    assert barrier_bound_constant(p, -2 * np.ones(5), np.ones(5)) == 0.5
    with pytest.raises(ValueError):
        barrier_bound_constant(p, np.array([-1.0, 0.0]), np.ones(2))
