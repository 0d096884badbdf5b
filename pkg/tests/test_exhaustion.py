import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cusplab.exhaustion import (
    DiskModel,
    ExhaustionParams,
    RecursionRangeError,
    alpha_sequence,
    envelope_eval,
    lambda_of,
    log_alpha_sequence,
    patch_decay_sim,
    psi_inverse,
    relative_extremal_annulus,
    sequence_table,
    tau_eval,
    tau_inverse,
)

SLOW = ExhaustionParams.slow_model()


@pytest.fixture(scope="module")
def table():
    return sequence_table(SLOW)


def test_envelope_example():
    psi, _ = envelope_eval(ExhaustionParams(C1=1, beta=1), -math.exp(-10))
    assert psi == pytest.approx(-0.1, rel=1e-14)
    with pytest.raises(ValueError):
        envelope_eval(SLOW, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 1.0))
def test_psi_inverse_roundtrip(frac):
    # psi overflows for |t| far above |alpha_1| when beta is large
    t = SLOW.alpha1 * frac
    psi, _ = envelope_eval(SLOW, t)
    assert psi_inverse(SLOW, psi) == pytest.approx(t, rel=1e-9)


def test_unordered_envelopes_fail_fast():
    with pytest.raises(ValueError, match="psi > phi"):
        ExhaustionParams(C1=1e-6, beta=1.0, A=5.0, alpha1=-0.5)


def test_default_constants_leave_double_range():
    p = ExhaustionParams()
    L = log_alpha_sequence(p, 2)
    # regression fixture: log(1/|alpha_2|) for the recommended constants
    assert L[1] == pytest.approx(3.31015010e68, rel=1e-8)
    with pytest.raises(RecursionRangeError) as err:
        alpha_sequence(p, 3)
    assert err.value.index == 2
    with pytest.raises(RecursionRangeError) as err:
        log_alpha_sequence(p, 5)
    assert err.value.index == 3


def test_json_roundtrip():
    assert ExhaustionParams.from_json(SLOW.to_json()) == SLOW


def test_sequence_identities(table):
    chk = table.checks
    assert chk.ok
    assert chk.halving_max_error <= 1e-12
    a = table.a_values
    assert np.allclose(a[1::2], a[0::2][: a[1::2].size] / 2, rtol=1e-12, atol=0)
    assert np.all(np.diff(table.alphas) > 0)
    inc = table.increments
    assert np.all((inc >= 0.5 - 1e-12) & (inc <= 1.0))
    nu = np.arange(1, len(table) + 1)
    assert np.all(table.tau_at_breaks >= nu / 2 - table.c0 - 1e-12)


def test_tau_is_convex_and_increasing(table):
    a = table.a_values
    x = np.linspace(a[0], a[-1] * 1.0000001, 20001)
    x = x[x < 0]
    tau = tau_eval(table, x)
    assert np.all(np.diff(tau) >= -1e-12)
    assert np.all(np.diff(tau, 2) >= -1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 1.0))
def test_tau_inverse_roundtrip(frac):
    t = sequence_table(SLOW)
    y = frac * t.tau_at_breaks[-1]
    x = tau_inverse(t, y)
    assert tau_eval(t, x) == pytest.approx(y, rel=1e-9, abs=1e-12)


def test_lambda_examples(table):
    assert lambda_of(table, -table.alphas[0]) == 1
    for nu in range(1, 6):
        t = -table.alphas[nu] * (1 + 1e-9)
        assert lambda_of(table, t) == nu
        assert lambda_of(table, -table.alphas[nu - 1]) >= nu
    with pytest.raises(ValueError):
        lambda_of(table, -table.alphas[0] * 1.01)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=2, max_size=50))
def test_lambda_is_monotone(fracs):
    t = sequence_table(SLOW)
    lo, hi = -t.alphas[-1], -t.alphas[0]
    ts = np.sort(np.exp(np.log(lo) + np.asarray(fracs) * (np.log(hi) - np.log(lo))))
    lam = lambda_of(t, np.clip(ts, lo, hi))
    assert np.all(np.diff(lam) <= 0)


def test_relative_extremal_annulus():
    assert relative_extremal_annulus(0.25, 1.0, 0.5) == pytest.approx(-0.5, rel=1e-14)
    assert relative_extremal_annulus(0.25, 1.0, 0.1j) == -1.0
    assert relative_extremal_annulus(0.25, 1.0, 0.999999) > -1e-5
    with pytest.raises(ValueError):
        relative_extremal_annulus(1.0, 0.5, 0.1)


def test_relative_extremal_annulus_matches_relaxation():
    # radial Laplace equation on [R1, R2] with u(R1) = -1, u(R2) = 0
    from scipy.sparse import diags
    from scipy.sparse.linalg import spsolve

    r = np.linspace(0.25, 1.0, 2001)
    h = r[1] - r[0]
    ri = r[1:-1]
    lower = 1 / h**2 - 1 / (2 * h * ri)
    upper = 1 / h**2 + 1 / (2 * h * ri)
    K = diags([lower[1:], -2 / h**2 * np.ones(ri.size), upper[:-1]], [-1, 0, 1], format="csc")
    b = np.zeros(ri.size)
    b[0] = lower[0] * 1.0
    u = spsolve(K, b)
    assert np.max(np.abs(u - relative_extremal_annulus(0.25, 1.0, ri))) < 1e-3


@pytest.fixture(scope="module")
def patch_report(table):
    return patch_decay_sim(SLOW, table, model=DiskModel())


def test_patch_simulation_checks(patch_report):
    rep = patch_report
    assert rep.checks["overlap_below_3"]
    assert rep.checks["sandwich"]
    assert rep.checks["kappa_above_c3"] and rep.c3 > 0
    assert rep.checks["contraction"]
    assert rep.checks["final_bound"]
    assert rep.epsilon0 == pytest.approx(math.log(1 / (1 - rep.c3)) / rep.l, rel=1e-14)
    M = np.asarray(rep.M_series)
    assert np.all(np.diff(M) <= 1e-12 * np.abs(M[:-1]))


def test_patch_report_serialises(patch_report):
    import json

    d = json.loads(json.dumps(patch_report.to_json(), default=float))
    assert d["l"] == patch_report.l
