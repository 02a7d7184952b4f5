import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from relaxgap.bounds import (
    bound_report,
    converse_gap,
    prop1_bound,
    prop2_bound,
    prop2_threshold,
    prop3_wz_bound,
    reports_csv,
    upsilon,
    upsilon_prime,
    upsilon_star,
)
from relaxgap.errors import DomainError
from relaxgap.wyner_ziv import binary_symmetric, build_wz

# ---------------------------------------------------------------- baseline bound


def test_prop1_zero_constant():
    assert prop1_bound(1.0, 0.0, 8.0, 16) == 0.0


def test_prop1_by_hand():
    assert prop1_bound(1.0, 1.0, 8.0, 16) == pytest.approx(0.5 * math.log(32 * math.e), abs=1e-15)
    assert prop1_bound(1.0, 1.0, 8.0, 16) == pytest.approx(2.2329, abs=1e-4)


def test_prop1_domain():
    with pytest.raises(DomainError):
        prop1_bound(0.0, 1.0, 8.0, 16)
    with pytest.raises(DomainError):
        prop1_bound(1.0, 1.0, 0.0, 16)


def test_prop1_eventually_decreasing():
    alphas = np.geomspace(10.0, 1e8, 60)
    vals = [prop1_bound(1.0, 1.0, a, 16) for a in alphas]
    assert all(b < a for a, b in zip(vals, vals[1:]))


# ---------------------------------------------------------------- curvature bound


def test_prop2_cases():
    assert prop2_bound(0.0, 0.0, 5.0, 1.0) == 0.0
    assert prop2_bound(1.0, 1.0, 5.0, 1.0) == pytest.approx(0.1875, abs=1e-15)


def test_prop2_threshold_enforced():
    thr, s = prop2_threshold("+", 1.0, 1.0, 0.5, 0.5)
    assert (thr, s) == (2.5, 0.5)
    with pytest.raises(DomainError):
        prop2_bound(1.0, 1.0, 2.5, s, threshold=thr)
    with pytest.raises(DomainError):
        prop2_threshold("x", 1, 1, 1, 1)


@given(st.floats(0.0, 10), st.floats(0.0, 10), st.floats(0.0, 3), st.floats(0.01, 100))
def test_prop2_decreasing_and_homogeneous(rho, c, s, step):
    a = s + 1.0
    b1, b2 = prop2_bound(rho, c, a, s), prop2_bound(rho, c, a + step, s)
    assert b2 <= b1
    if rho + c > 0:
        assert b2 < b1
    assert prop2_bound(2 * rho, 2 * c, a, s) == pytest.approx(2 * b1, rel=1e-15)


def test_prop2_leading_term():
    for a in (1e3, 1e5, 1e7):
        assert prop2_bound(1.3, 2.0, a, 0.5) * (a - 0.5) == pytest.approx(0.65, rel=10 / a)


# ---------------------------------------------------------------- side-information bound


def test_prop3_full_distortion_weight():
    assert prop3_wz_bound(1.0, 1.0, 2.0, 1.0) == pytest.approx(0.5 / 2 + 1 / 4, abs=1e-15)


def test_prop3_by_hand():
    assert prop3_wz_bound(1.0, 1.0, 6.0, 0.0) == pytest.approx(0.14, abs=1e-15)
    with pytest.raises(DomainError):
        prop3_wz_bound(1.0, 1.0, 5.0, 0.0)


@pytest.mark.parametrize("xi", np.linspace(0, 1, 11))
def test_threshold_identity(xi):
    pr = build_wz(binary_symmetric(0.25, u_card_star=2), float(xi))
    thr, s = prop2_threshold("-", pr.omega.mu_sum, pr.omega.eta_sum,
                             pr.relax.kappa_sum, pr.relax.nu_sum)
    assert thr == 5.0 * (1.0 - xi)
    assert s == 1.0 - xi


# ---------------------------------------------------------------- reports


def test_bound_report_and_csv():
    r = bound_report("a", 0.1, 0.2, 0.05, {"alpha": 8.0})
    assert r.holds1 and not r.holds2
    text = reports_csv([r])
    assert text.splitlines()[0] == "instance,alpha,measured_gap,prop1,prop2,holds1,holds2"
    assert text.endswith("\n") and "\r" not in text


# ---------------------------------------------------------------- blocklength gaps


def test_converse_by_hand():
    cg = converse_gap(1.0, 1.0, 10_000, 0.5)
    lt = math.log(2.0)
    assert cg.alpha_star == pytest.approx(math.sqrt(10_000 / (2 * lt)) + 1, rel=1e-12)
    assert cg.upsilon_star == pytest.approx(math.sqrt(2 * lt / 10_000) + 3 * lt / 10_000, rel=1e-12)
    assert cg.alpha_star == pytest.approx(85.93, abs=5e-3)
    assert cg.upsilon_star == pytest.approx(0.011982, abs=1e-6)


def test_comparison_quantity_by_hand():
    assert upsilon_prime(1.0, 10_000, 0.5) == pytest.approx(0.015635, abs=1e-6)
    with pytest.raises(DomainError):
        upsilon_prime(0.0, 10_000, 0.5)


def test_converse_scaling():
    r = upsilon_star(1.0, 1.0, 4_000_000, 0.5) / upsilon_star(1.0, 1.0, 1_000_000, 0.5)
    assert abs(r - 0.5) <= 0.01


@pytest.mark.parametrize("rho,c,n,eps", [(1, 1, 10_000, 0.5), (0.3, 2, 500, 0.1), (2, 0, 10**6, 0.9)])
def test_closed_form_weight_beats_log_grid(rho, c, n, eps):
    cg = converse_gap(rho, c, n, eps)
    at = upsilon(rho, c, n, eps, cg.alpha_star)
    for a in cg.alpha_star * 2.0 ** np.arange(-5, 6):
        if a > 1:
            assert at <= upsilon(rho, c, n, eps, float(a)) * (1 + 1e-12)


def test_converse_domain():
    with pytest.raises(DomainError):
        converse_gap(1.0, 1.0, 100, 1.0)
    with pytest.raises(DomainError):
        converse_gap(1.0, 1.0, 0, 0.5)
    with pytest.raises(DomainError):
        converse_gap(0.0, 1.0, 100, 0.5)
    with pytest.raises(DomainError):
        converse_gap(1.0, 1.0, 100, 0.5, alpha=4.0)
    cg = converse_gap(1.0, 1.0, 100, 0.5, alpha=6.0, c_cmp=1.0)
    assert cg.alpha == 6.0 and cg.upsilon_prime is not None
