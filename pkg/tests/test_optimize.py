import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from relaxgap.errors import CapExceededError, DomainError, InputError
from relaxgap.omega import OmegaSpec, psi_tilde
from relaxgap.optimize import (
    Method,
    OptimizerConfig,
    Sense,
    composition_count,
    compositions,
    covering_radius,
    curvature_constants,
    denominator_of,
    extremize_psi_alpha,
    extremize_psi_tilde,
    grid_enumerate,
    omega_tilde_max,
)
from relaxgap.relaxation import FeasibleSet, FixedMarginal, SetKind
from relaxgap.simplex import AlphabetProduct, JointDist
from relaxgap.wyner_ziv import binary_symmetric, build_wz, closed_sets

B = AlphabetProduct(("X",), (2,))
SQ = AlphabetProduct(("X", "Y"), (2, 2))
CFG4 = OptimizerConfig(grid_denominator=4)


def free(space):
    return FeasibleSet(SetKind.P_STAR, space, ())


# ---------------------------------------------------------------- configuration


def test_config_invariants():
    with pytest.raises(InputError):
        OptimizerConfig(grid_denominator=1)
    with pytest.raises(InputError):
        OptimizerConfig(restarts=0)
    with pytest.raises(InputError):
        OptimizerConfig(near_max_tol=0.0)
    assert OptimizerConfig.from_resolution("1/8").grid_denominator == 8
    assert denominator_of(0.25) == 4
    with pytest.raises(InputError):
        denominator_of("1/2.5")


# ---------------------------------------------------------------- enumeration


def test_binary_grid_two():
    pts = [tuple(d.mass) for d in grid_enumerate(free(B), B, "1/2")]
    assert sorted(pts) == [(0.0, 1.0), (0.5, 0.5), (1.0, 0.0)]


def test_binary_grid_four_has_five_points():
    assert len(list(grid_enumerate(free(B), B, "1/4"))) == 5


def test_uniform_marginal_filter_by_hand():
    fs = FeasibleSet(SetKind.TILDE_P, SQ, (FixedMarginal(("X",), JointDist.uniform(B)),))
    pts = [d.mass for d in grid_enumerate(fs, SQ, "1/4")]
    # each row independently splits 1/2 as (0, 1/2), (1/4, 1/4) or (1/2, 0)
    assert len(pts) == 9
    for m in pts:
        assert np.allclose(m.reshape(2, 2).sum(axis=1), 0.5)


def test_enumeration_order_is_deterministic():
    a = [d.mass.tolist() for d in grid_enumerate(free(SQ), SQ, "1/3")]
    b = [d.mass.tolist() for d in grid_enumerate(free(SQ), SQ, "1/3")]
    assert a == b


def test_cap_refusal():
    space = AlphabetProduct(("A", "B"), (3, 3))
    with pytest.raises(CapExceededError, match="cap"):
        list(grid_enumerate(free(space), space, "1/40", cap=1000))


@given(st.integers(1, 5), st.integers(1, 6))
def test_composition_count(k, n):
    rows = compositions(k, n)
    assert rows.shape == (composition_count(k, n), k)
    assert np.all(rows.sum(axis=1) == n)
    assert len({tuple(r) for r in rows}) == rows.shape[0]


def test_covering_radius_small_cases():
    assert covering_radius(1, 4) == 0.0
    # midpoint of a binary simplex grid cell
    assert covering_radius(2, 4) == pytest.approx(0.25)


# ---------------------------------------------------------------- oracle


def test_empty_spec_extremum_is_zero():
    res = extremize_psi_tilde(OmegaSpec(SQ), free(SQ), Sense.MAX, CFG4)
    assert res.value == 0.0
    assert res.method is Method.ORACLE
    assert math.isfinite(res.certified_gap)


def test_information_weight_minimum_is_zero():
    pr = build_wz(binary_symmetric(0.2, u_card_star=2), 0.0)
    res = extremize_psi_tilde(pr.omega, pr.tilde, Sense.MIN, CFG4)
    assert res.value == pytest.approx(0.0, abs=1e-12)


def test_oracle_result_is_feasible_and_exact():
    pr = build_wz(binary_symmetric(0.2, u_card_star=2), 0.4)
    res = extremize_psi_tilde(pr.omega, pr.tilde, Sense.MAX, CFG4)
    assert pr.tilde.contains(res.argument)
    assert psi_tilde(pr.omega, res.argument) == pytest.approx(res.value, abs=1e-12)


def test_oracle_deterministic():
    pr = build_wz(binary_symmetric(0.2, u_card_star=2), 0.4)
    a = extremize_psi_tilde(pr.omega, pr.tilde, Sense.MIN, CFG4)
    b = extremize_psi_tilde(pr.omega, pr.tilde, Sense.MIN, CFG4)
    assert a.value == b.value
    assert np.array_equal(a.argument.mass, b.argument.mass)


def test_heuristic_never_beats_oracle_beyond_gap():
    pr = build_wz(binary_symmetric(0.2, u_card_star=2), 0.3)
    cfg = OptimizerConfig(grid_denominator=8, restarts=4, max_iters=300)
    for sense in (Sense.MIN, Sense.MAX):
        o = extremize_psi_tilde(pr.omega, pr.tilde, sense, cfg)
        h = extremize_psi_tilde(pr.omega, pr.tilde, sense, cfg, Method.HEURISTIC)
        assert h.method is Method.HEURISTIC and h.certified_gap == math.inf
        assert pr.tilde.contains(h.argument)
        adv = h.value - o.value if sense is Sense.MAX else o.value - h.value
        assert adv <= o.certified_gap


def test_heuristic_deterministic():
    pr = build_wz(binary_symmetric(0.2, u_card_star=2), 0.3)
    cfg = OptimizerConfig(grid_denominator=4, restarts=2, max_iters=50, seed=7)
    a = extremize_psi_tilde(pr.omega, pr.tilde, Sense.MIN, cfg, Method.HEURISTIC)
    b = extremize_psi_tilde(pr.omega, pr.tilde, Sense.MIN, cfg, Method.HEURISTIC)
    assert a.value == b.value
    assert np.array_equal(a.argument.mass, b.argument.mass)


# ---------------------------------------------------------------- penalized extrema


@pytest.fixture(scope="module")
def shared():
    pr = build_wz(binary_symmetric(0.2, u_card_star=2), 0.4)
    tilde, star = closed_sets(pr, CFG4)
    return pr, tilde, star


def test_sandwich_and_monotonicity(shared):
    pr, tilde, star = shared
    tmax = extremize_psi_tilde(pr.omega, tilde, Sense.MAX, CFG4).value
    tmin = extremize_psi_tilde(pr.omega, tilde, Sense.MIN, CFG4).value
    prev_max, prev_min = math.inf, -math.inf
    for a in (0.0, 1.0, 4.0, 16.0, 64.0):
        vmax = extremize_psi_alpha(pr.omega, pr.relax, star, a, Sense.MAX, CFG4).value
        vmin = extremize_psi_alpha(pr.omega, pr.relax, star, a, Sense.MIN, CFG4).value
        assert tmax <= vmax + 1e-12 and vmin <= tmin + 1e-12
        assert vmax <= prev_max and vmin >= prev_min
        prev_max, prev_min = vmax, vmin


def test_large_weight_closes_gap(shared):
    pr, tilde, star = shared
    tmax = extremize_psi_tilde(pr.omega, tilde, Sense.MAX, CFG4).value
    vmax = extremize_psi_alpha(pr.omega, pr.relax, star, 1e6, Sense.MAX, CFG4).value
    assert 0 <= vmax - tmax <= 1e-3


def test_penalized_on_constrained_grid_equals_plain(shared):
    pr, tilde, _ = shared
    restricted = pr.star.with_points(tilde.points)
    for a in (1.0, 10.0):
        v = extremize_psi_alpha(pr.omega, pr.relax, restricted, a, Sense.MAX, CFG4).value
        t = extremize_psi_tilde(pr.omega, tilde, Sense.MAX, CFG4).value
        assert v == pytest.approx(t, abs=1e-12)


def test_negative_weight_rejected(shared):
    pr, _, star = shared
    with pytest.raises(DomainError):
        extremize_psi_alpha(pr.omega, pr.relax, star, -1.0, Sense.MAX, CFG4)


# ---------------------------------------------------------------- cumulant maximum and curvature


def test_cumulant_max_at_zero_and_constant():
    spec = OmegaSpec(SQ, phi_terms=[(1.5, np.ones(4))])
    assert omega_tilde_max(spec, free(SQ), 0.0, CFG4).value == 0.0
    assert omega_tilde_max(spec, free(SQ), 0.4, CFG4).value == pytest.approx(0.6, abs=1e-15)


def test_cumulant_max_rejects_outside_half_window(shared):
    pr, tilde, _ = shared
    hi = pr.omega.derivative_window[1]
    with pytest.raises(DomainError):
        omega_tilde_max(pr.omega, tilde, 1.5 * hi, CFG4)


def test_cumulant_max_taylor_bound(shared):
    pr, tilde, _ = shared
    cc = curvature_constants(pr.omega, tilde, CFG4)
    tmax = extremize_psi_tilde(pr.omega, tilde, Sense.MAX, CFG4).value
    lam = pr.omega.derivative_window[1]
    val = omega_tilde_max(pr.omega, tilde, lam, CFG4).value
    assert math.isfinite(val)
    assert val <= lam * tmax + lam**2 * (cc.rho_plus / 2 + lam * cc.c_plus) + 1e-9


def test_curvature_constant_functional_is_zero():
    spec = OmegaSpec(SQ, phi_terms=[(1.0, np.ones(4))], mu_terms=[(1.0, ("X",))])
    pts = np.array([[0.25, 0.25, 0.25, 0.25], [0.5, 0.0, 0.5, 0.0]])
    # omega is constant on the support of both points: phi plus log(1/2)
    cc = curvature_constants(spec, free(SQ).with_points(pts), CFG4, lambda_cap=1.0)
    assert cc.rho_plus == pytest.approx(0.0, abs=1e-15)
    assert cc.c_minus == pytest.approx(0.0, abs=1e-15)


def test_curvature_singleton_is_variance():
    rng = np.random.default_rng(3)
    spec = OmegaSpec(SQ, phi_terms=[(1.0, rng.uniform(0, 1, 4))], mu_terms=[(0.5, ("X",))],
                     eta_terms=[(0.5, ("Y",))])
    p = rng.dirichlet(np.ones(4))
    cc = curvature_constants(spec, free(SQ).with_points(p[None]), CFG4)
    from relaxgap.omega import omega_tilde_derivatives

    var = omega_tilde_derivatives(spec, JointDist(SQ, p), 0.0)[1]
    assert all(v == pytest.approx(var, abs=1e-14) for v in cc.rho_by_lambda_plus)
    assert all(v == pytest.approx(var, abs=1e-14) for v in cc.rho_by_lambda_minus)


def test_curvature_reproducible_and_tolerance_monotone(shared):
    pr, tilde, _ = shared
    a = curvature_constants(pr.omega, tilde, CFG4)
    b = curvature_constants(pr.omega, tilde, CFG4)
    assert a == b
    wide = curvature_constants(pr.omega, tilde, OptimizerConfig(grid_denominator=4,
                                                                 near_max_tol=1e-2))
    for x, y in zip(a.rho_by_lambda_plus + a.rho_by_lambda_minus,
                    wide.rho_by_lambda_plus + wide.rho_by_lambda_minus):
        assert y >= x


def test_curvature_needs_cap_for_unbounded_window():
    pr = build_wz(binary_symmetric(0.2, u_card_star=2), 1.0)
    with pytest.raises(DomainError):
        curvature_constants(pr.omega, pr.tilde, CFG4)
    cc = curvature_constants(pr.omega, pr.tilde, CFG4, lambda_cap=0.5)
    assert cc.lambda_grid_plus[-1] == 0.5
