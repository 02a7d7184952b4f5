import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from relaxgap.errors import DomainError, InputError
from relaxgap.optimize import OptimizerConfig
from relaxgap.relaxation import verify_decomposition
from relaxgap.simplex import JointDist
from relaxgap.wyner_ziv import (
    RegionKind,
    WzInstance,
    binary_symmetric,
    build_wz,
    delta_grid,
    delta_wz,
    envelope,
    kl_split,
    perfect_side_info,
    random_instance,
    region_csv,
    rwz_xi,
    rwz_xi_alpha,
    shift_polyline,
    wz_region,
)

CFG4 = OptimizerConfig(grid_denominator=4)
CFG8 = OptimizerConfig(grid_denominator=8)


def bsc():
    return binary_symmetric(0.25, u_card_star=2)


def full_q(rng, pr):
    m = np.maximum(rng.dirichlet(np.ones(pr.omega.space.total)), 1e-6)
    return JointDist(pr.omega.space, m / m.sum())


# ---------------------------------------------------------------- instances


def test_instance_defaults_and_validation():
    inst = binary_symmetric(0.25)
    assert (inst.u_card_tilde, inst.u_card_star, inst.z_card) == (2, 8, 2)
    with pytest.raises(InputError):
        WzInstance(np.full((2, 2), 0.25), -np.ones((2, 2)))
    with pytest.raises(InputError):
        WzInstance(np.full((2, 2), 0.25), np.ones((3, 2)))


def test_instance_json_round_trip():
    inst = random_instance(np.random.default_rng(0))
    back = WzInstance.from_dict(json.loads(json.dumps(inst.to_dict())))
    assert np.array_equal(back.p_xy.mass, inst.p_xy.mass)
    assert np.array_equal(back.distortion, inst.distortion)
    with pytest.raises(InputError):
        WzInstance.from_dict({"p_xy": [[0.5, 0.5]]})


# ---------------------------------------------------------------- construction


def test_build_terms():
    pr = build_wz(bsc(), 0.3)
    om, rl = pr.omega, pr.relax
    assert [t.subset for t in om.mu_terms] == [("U", "X", "Y"), ("Y",)]
    assert [t.subset for t in om.eta_terms] == [("U", "Y"), ("X", "Y")]
    assert all(t.coef == 0.7 for t in om.mu_terms + om.eta_terms)
    assert len(om.phi_terms) == 1 and om.phi_terms[0].coef == 0.3
    assert (rl.a_terms[0].given, rl.a_terms[0].target) == (("Y",), ("U",))
    assert (rl.b_terms[0].given, rl.b_terms[0].target) == (("X", "Y"), ("U",))
    assert rl.kappa_sum == rl.nu_sum == 0.7


def test_build_full_distortion_weight_has_no_log_terms():
    pr = build_wz(bsc(), 1.0)
    assert pr.omega.mu_sum == pr.omega.eta_sum == 0.0
    assert pr.relax.kappa_sum == pr.relax.nu_sum == 0.0


def test_build_information_weight_sums():
    pr = build_wz(bsc(), 0.0)
    assert pr.omega.mu_sum == pr.omega.eta_sum == 2.0
    assert pr.relax.kappa_sum == 1.0


def test_build_rejects_weight():
    with pytest.raises(DomainError):
        build_wz(bsc(), 1.5)


@pytest.mark.parametrize("seed", range(4))
def test_decomposition_on_random_relaxed_points(seed):
    rng = np.random.default_rng(seed)
    for _ in range(25):
        pr = build_wz(random_instance(rng), float(rng.uniform(0, 1)))
        assert verify_decomposition(pr.relax, pr.omega, full_q(rng, pr)) <= 1e-9


@given(st.integers(0, 2**31))
def test_kl_split_identity(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng)
    pr = build_wz(inst, 0.5)
    direct, split = kl_split(inst, full_q(rng, pr))
    assert abs(direct - split) <= 1e-9


# ---------------------------------------------------------------- rate values


def test_rate_zero_at_information_weight():
    assert rwz_xi(bsc(), 0.0, CFG4).value == 0.0


def test_rate_zero_at_full_distortion_weight():
    res = rwz_xi(bsc(), 1.0, CFG4)
    assert res.value == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("xi", [0.2, 0.5, 0.9])
def test_rate_zero_with_perfect_side_information(xi):
    assert rwz_xi(perfect_side_info(2, u_card_star=2), xi, CFG4).value == pytest.approx(0.0, abs=1e-12)


def test_rate_concave_in_weight():
    xs = np.linspace(0, 1, 11)
    vals = [rwz_xi(bsc(), float(x), CFG4) for x in xs]
    for a, b, c in zip(vals, vals[1:], vals[2:]):
        assert b.value >= (a.value + c.value) / 2 - 1e-12


def test_penalized_rate_ordering_and_split():
    inst = bsc()
    r = rwz_xi(inst, 0.5, CFG4).value
    prev = -math.inf
    for a in (1.0, 8.0, 64.0):
        ra = rwz_xi_alpha(inst, 0.5, a, CFG4)
        assert ra.value <= r + 1e-12
        assert ra.value >= prev
        assert ra.diagnostics["kl_split_residual"] <= 1e-9
        prev = ra.value


def test_penalized_rate_large_weight():
    inst = bsc()
    r = rwz_xi(inst, 0.5, CFG8).value
    ra = rwz_xi_alpha(inst, 0.5, 1e6, CFG8).value
    assert abs(r - ra) <= 1e-3


def test_penalized_rate_rejects_weight():
    with pytest.raises(DomainError):
        rwz_xi_alpha(bsc(), 0.5, 0.0, CFG4)


# ---------------------------------------------------------------- gaps


def test_gap_zero_with_perfect_side_information():
    res = delta_wz(perfect_side_info(2, u_card_star=2), 8.0, [0.0, 0.5, 1.0], CFG4)
    assert all(abs(r.delta) <= 1e-12 for r in res.rows)


def test_gap_zero_at_full_distortion_weight():
    res = delta_wz(bsc(), 8.0, [1.0], CFG4)
    assert res.rows[0].delta == pytest.approx(0.0, abs=1e-12)


def test_gap_within_bound_and_monotone():
    rows = delta_grid(bsc(), [6.0, 12.0, 24.0], [0.0, 0.4, 0.8], CFG4)
    by_xi = {}
    for r in rows:
        assert r.delta >= -1e-12
        if r.bound is not None:
            assert r.holds_exact
        by_xi.setdefault(r.xi, []).append(r.delta)
    for deltas in by_xi.values():
        assert all(b <= a + 1e-12 for a, b in zip(deltas, deltas[1:]))
    # every weight exceeds 5(1 - xi) on this grid
    assert all(r.bound is not None for r in rows)


def test_gap_rows_below_threshold_carry_no_bound():
    rows = delta_grid(bsc(), [2.0], [0.0], CFG4)
    assert rows[0].bound is None and rows[0].holds is None


# ---------------------------------------------------------------- region


def test_region_perfect_side_information_is_zero():
    polys = wz_region(perfect_side_info(2, u_card_star=2), np.linspace(0, 1, 6), CFG4)
    assert all(r == 0.0 for r, _ in polys[0].points)


def test_region_hyperplanes_convex_and_shift():
    inst = bsc()
    xs = np.linspace(0, 1, 11)
    polys = wz_region(inst, xs, CFG4, converse=(10_000, 0.5, 1.0, 1.0))
    inner, outer = polys
    assert inner.kind is RegionKind.INNER_DESCRIPTION and outer.kind is RegionKind.OUTER_SHIFTED
    rates = {x: rwz_xi(inst, float(x), CFG4).value for x in xs}
    for r, d in inner.points:
        for x, rv in rates.items():
            assert (1 - x) * r + x * d >= rv - inner.certified_gap - 1e-12
    rs = [r for r, _ in inner.points]
    assert all(b <= a + 1e-12 for a, b in zip(rs, rs[1:]))
    slopes = np.diff(rs) / np.diff([d for _, d in inner.points])
    assert np.all(np.diff(slopes) >= -1e-9)
    nu = outer.shift
    for (r0, d0), (r1, d1) in zip(inner.points, outer.points):
        assert r1 == max(r0 - nu, 0.0) and d1 == max(d0 - nu, 0.0)


def test_zero_shift_is_identity():
    inner = wz_region(bsc(), [0.0, 0.5, 1.0], CFG4)[0]
    assert shift_polyline(inner, 0.0).points == inner.points


def test_region_csv_format():
    polys = wz_region(bsc(), [0.0, 0.5, 1.0], CFG4)
    text = region_csv(polys)
    lines = text.split("\n")
    assert lines[0] == "xi,rate,distortion,kind"
    assert text.endswith("\n") and "\r" not in text
    assert all(line.endswith(",inner") for line in lines[1:-1])


def test_envelope_clamps_at_zero():
    pts, _ = envelope([0.0, 0.5], [0.0, 0.1], np.linspace(0, 1, 5))
    assert all(r >= 0 for r, _ in pts)


def test_region_rejects_grid():
    with pytest.raises(DomainError):
        wz_region(bsc(), [0.5, 1.2], CFG4)
