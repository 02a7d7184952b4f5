"""Acceptance criteria at desk scale.

Each test records one ``#k PASS|FAIL`` line, printed in the terminal summary
and also to stdout (visible with ``-s``).
"""

import json
import time

import pytest

from conftest import ACCEPTANCE_LINES
from relaxgap.cli import main
from relaxgap.suite import (
    DERIV_RTOL, HOLDER_TOL, IDENTITY_TOL, SuiteConfig, check_converse, check_crossover,
    check_decomposition, check_derivatives, check_holder, check_key_inequalities,
    check_oracle_heuristic, check_prop1, check_prop2, check_prop3, check_sandwich, gap_rows,
)

SLACK = 1e-9
SUITE = SuiteConfig()


def record(k, title, ok, text):
    line = f"#{k} {'PASS' if ok else 'FAIL'} {title}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def timed(fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def rows():
    return timed(gap_rows, SUITE)


def test_01_sandwich(rows):
    rs, dt = rows
    r, dc = timed(check_sandwich, rs)
    dt += dc
    ok = r.holds and r.detail["failures"] == 0 and SUITE.instances >= 100 and dt <= 300
    record(1, "sandwich", ok, f"worst wrong-side margin {r.measured:.3e} <= {SLACK:g} "
           f"over {r.count} rows, {SUITE.instances} instances, {dt:.1f}s")


def test_02_prop1(rows):
    rs, dt = rows
    r = check_prop1(rs)
    record(2, "baseline bound", r.holds and dt <= 300,
           f"max(gap - bound) {r.measured:.3e} <= {SLACK:g} over {r.count} rows, "
           f"alphas 1..4096, {dt:.1f}s")


def test_03_prop2(rows):
    rs, dt = rows
    r = check_prop2(rs)
    record(3, "curvature bound", r.holds and r.count > 0 and dt <= 900,
           f"max(gap - bound) {r.measured:.3e} <= {SLACK:g} over {r.count} rows, "
           f"max gap/bound {r.detail['max_ratio']:.3f}, {dt:.1f}s")


def test_04_crossover(rows):
    r = check_crossover(rows[0])
    record(4, "improvement crossover", r.holds,
           f"{int(r.measured)} of {r.count} instance-sides without a crossover, "
           f"largest alpha0 {r.detail['max_alpha0']:g}")


def test_05_derivatives():
    r = check_derivatives(SUITE)
    record(5, "cumulant derivatives", r.holds and r.count >= 100,
           f"worst scaled error {r.measured:.3e} (<= 1 means within rtol {DERIV_RTOL:g}) "
           f"over {r.count} samples")


def test_06_holder():
    r = check_holder(SUITE)
    record(6, "Holder factors", r.holds and SUITE.holder_samples >= 1000,
           f"max factor - 1 = {r.measured:.3e} <= {HOLDER_TOL:g}; boundary deviation "
           f"{r.detail['boundary_deviation']:.1e}, constrained deviation "
           f"{r.detail['constrained_deviation']:.1e}, {SUITE.holder_samples} samples")


def test_07_key_inequalities():
    r = check_key_inequalities(SUITE)
    parts = ", ".join(f"{k} {v:.2e}" for k, v in r.detail.items())
    record(7, "key inequalities", r.holds and SUITE.key_samples >= 1000,
           f"worst margin {r.measured:.3e} <= {SLACK:g} ({parts})")


def test_08_decomposition():
    r = check_decomposition(SUITE)
    record(8, "side-information decomposition", r.holds,
           f"pointwise {r.detail['pointwise_residual']:.2e}, KL split "
           f"{r.detail['kl_split_residual']:.2e} <= {IDENTITY_TOL:g}")


def test_09_prop3():
    r, dt = timed(check_prop3, SUITE)
    ok = r.holds and r.detail["threshold_identity"] and len(SUITE.effective_xi_grid()) == 11
    record(9, "side-information bound", ok,
           f"max(delta - bound) {r.measured:.3e} over {r.count} valid rows at N="
           f"{SUITE.prop3_denominator}, threshold identity "
           f"{r.detail['threshold_identity']}, {dt:.1f}s")


def test_10_converse():
    r = check_converse(SUITE)
    d = r.detail
    ok = r.holds and abs(d["alpha_star"] - 85.93) < 5e-3 and abs(d["upsilon_star"] - 0.011982) < 1e-6
    record(10, "converse gap formulas", ok,
           f"alpha* {d['alpha_star']:.6f}, upsilon* {d['upsilon_star']:.7f}, rel err "
           f"{r.measured:.1e}, 4x-n ratio {d['scaling_ratio']:.5f}, minimal on grid "
           f"{d['star_minimal_on_grid']}")


def test_11_oracle_heuristic():
    r = check_oracle_heuristic(SUITE)
    d = r.detail
    record(11, "oracle/heuristic agreement", r.holds,
           f"{r.measured:.0%} within certified gap, {d['beyond_gap']} beyond it, "
           f"{d['close_fraction']:.0%} within 1e-6, "
           f"advantage range [{d['min_advantage']:.2e}, {d['max_advantage']:.2e}], "
           f"median |diff| {d['median_abs_difference']:.2e}")


def test_12_determinism(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"suite": {
        "instances": 10, "derivative_samples": 20, "holder_samples": 50, "key_samples": 50,
        "decomposition_samples": 20, "heuristic_instances": 5, "prop3_denominator": 4}}))
    reports = []
    for tag in ("a", "b"):
        assert main(["verify", "--config", str(cfg), "--out", str(tmp_path / tag)]) == 0
        rep = json.loads((tmp_path / tag / "report.json").read_text())
        for key in ("timestamp", "wall_time"):
            rep.pop(key)
        rep["config"].pop("out")
        reports.append(json.dumps(rep, sort_keys=True))
    wz = []
    for tag in ("c", "d"):
        assert main(["wz", "--resolution", "1/4", "--alpha", "8,16", "--n", "1000",
                     "--epsilon", "0.5", "--out", str(tmp_path / tag)]) == 0
        wz.append((tmp_path / tag / "gaps.csv").read_bytes())
    ok = reports[0] == reports[1] and wz[0] == wz[1]
    record(12, "determinism", ok, "verify report and wz gaps.csv identical across reruns "
           "(timestamp and wall_time excluded)")
