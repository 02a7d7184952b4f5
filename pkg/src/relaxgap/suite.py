"""Verification checks shared by the command line and the acceptance tests.

Each check draws seeded random instances, evaluates an inequality or
identity and returns a :class:`CheckResult` holding the worst observed
violation margin.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import mpmath
import numpy as np

from .bounds import (
    SLACK,
    converse_gap,
    prop1_bound,
    prop2_bound,
    prop2_threshold,
    upsilon,
    upsilon_star,
)
from .errors import DomainError, RelaxGapError
from .omega import omega_tables, omega_tilde_lambda, tilted_moments
from .optimize import (
    Method,
    OptimizerConfig,
    Sense,
    curvature_constants,
    extremize_psi_alpha,
    extremize_psi_tilde,
    _point_values,
    _psi_values,
    _penalty_values,
)
from .relaxation import (
    apply_map,
    big_omega,
    hat_check_omega,
    holder_factors,
    psi_alpha,
    relaxed_tables,
    verify_decomposition,
)
from .simplex import JointDist
from .wyner_ziv import (
    WzProblem,
    binary_symmetric,
    build_wz,
    closed_sets,
    delta_grid,
    kl_split,
    random_instance,
    refined_sets,
)

HOLDER_TOL = 1e-12
DERIV_RTOL = 1e-5
DERIV_ATOL = 1e-12
IDENTITY_TOL = 1e-9
DEFAULT_ALPHAS = tuple(float(2 ** k) for k in range(0, 13))


@dataclass
class CheckResult:
    """Outcome of one named check.

    ``measured`` is the worst value of the checked quantity and ``bound``
    the limit it is compared with; ``holds`` is true iff every sample passed.
    """

    name: str
    measured: float
    bound: float
    holds: bool
    slack: float
    count: int
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class SuiteConfig:
    seed: int = 42
    instances: int = 100
    grid_denominator: int = 4
    alphas: tuple[float, ...] = DEFAULT_ALPHAS
    lambda_samples: int = 9
    derivative_samples: int = 100
    holder_samples: int = 1000
    key_samples: int = 1000
    decomposition_samples: int = 200
    prop3_denominator: int = 8
    prop3_alphas: tuple[float, ...] = (8.0,)
    prop3_crossover: float = 0.25
    xi_points: int = 11
    xi_grid: tuple[float, ...] | None = None
    heuristic_instances: int = 100
    heuristic_denominator: int = 8
    heuristic_restarts: int = 8
    heuristic_iters: int = 500
    converse_n: int = 10000
    converse_epsilon: float = 0.5
    converse_rho: float = 1.0
    converse_c: float = 1.0

    def to_dict(self) -> dict:
        return asdict(self)

    def effective_xi_grid(self) -> tuple[float, ...]:
        if self.xi_grid is not None:
            return tuple(float(x) for x in self.xi_grid)
        return tuple(float(x) for x in np.linspace(0.0, 1.0, self.xi_points))


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, stream])


def _draw_problem(rng: np.random.Generator, xi_one_prob: float = 0.1) -> WzProblem:
    inst = random_instance(rng)
    xi = 1.0 if rng.random() < xi_one_prob else float(rng.uniform(0.0, 1.0))
    return build_wz(inst, xi)


def _draw_q(rng: np.random.Generator, problem: WzProblem) -> JointDist:
    """A full-support relaxed point; full support implies the support predicate."""
    space = problem.omega.space
    m = rng.dirichlet(np.full(space.total, 0.7))
    m = np.maximum(m, 1e-6)
    return JointDist(space, m / m.sum())


# ---------------------------------------------------------------- gaps


@dataclass
class GapRow:
    instance: int
    xi: float
    side: str
    alpha: float
    gap: float
    prop1: float
    prop2: float | None
    sandwich: bool


def _relaxed_values(problem, star, cfg):
    psi = _point_values("psi", problem.omega, star.points,
                        lambda c: _psi_values(problem.omega, c), cfg.chunk_size)
    kl = _penalty_values(problem.relax, star.points, cfg.chunk_size)
    return psi, kl


def instance_gap_rows(idx: int, problem: WzProblem, alphas: Sequence[float],
                      cfg: OptimizerConfig, probe_cfg: OptimizerConfig,
                      lambda_samples: int = 9) -> tuple[list[GapRow], dict]:
    """Gaps and both bounds for every alpha on one instance's closed sets."""
    om, rl = problem.omega, problem.relax
    tilde, star = closed_sets(problem, cfg)
    # probe off-grid relaxed points at a moderate weight on both sides
    thr = max(prop2_threshold("+", om.mu_sum, om.eta_sum, rl.kappa_sum, rl.nu_sum)[0],
              prop2_threshold("-", om.mu_sum, om.eta_sum, rl.kappa_sum, rl.nu_sum)[0])
    probe_alpha = max(2.0 * thr, 2.0)
    extra = []
    for sense in (Sense.MAX, Sense.MIN):
        anchor = extremize_psi_tilde(om, tilde, sense, cfg).argument
        h = extremize_psi_alpha(om, rl, problem.star, probe_alpha, sense, probe_cfg,
                                Method.HEURISTIC)
        t = np.linspace(0.0, 1.0, 32)[:, None]
        seg = (1 - t) * anchor.mass[None] + t * h.argument.mass[None]
        extra.append(seg / seg.sum(axis=1, keepdims=True))
    tilde, star = refined_sets(problem, cfg, np.concatenate(extra))
    tmax = extremize_psi_tilde(om, tilde, Sense.MAX, cfg).value
    tmin = extremize_psi_tilde(om, tilde, Sense.MIN, cfg).value
    psi, kl = _relaxed_values(problem, star, cfg)
    k_bound = max(tmax, om.analytic_cap())
    total = om.space.total
    sides = {}
    lams = []
    for side in ("+", "-"):
        thr_s, s = prop2_threshold(side, om.mu_sum, om.eta_sum, rl.kappa_sum, rl.nu_sum)
        valid = [a for a in alphas if a > thr_s]
        sides[side] = (thr_s, s, valid)
        lams += [(1.0 if side == "+" else -1.0) / (a - s) for a in valid]
    cap = max((abs(v) for v in lams), default=1.0)
    curv = curvature_constants(om, tilde, cfg, lambda_samples, extra_lambdas=lams,
                               lambda_cap=cap)
    rows = []
    for alpha in alphas:
        with np.errstate(invalid="ignore"):
            pmax = float(np.nanmax(psi - alpha * kl))
            pmin = float(np.nanmin(psi + alpha * kl))
        p1 = prop1_bound(k_bound, om.K_prime, alpha, total) if k_bound > 0 else 0.0
        for side, gap, ok in (
            ("+", pmax - tmax, tmax <= pmax + SLACK),
            ("-", tmin - pmin, pmin <= tmin + SLACK),
        ):
            thr_s, s, _ = sides[side]
            p2 = None
            if alpha > thr_s:
                rho, c = curv.side(side)
                p2 = prop2_bound(rho, c, alpha, s, threshold=thr_s)
            rows.append(GapRow(idx, problem.xi, side, float(alpha), gap, p1, p2, ok))
    info = {"psi_max": tmax, "psi_min": tmin, "K": k_bound, "K_prime": om.K_prime,
            "rho_plus": curv.rho_plus, "rho_minus": curv.rho_minus,
            "c_plus": curv.c_plus, "c_minus": curv.c_minus}
    return rows, info


def gap_rows(sc: SuiteConfig) -> list[GapRow]:
    rng = _rng(sc.seed, 1)
    cfg = OptimizerConfig(grid_denominator=sc.grid_denominator, seed=sc.seed)
    probe = OptimizerConfig(grid_denominator=sc.grid_denominator, seed=sc.seed,
                            restarts=2, max_iters=200)
    rows = []
    for i in range(sc.instances):
        r, _ = instance_gap_rows(i, _draw_problem(rng), sc.alphas, cfg, probe,
                                 sc.lambda_samples)
        rows.extend(r)
    return rows


def _worst(name, margins, limit, count, slack=SLACK, **detail) -> CheckResult:
    worst = max(margins) if margins else -math.inf
    return CheckResult(name, float(worst), float(limit), bool(worst <= limit + slack),
                       slack, count, detail)


def check_sandwich(rows: list[GapRow]) -> CheckResult:
    # margin: how far the relaxed extremum falls on the wrong side
    margins = [-r.gap for r in rows]
    return _worst("sandwich", margins, 0.0, len(rows),
                  failures=sum(not r.sandwich for r in rows))


def check_prop1(rows: list[GapRow]) -> CheckResult:
    margins = [r.gap - r.prop1 for r in rows]
    return _worst("prop1_validity", margins, 0.0, len(rows),
                  max_gap=max(r.gap for r in rows))


def check_prop2(rows: list[GapRow]) -> CheckResult:
    sel = [r for r in rows if r.prop2 is not None]
    margins = [r.gap - r.prop2 for r in sel]
    ratios = [r.gap / r.prop2 for r in sel if r.gap > 0 and r.prop2 > 0]
    return _worst("prop2_validity", margins, 0.0, len(sel),
                  max_ratio=max(ratios, default=0.0))


def check_crossover(rows: list[GapRow]) -> CheckResult:
    """Per instance and side, prop2 < prop1 for every alpha from some point on."""
    groups: dict = {}
    for r in rows:
        if r.prop2 is not None:
            groups.setdefault((r.instance, r.side), []).append(r)
    failures = []
    crossover = []
    for key, rs in groups.items():
        rs.sort(key=lambda r: r.alpha)
        below = [r.prop2 < r.prop1 for r in rs]
        # smallest index from which every later entry is strictly below
        start = len(below)
        while start > 0 and below[start - 1]:
            start -= 1
        if start == len(below):
            failures.append(key)
        else:
            crossover.append(rs[start].alpha)
    measured = float(len(failures))
    return CheckResult("improvement_crossover", measured, 0.0, not failures, 0.0,
                       len(groups), {"max_alpha0": max(crossover, default=math.nan),
                                     "failures": [list(k) for k in failures[:10]]})


# ---------------------------------------------------------------- derivatives


def _mp_log_mgf(mass: np.ndarray, table: np.ndarray):
    on = mass > 0
    ms = [mpmath.mpf(float(v)) for v in mass[on]]
    ws = [mpmath.mpf(float(v)) for v in table[on]]

    def f(lam):
        return mpmath.log(mpmath.fsum(m * mpmath.exp(lam * w) for m, w in zip(ms, ws)))

    return f


def _close(a: float, b: float) -> float:
    """Violation ratio: <= 1 means within the relative tolerance."""
    return abs(a - b) / (DERIV_RTOL * abs(b) + DERIV_ATOL)


def finite_difference_derivatives(mass, table, lam, dps: int = 40):
    """First three derivatives of the log-MGF by high-precision differencing."""
    with mpmath.workdps(dps):
        f = _mp_log_mgf(mass, table)
        return tuple(float(mpmath.diff(f, mpmath.mpf(float(lam)), n)) for n in (1, 2, 3))


def check_derivatives(sc: SuiteConfig) -> CheckResult:
    rng = _rng(sc.seed, 2)
    worst, count = 0.0, 0
    for i in range(sc.derivative_samples):
        problem = _draw_problem(rng)
        q = _draw_q(rng, problem)
        om, rl = problem.omega, problem.relax
        lo, hi = om.derivative_window
        lo = max(lo, -2.0)
        hi = min(hi, 2.0)
        lam = float(rng.uniform(lo, hi))
        w = omega_tables(om, q.mass[None])
        got = tilted_moments(q.mass[None], w, lam)
        ref = finite_difference_derivatives(q.mass, w[0], lam)
        worst = max(worst, *(_close(float(g[0]), r) for g, r in zip(got, ref)))
        alpha = float(rng.uniform(0.5, 10.0)) * (1 if i % 2 == 0 else -1)
        if alpha > 0:
            theta = float(rng.uniform(0.0, 0.5 / (alpha + om.eta_sum)))
        else:
            theta = float(rng.uniform(-0.5 / (-alpha + om.mu_sum), 0.0))
        wt = relaxed_tables(rl, om, q.mass[None], alpha)
        got = tilted_moments(q.mass[None], wt, theta)
        ref = finite_difference_derivatives(q.mass, wt[0], theta)
        worst = max(worst, *(_close(float(g[0]), r) for g, r in zip(got, ref)))
        count += 2
    return CheckResult("derivatives", worst, 1.0, worst <= 1.0, 0.0, count,
                       {"rtol": DERIV_RTOL, "atol": DERIV_ATOL})


# ---------------------------------------------------------------- Hölder factors


def check_holder(sc: SuiteConfig) -> CheckResult:
    rng = _rng(sc.seed, 3)
    worst, count, boundary, tilde_dev = -math.inf, 0, 0.0, 0.0
    for i in range(sc.holder_samples):
        problem = _draw_problem(rng, xi_one_prob=0.0)
        rl = problem.relax
        q = _draw_q(rng, problem)
        alpha = float(rng.uniform(0.0, 10.0))
        if i % 2 == 0:
            theta = float(rng.uniform(0.0, 1.0)) / (alpha + rl.kappa_sum)
            theta = theta or 1.0 / (alpha + rl.kappa_sum)
            fac = holder_factors(rl, q, theta, alpha).e
        else:
            theta = -float(rng.uniform(0.0, 1.0)) / (alpha + rl.nu_sum)
            theta = theta or -1.0 / (alpha + rl.nu_sum)
            fac = holder_factors(rl, q, theta, alpha).f
        worst = max(worst, max(fac) - 1.0)
        count += len(fac)
        if i % 50 == 0:
            e = holder_factors(rl, q, 1.0 / (alpha + rl.kappa_sum), alpha).e
            f = holder_factors(rl, q, -1.0 / (alpha + rl.nu_sum), alpha).f
            boundary = max(boundary, *(abs(v - 1.0) for v in e + f))
            p = apply_map(rl, q)
            e = holder_factors(rl, p, theta if theta > 0 else -theta, alpha).e
            tilde_dev = max(tilde_dev, *(abs(v - 1.0) for v in e))
    holds = worst <= HOLDER_TOL and boundary <= HOLDER_TOL and tilde_dev <= HOLDER_TOL
    return CheckResult("holder_factors", worst, 0.0, holds, HOLDER_TOL, count,
                       {"boundary_deviation": boundary, "constrained_deviation": tilde_dev})


# ---------------------------------------------------------------- key inequalities


def check_key_inequalities(sc: SuiteConfig) -> CheckResult:
    rng = _rng(sc.seed, 4)
    margins = {"upper": [], "lower": [], "limit_upper": [], "limit_lower": [],
               "hat": [], "check": []}
    for _ in range(sc.key_samples):
        problem = _draw_problem(rng)
        om, rl = problem.omega, problem.relax
        q = _draw_q(rng, problem)
        p = apply_map(rl, q)
        xb = 1.0 - problem.xi
        alpha = 5.0 * xb + float(rng.uniform(0.05, 20.0))
        nu, kap = rl.nu_sum, rl.kappa_sum
        hi = min(1.0 / (alpha + kap), 1.0 / (alpha + om.eta_sum))
        lo = -min(1.0 / (alpha + nu), 1.0 / (alpha + om.mu_sum))
        theta = float(rng.uniform(0.0, 1.0)) * hi or hi
        theta_m = float(rng.uniform(0.0, 1.0)) * lo or lo
        up = omega_tilde_lambda(om, p, 1.0 / (alpha - nu))
        dn = omega_tilde_lambda(om, p, -1.0 / (alpha - kap))
        margins["upper"].append(big_omega(rl, om, q, theta, alpha) - theta * (alpha - nu) * up)
        margins["lower"].append(
            big_omega(rl, om, q, theta_m, -alpha) + theta_m * (alpha - kap) * dn
        )
        margins["limit_upper"].append(psi_alpha(rl, om, q, alpha, "+") - (alpha - nu) * up)
        margins["limit_lower"].append(-(alpha - kap) * dn - psi_alpha(rl, om, q, alpha, "-"))
        hc = hat_check_omega(rl, om, q, alpha)
        margins["hat"].append(hc.hat - (1 - nu / alpha) * up)
        margins["check"].append(hc.check - (1 - kap / alpha) * dn)
    worst = {k: max(v) for k, v in margins.items()}
    measured = max(worst.values())
    return CheckResult("key_inequalities", measured, 0.0, measured <= SLACK, SLACK,
                       sc.key_samples * len(margins), worst)


# ---------------------------------------------------------------- decomposition


def check_decomposition(sc: SuiteConfig) -> CheckResult:
    rng = _rng(sc.seed, 5)
    resid, split = 0.0, 0.0
    for i in range(sc.decomposition_samples):
        problem = _draw_problem(rng, xi_one_prob=0.0)
        q = _draw_q(rng, problem)
        if i % 4 == 3:
            # sparse relaxed point: zero out a U symbol entirely
            t = q.tensor.copy()
            t[rng.integers(0, t.shape[0])] = 0.0
            q = JointDist(q.space, (t / t.sum()).reshape(-1))
        resid = max(resid, verify_decomposition(problem.relax, problem.omega, q))
        a, b = kl_split(problem.instance, q)
        split = max(split, abs(a - b))
    measured = max(resid, split)
    return CheckResult("decomposition", measured, IDENTITY_TOL, measured <= IDENTITY_TOL,
                       0.0, 2 * sc.decomposition_samples,
                       {"pointwise_residual": resid, "kl_split_residual": split})


# ---------------------------------------------------------------- side-information bound


def check_prop3(sc: SuiteConfig) -> CheckResult:
    inst = binary_symmetric(sc.prop3_crossover, u_card_star=2)
    cfg = OptimizerConfig(grid_denominator=sc.prop3_denominator, seed=sc.seed)
    xi_grid = sc.effective_xi_grid()
    rows = delta_grid(inst, sc.prop3_alphas, xi_grid, cfg, lambda_samples=sc.lambda_samples)
    margins = [r.delta - r.bound for r in rows if r.bound is not None]
    identity = True
    for xi in xi_grid:
        pr = build_wz(inst, xi)
        identity &= 2 * pr.omega.mu_sum + pr.relax.kappa_sum == 5.0 * (1.0 - xi)
    worst = max(margins, default=-math.inf)
    return CheckResult(
        "prop3_validity", worst, 0.0, bool(worst <= SLACK and identity), SLACK, len(margins),
        {"threshold_identity": bool(identity), "delta_max": max(r.delta for r in rows),
         "rows": [{"xi": r.xi, "alpha": r.alpha, "delta": r.delta, "bound": r.bound}
                  for r in rows]},
    )


# ---------------------------------------------------------------- converse gap


def check_converse(sc: SuiteConfig) -> CheckResult:
    rho, c, n, eps = sc.converse_rho, sc.converse_c, sc.converse_n, sc.converse_epsilon
    cg = converse_gap(rho, c, n, eps)
    with mpmath.workdps(50):
        lt = -mpmath.log(1 - mpmath.mpf(eps))
        a_ref = mpmath.sqrt(rho * n / (2 * lt)) + 1
        u_ref = mpmath.sqrt(2 * rho * lt / n) + (2 * c / rho + 1) * lt / n
        a_err = float(abs(cg.alpha_star - a_ref) / a_ref)
        u_err = float(abs(cg.upsilon_star - u_ref) / u_ref)
    ratio = upsilon_star(rho, c, 4 * 10**6, eps) / upsilon_star(rho, c, 10**6, eps)
    grid = cg.alpha_star * 2.0 ** np.arange(-6, 7)
    grid = grid[grid > 1.0]
    others = [upsilon(rho, c, n, eps, float(a)) for a in grid]
    at_star = upsilon(rho, c, n, eps, cg.alpha_star)
    minimal = all(at_star <= v * (1 + 1e-12) for v in others)
    measured = max(a_err, u_err)
    holds = measured <= 1e-12 and abs(ratio - 0.5) <= 0.01 and minimal
    return CheckResult("converse_formulas", measured, 1e-12, bool(holds), 0.0, 1,
                       {"alpha_star": cg.alpha_star, "upsilon_star": cg.upsilon_star,
                        "scaling_ratio": ratio, "star_minimal_on_grid": minimal,
                        "upsilon_at_star": at_star})


# ---------------------------------------------------------------- oracle vs heuristic


def check_oracle_heuristic(sc: SuiteConfig) -> CheckResult:
    rng = _rng(sc.seed, 6)
    cfg = OptimizerConfig(grid_denominator=sc.heuristic_denominator, seed=sc.seed,
                          restarts=sc.heuristic_restarts, max_iters=sc.heuristic_iters)
    within, beats, diffs = 0, 0, []
    for i in range(sc.heuristic_instances):
        problem = _draw_problem(rng)
        sense = Sense.MIN if i % 2 == 0 else Sense.MAX
        o = extremize_psi_tilde(problem.omega, problem.tilde, sense, cfg)
        h = extremize_psi_tilde(problem.omega, problem.tilde, sense,
                                replace(cfg, seed=sc.seed + i), Method.HEURISTIC)
        # positive when the heuristic is better than the oracle
        adv = (h.value - o.value) if sense is Sense.MAX else (o.value - h.value)
        diffs.append(adv)
        within += abs(adv) <= o.certified_gap
        beats += adv > o.certified_gap
    frac = within / max(sc.heuristic_instances, 1)
    return CheckResult("oracle_heuristic", frac, 0.95, bool(frac >= 0.95 and beats == 0),
                       0.0, sc.heuristic_instances,
                       {"beyond_gap": beats, "max_advantage": max(diffs),
                        "min_advantage": min(diffs),
                        "close_fraction": float(np.mean(np.abs(diffs) <= 1e-6)),
                        "median_abs_difference": float(np.median(np.abs(diffs)))})


CHECKS = (
    "sandwich", "prop1_validity", "prop2_validity", "improvement_crossover",
    "derivatives", "holder_factors", "key_inequalities", "decomposition",
    "prop3_validity", "converse_formulas", "oracle_heuristic",
)


def run_suite(sc: SuiteConfig, only: Sequence[str] | None = None) -> list[CheckResult]:
    """Run every check (or those in ``only``); numeric errors become failures."""
    want = set(CHECKS if only is None else only)
    out: list[CheckResult] = []

    def guarded(name, fn, *args):
        try:
            return fn(*args)
        except (RelaxGapError, ArithmeticError, ValueError) as exc:
            return CheckResult(name, math.nan, math.nan, False, 0.0, 0,
                               {"error": f"{type(exc).__name__}: {exc}"})

    if want & {"sandwich", "prop1_validity", "prop2_validity", "improvement_crossover"}:
        try:
            rows = gap_rows(sc)
        except (RelaxGapError, ArithmeticError, ValueError) as exc:
            rows = exc
        for name, fn in (("sandwich", check_sandwich), ("prop1_validity", check_prop1),
                         ("prop2_validity", check_prop2),
                         ("improvement_crossover", check_crossover)):
            if name in want:
                if isinstance(rows, Exception):
                    out.append(CheckResult(name, math.nan, math.nan, False, 0.0, 0,
                                           {"error": f"{type(rows).__name__}: {rows}"}))
                else:
                    out.append(guarded(name, fn, rows))
    for name, fn in (("derivatives", check_derivatives), ("holder_factors", check_holder),
                     ("key_inequalities", check_key_inequalities),
                     ("decomposition", check_decomposition),
                     ("prop3_validity", check_prop3),
                     ("converse_formulas", check_converse),
                     ("oracle_heuristic", check_oracle_heuristic)):
        if name in want:
            out.append(guarded(name, fn, sc))
    return out


def validate_alpha_for_instance(alpha: float, xi: float) -> None:
    """Reject weights below the side-information threshold at ``xi``."""
    thr = 5.0 * (1.0 - xi)
    if not alpha > thr:
        raise DomainError(f"alpha={alpha} must exceed 5(1 - xi) = {thr} at xi={xi}")
