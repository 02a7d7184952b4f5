"""Lossy source coding with decoder side information.

Variables are ordered (U, X, Y, Z): auxiliary description, source, side
information and reconstruction.  For a weight ``xi`` in [0, 1] the rate
functional is ``(1 - xi) I(X;U|Y) + xi E d(X,Z)``.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import SLACK, ConverseGap, converse_gap, prop3_wz_bound
from .errors import DomainError, InputError
from .omega import LogTerm, OmegaSpec, PhiTerm
from .optimize import (
    BlockFactorization,
    ExtremumResult,
    Method,
    OptimizerConfig,
    Sense,
    collect_points,
    curvature_constants,
    extremize_psi_alpha,
    extremize_psi_tilde,
    joint_factorization,
)
from .relaxation import (
    CardinalityCap,
    FeasibleSet,
    FixedMarginal,
    MarkovChain,
    RatioTerm,
    RelaxationSpec,
    SetKind,
    SupportInclusion,
    map_batch,
    penalty_batch,
)
from .simplex import AlphabetProduct, JointDist, kl_divergence, marginal, mutual_information

LABELS = ("U", "X", "Y", "Z")


@dataclass(frozen=True, eq=False)
class WzInstance:
    """Source/side-information law, distortion table and alphabet sizes."""

    p_xy: JointDist
    distortion: np.ndarray = field(repr=False)
    u_card_tilde: int | None = None
    u_card_star: int | None = None
    z_card: int | None = None
    label: str = "instance"

    def __post_init__(self) -> None:
        p = self.p_xy
        if not isinstance(p, JointDist):
            p = JointDist(AlphabetProduct(("X", "Y"), np.shape(p)), np.asarray(p, float).reshape(-1))
        if p.space.nvars != 2:
            raise InputError("p_xy must be a distribution over two variables")
        if p.space.names != ("X", "Y"):
            p = JointDist(AlphabetProduct(("X", "Y"), p.space.sizes), p.mass)
        object.__setattr__(self, "p_xy", p)
        d = np.array(self.distortion, dtype=float)
        if d.ndim != 2 or d.shape[0] != p.space.sizes[0]:
            raise InputError(f"distortion must be |X| x |Z|, got shape {d.shape}")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise InputError("distortion entries must be finite and nonnegative")
        d.flags.writeable = False
        object.__setattr__(self, "distortion", d)
        nx, ny = p.space.sizes
        nz = d.shape[1] if self.z_card is None else int(self.z_card)
        if nz != d.shape[1]:
            raise InputError("z_card does not match the distortion table")
        object.__setattr__(self, "z_card", nz)
        ut = nx if self.u_card_tilde is None else int(self.u_card_tilde)
        us = nx * ny * nz if self.u_card_star is None else int(self.u_card_star)
        if ut < 1 or us < 1:
            raise InputError("U cardinalities must be >= 1")
        object.__setattr__(self, "u_card_tilde", ut)
        object.__setattr__(self, "u_card_star", us)

    @property
    def x_card(self) -> int:
        return self.p_xy.space.sizes[0]

    @property
    def y_card(self) -> int:
        return self.p_xy.space.sizes[1]

    @property
    def u_card(self) -> int:
        """U alphabet of the joint space: the larger of the two caps."""
        return max(self.u_card_tilde, self.u_card_star)

    @property
    def space(self) -> AlphabetProduct:
        return AlphabetProduct(LABELS, (self.u_card, self.x_card, self.y_card, self.z_card))

    def zero_rate_distortion(self) -> float:
        """Smallest distortion reachable from Y alone."""
        p = self.p_xy.tensor
        # expected distortion of guessing z from y: sum_x p(x,y) d(x,z)
        cost = np.einsum("xy,xz->yz", p, self.distortion)
        return float(cost.min(axis=1).sum())

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "p_xy": self.p_xy.tensor.tolist(),
            "distortion": self.distortion.tolist(),
            "u_card_tilde": self.u_card_tilde,
            "u_card_star": self.u_card_star,
            "z_card": self.z_card,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "WzInstance":
        try:
            pxy = d["p_xy"]
            if isinstance(pxy, dict):
                pxy = JointDist.from_dict(pxy)
            else:
                arr = np.asarray(pxy, dtype=float)
                if arr.ndim != 2:
                    raise InputError("p_xy must be a 2-D table")
                pxy = JointDist(AlphabetProduct(("X", "Y"), arr.shape), arr.reshape(-1))
            return cls(
                pxy, np.asarray(d["distortion"], dtype=float),
                d.get("u_card_tilde"), d.get("u_card_star"), d.get("z_card"),
                d.get("label", "instance"),
            )
        except KeyError as exc:
            raise InputError(f"instance JSON missing key {exc}") from None


def hamming(k: int, m: int | None = None) -> np.ndarray:
    m = k if m is None else m
    return 1.0 - np.eye(k, m)


def binary_symmetric(crossover: float = 0.25, **kw) -> WzInstance:
    """Uniform binary X observed through a binary symmetric channel as Y."""
    if not 0 <= crossover <= 1:
        raise InputError("crossover must lie in [0, 1]")
    c = crossover
    p = np.array([[(1 - c) / 2, c / 2], [c / 2, (1 - c) / 2]])
    kw.setdefault("label", f"binary-symmetric-{c:g}")
    return WzInstance(JointDist(AlphabetProduct(("X", "Y"), (2, 2)), p.reshape(-1)), hamming(2), **kw)


def perfect_side_info(k: int = 2, **kw) -> WzInstance:
    """Uniform X with Y = X."""
    p = np.eye(k) / k
    kw.setdefault("label", f"perfect-side-info-{k}")
    return WzInstance(JointDist(AlphabetProduct(("X", "Y"), (k, k)), p.reshape(-1)), hamming(k), **kw)


def random_instance(rng: np.random.Generator, x=2, y=2, z=2, label="random") -> WzInstance:
    """Full-support law and distortion table drawn from ``rng``."""
    p = rng.dirichlet(np.ones(x * y))
    p = np.maximum(p, 1e-3)
    p /= p.sum()
    d = rng.uniform(0.0, 1.0, size=(x, z))
    return WzInstance(
        JointDist(AlphabetProduct(("X", "Y"), (x, y)), p), d,
        u_card_tilde=x, u_card_star=x, label=label,
    )


BUILTINS = {
    "binary-symmetric": binary_symmetric,
    "perfect-side-info": perfect_side_info,
}


# ---------------------------------------------------------------- problem


@dataclass(frozen=True, eq=False)
class WzProblem:
    instance: WzInstance
    xi: float
    omega: OmegaSpec
    relax: RelaxationSpec
    tilde: FeasibleSet
    star: FeasibleSet

    def __iter__(self):
        return iter((self.omega, self.relax, self.tilde, self.star))


def _tilde_factorization(inst: WzInstance) -> BlockFactorization:
    nu, nx, ny, nz = inst.space.sizes
    ut = inst.u_card_tilde
    pxy = inst.p_xy.tensor

    def compose(blocks):
        qux, qz = blocks
        m = qux.shape[0]
        qz = qz.reshape(m, ut, ny, nz)
        out = np.einsum("mxu,xy,muyz->muxyz", qux, pxy, qz)
        if ut < nu:
            pad = np.zeros((m, nu - ut, nx, ny, nz))
            out = np.concatenate([out, pad], axis=1)
        return out.reshape(m, -1)

    return BlockFactorization(((nx, ut), (ut * ny, nz)), compose)


def build_wz(instance: WzInstance, xi: float) -> WzProblem:
    """Functional, relaxation and both feasible families for weight ``xi``."""
    if not (0.0 <= xi <= 1.0):
        raise DomainError(f"xi must lie in [0, 1], got {xi}")
    xi = float(xi)
    xb = 1.0 - xi
    space = instance.space
    d = np.broadcast_to(
        instance.distortion[None, :, None, :], space.sizes
    ).reshape(-1)
    mu = eta = a = b = ()
    if xb > 0:
        mu = (LogTerm(xb, ("U", "X", "Y")), LogTerm(xb, ("Y",)))
        eta = (LogTerm(xb, ("U", "Y")), LogTerm(xb, ("X", "Y")))
        a = (RatioTerm(xb, ("Y",), ("U",)),)
        b = (RatioTerm(xb, ("X", "Y"), ("U",)),)
    cap = xi * float(instance.distortion.max()) + xb * math.log(instance.x_card)
    omega = OmegaSpec(space, (PhiTerm(xi, d),), mu, eta, psi_cap=cap)
    relax = RelaxationSpec(space, "wz-compose", {"p_xy": instance.p_xy}, a, b)
    tilde = FeasibleSet(
        SetKind.TILDE_P, space,
        (
            FixedMarginal(("X", "Y"), instance.p_xy),
            MarkovChain(("U",), ("X",), ("Y",)),
            MarkovChain(("X",), ("U", "Y"), ("Z",)),
            CardinalityCap("U", instance.u_card_tilde),
        ),
        factorization=_tilde_factorization(instance),
    )
    star = FeasibleSet(
        SetKind.P_STAR, space,
        (SupportInclusion(relax), CardinalityCap("U", instance.u_card_star)),
        factorization=joint_factorization(space),
    )
    return WzProblem(instance, xi, omega, relax, tilde, star)


_CLOSED: dict = {}
MIX_WEIGHTS = (0.02, 0.1, 0.3, 1.0)


def _relaxed_samples(inst: WzInstance, tilde_grid: np.ndarray, count: int, seed: int):
    """Seeded full-support points: constrained grid points mixed with noise."""
    rng = np.random.default_rng(seed)
    shape = inst.space.sizes
    out = []
    per = max(count // len(MIX_WEIGHTS), 1)
    for t in MIX_WEIGHTS:
        base = tilde_grid[rng.integers(0, tilde_grid.shape[0], size=per)]
        noise = np.zeros((per,) + shape)
        us = inst.u_card_star
        noise[:, :us] = rng.dirichlet(np.ones(us * math.prod(shape[1:])), size=per).reshape(
            (per, us) + shape[1:]
        )
        mix = (1.0 - t) * base + t * noise.reshape(per, -1)
        out.append(mix / mix.sum(axis=1, keepdims=True))
    return np.concatenate(out)


def closed_sets(problem: WzProblem, cfg: OptimizerConfig,
                samples: int = 2000) -> tuple[FeasibleSet, FeasibleSet]:
    """Finite candidate sets on which the relaxation inequalities are exact.

    The relaxed set holds its grid points plus seeded full-support samples;
    the constrained set holds the factor grid plus the projections of every
    relaxed point, and the relaxed set also contains the constrained set.
    Both depend only on the instance, the denominator and the seed.
    """
    inst = problem.instance
    key = (id(inst), cfg.grid_denominator, cfg.point_cap, cfg.seed, samples)
    hit = _CLOSED.get(key)
    if hit is None or hit[0] is not inst:
        base = build_wz(inst, 1.0)
        tilde_grid = collect_points(base.tilde, cfg)
        star_grid = collect_points(base.star, cfg)
        if samples > 0:
            star_grid = np.concatenate(
                [star_grid, _relaxed_samples(inst, tilde_grid, samples, cfg.seed)]
            )
        images = map_batch(base.relax, star_grid)
        images = images[CardinalityCap("U", inst.u_card_tilde).passes(inst.space, images)]
        images = np.unique(images, axis=0)
        tilde_pts = np.concatenate([tilde_grid, images])
        star_pts = np.concatenate([star_grid, tilde_pts])
        for a in (tilde_pts, star_pts):
            a.flags.writeable = False
        if len(_CLOSED) >= 4:
            _CLOSED.pop(next(iter(_CLOSED)))
        hit = (inst, tilde_pts, star_pts)
        _CLOSED[key] = hit
    _, tilde_pts, star_pts = hit
    return problem.tilde.with_points(tilde_pts), problem.star.with_points(star_pts)


def refined_sets(problem: WzProblem, cfg: OptimizerConfig, extra: np.ndarray):
    """Closed sets enlarged by ``extra`` relaxed points and their projections."""
    tilde, star = closed_sets(problem, cfg)
    extra = np.atleast_2d(np.asarray(extra, dtype=float))
    images = map_batch(problem.relax, extra)
    images = images[CardinalityCap("U", problem.instance.u_card_tilde).passes(
        problem.instance.space, images)]
    return (
        tilde.with_points(np.concatenate([tilde.points, images])),
        star.with_points(np.concatenate([star.points, extra, images])),
    )


def relaxed_probe(problem: WzProblem, alpha: float, cfg: OptimizerConfig,
                  anchor: JointDist, steps: int = 64) -> np.ndarray:
    """Heuristic relaxed minimizer plus the segment joining it to ``anchor``."""
    h = extremize_psi_alpha(problem.omega, problem.relax, problem.star, alpha,
                            Sense.MIN, cfg, Method.HEURISTIC)
    t = np.linspace(0.0, 1.0, steps)[:, None]
    seg = (1.0 - t) * anchor.mass[None] + t * h.argument.mass[None]
    return seg / seg.sum(axis=1, keepdims=True)


def _sets(problem, cfg, method):
    if method is Method.ORACLE:
        return closed_sets(problem, cfg)
    return problem.tilde, problem.star


def rwz_xi(instance: WzInstance, xi: float, cfg: OptimizerConfig, method=Method.ORACLE,
           problem: WzProblem | None = None) -> ExtremumResult:
    """Weighted rate-distortion value: minimum of the mean over the constrained set."""
    problem = problem or build_wz(instance, xi)
    tilde, _ = _sets(problem, cfg, method)
    res = extremize_psi_tilde(problem.omega, tilde, Sense.MIN, cfg, method)
    if res.value < 0:
        # mutual information and distortion are nonnegative; clip rounding
        res = ExtremumResult(max(res.value, 0.0), res.argument, res.method,
                             res.certified_gap, res.evaluations, res.diagnostics)
    return res


def kl_split(instance: WzInstance, q: JointDist) -> tuple[float, float]:
    """(D(q||phi(q)), I(Y;U|X) + D(q_XY||p_XY) + I(X;Z|U,Y)), computed separately."""
    relax = build_wz(instance, 1.0).relax
    direct = float(penalty_batch(relax, q.mass[None])[0])
    split = (
        mutual_information(q, "Y", "U", "X")
        + kl_divergence(marginal(q, ("X", "Y")), instance.p_xy)
        + mutual_information(q, "X", "Z", ("U", "Y"))
    )
    return direct, split


def rwz_xi_alpha(instance: WzInstance, xi: float, alpha: float, cfg: OptimizerConfig,
                 method=Method.ORACLE, problem: WzProblem | None = None) -> ExtremumResult:
    """Penalized relaxed minimum; records the divergence split residual."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    problem = problem or build_wz(instance, xi)
    _, star = _sets(problem, cfg, method)
    res = extremize_psi_alpha(problem.omega, problem.relax, star, alpha, Sense.MIN, cfg, method)
    direct, split = kl_split(instance, res.argument)
    res.diagnostics["kl_split_residual"] = abs(direct - split) if math.isfinite(direct) else math.inf
    return res


@dataclass(frozen=True)
class DeltaRow:
    xi: float
    alpha: float
    rwz: float
    rwz_alpha: float
    delta: float
    certified_gap: float
    bound: float | None
    rho_minus: float | None
    c_minus: float | None
    holds: bool | None
    holds_exact: bool | None


@dataclass(frozen=True)
class DeltaResult:
    rows: tuple[DeltaRow, ...]
    delta_max: float

    def to_dict(self) -> dict:
        return {"rows": [r.__dict__ for r in self.rows], "delta_max": self.delta_max}


def minus_curvature(problem: WzProblem, alpha: float, cfg: OptimizerConfig, lambda_samples=9):
    """Lower-side curvature constants with the bound's own lambda included."""
    tilde, _ = closed_sets(problem, cfg)
    xb = 1.0 - problem.xi
    lam = -1.0 / (alpha - xb)
    return curvature_constants(
        problem.omega, tilde, cfg, lambda_samples,
        extra_lambdas=(lam,), lambda_cap=abs(lam),
    )


def delta_grid(instance: WzInstance, alphas, xi_grid, cfg: OptimizerConfig,
               with_bound: bool = True, lambda_samples: int = 9,
               refine: bool = True) -> list[DeltaRow]:
    """Relaxation gaps for every (xi, alpha), with the curvature bound when valid.

    With ``refine`` the finite sets at each xi are enlarged by a heuristic
    relaxed minimizer per weight and the segments joining them to the
    constrained minimizer, together with their projections.  All weights at
    one xi share the enlarged sets, so the gap is monotone in the weight and
    both sets stay closed under the projection.
    """
    alphas = [float(a) for a in alphas]
    if any(not (a > 0 and math.isfinite(a)) for a in alphas):
        raise DomainError(f"weights must be positive and finite, got {alphas}")
    rows = []
    for xi in xi_grid:
        xi = float(xi)
        problem = build_wz(instance, xi)
        tilde, star = closed_sets(problem, cfg)
        if refine:
            anchor = extremize_psi_tilde(problem.omega, tilde, Sense.MIN, cfg).argument
            extra = np.concatenate([relaxed_probe(problem, a, cfg, anchor) for a in alphas])
            tilde, star = refined_sets(problem, cfg, extra)
        r = extremize_psi_tilde(problem.omega, tilde, Sense.MIN, cfg)
        xb = 1.0 - xi
        valid = [a for a in alphas if a > 5.0 * xb]
        curv = None
        if with_bound and valid:
            lams = tuple(-1.0 / (a - xb) for a in valid)
            curv = curvature_constants(
                problem.omega, tilde, cfg, lambda_samples,
                extra_lambdas=lams, lambda_cap=max(abs(v) for v in lams),
            )
        for alpha in alphas:
            ra = extremize_psi_alpha(problem.omega, problem.relax, star, alpha,
                                     Sense.MIN, cfg)
            # both minima are nonnegative; clip rounding as in rwz_xi
            rv, rav = max(r.value, 0.0), max(ra.value, 0.0)
            delta = rv - rav
            gap = r.certified_gap + ra.certified_gap
            bound = rho = c = holds = exact = None
            if curv is not None and alpha > 5.0 * xb:
                rho, c = curv.rho_minus, curv.c_minus
                bound = prop3_wz_bound(rho, c, alpha, xi)
                holds = delta <= bound + gap + SLACK
                exact = delta <= bound + SLACK
            rows.append(DeltaRow(xi, alpha, rv, rav, delta, gap,
                                 bound, rho, c, holds, exact))
    return rows


def delta_wz(instance: WzInstance, alpha: float, xi_grid, cfg: OptimizerConfig,
             with_bound: bool = True, lambda_samples: int = 9,
             refine: bool = True) -> DeltaResult:
    """Relaxation gaps at one weight over a xi grid."""
    rows = delta_grid(instance, [alpha], xi_grid, cfg, with_bound, lambda_samples, refine)
    return DeltaResult(tuple(rows), max(row.delta for row in rows))


# ---------------------------------------------------------------- region


class RegionKind(enum.Enum):
    INNER_DESCRIPTION = "inner"
    OUTER_SHIFTED = "outer"


@dataclass(frozen=True)
class RegionPolyline:
    points: tuple[tuple[float, float], ...]
    xi_grid: tuple[float, ...]
    kind: RegionKind
    active_xi: tuple[float, ...]
    rates_by_xi: tuple[float, ...]
    certified_gap: float
    shift: float = 0.0

    def rows(self) -> list[tuple[float, float, float, str]]:
        return [(xi, r, d, self.kind.value) for (r, d), xi in zip(self.points, self.active_xi)]


REGION_HEADER = ("xi", "rate", "distortion", "kind")


def region_csv(polylines) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REGION_HEADER)
    for poly in polylines:
        for xi, r, d, kind in poly.rows():
            w.writerow([repr(xi), repr(r), repr(d), kind])
    return buf.getvalue()


def envelope(xi_grid, rates, d_grid):
    """Lower envelope of the half-plane intersection on a distortion grid."""
    xi_grid = np.asarray(xi_grid, dtype=float)
    rates = np.asarray(rates, dtype=float)
    finite = xi_grid < 1.0
    pts, active = [], []
    d_floor = -math.inf
    if np.any(~finite):
        d_floor = float(rates[~finite].max())
    for d in d_grid:
        if d < d_floor:
            continue
        if finite.any():
            cand = (rates[finite] - xi_grid[finite] * d) / (1.0 - xi_grid[finite])
            j = int(np.argmax(cand))
            r, a = max(float(cand[j]), 0.0), float(xi_grid[finite][j])
        else:
            r, a = 0.0, 1.0
        pts.append((r, float(d)))
        active.append(a)
    return pts, active


def shift_polyline(poly: RegionPolyline, nu: float) -> RegionPolyline:
    """Move every vertex by (-nu, -nu) and clamp at zero."""
    pts = tuple((max(r - nu, 0.0), max(d - nu, 0.0)) for r, d in poly.points)
    return RegionPolyline(pts, poly.xi_grid, RegionKind.OUTER_SHIFTED, poly.active_xi,
                          poly.rates_by_xi, poly.certified_gap, nu)


def wz_region(instance: WzInstance, xi_grid, cfg: OptimizerConfig, converse=None,
              method=Method.ORACLE, d_points: int = 101):
    """Inner description and, with ``converse``, the shifted outer region.

    ``converse`` is a :class:`ConverseGap` or a tuple ``(n, epsilon, rho, c)``.
    Returns a list of polylines.
    """
    xi_grid = tuple(sorted(float(x) for x in xi_grid))
    if not xi_grid or any(not 0 <= x <= 1 for x in xi_grid):
        raise DomainError("xi grid must be a non-empty subset of [0, 1]")
    results = [rwz_xi(instance, xi, cfg, method) for xi in xi_grid]
    rates = [r.value for r in results]
    gap = max(r.certified_gap for r in results)
    d_max = instance.zero_rate_distortion()
    if d_max <= 0:
        d_max = float(instance.distortion.max()) or 1.0
    d_grid = np.linspace(0.0, d_max, d_points)
    pts, active = envelope(xi_grid, rates, d_grid)
    inner = RegionPolyline(tuple(pts), xi_grid, RegionKind.INNER_DESCRIPTION,
                           tuple(active), tuple(rates), gap)
    out = [inner]
    if converse is not None:
        if not isinstance(converse, ConverseGap):
            n, eps, rho, c = converse
            converse = converse_gap(rho, c, n, eps)
        out.append(shift_polyline(inner, converse.upsilon_star))
    return out


def wz_theta_windows(problem: WzProblem) -> dict:
    """Threshold constants of the side-information instance."""
    om, rl = problem.omega, problem.relax
    return {
        "mu_sum": om.mu_sum, "eta_sum": om.eta_sum,
        "kappa_sum": rl.kappa_sum, "nu_sum": rl.nu_sum,
        "min_threshold": 2 * om.mu_sum + rl.kappa_sum,
        "max_threshold": 2 * om.eta_sum + rl.nu_sum,
    }
