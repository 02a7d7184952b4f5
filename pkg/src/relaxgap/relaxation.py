"""Relaxation of a constrained family through a projection map.

A relaxation pairs a projection ``phi`` onto the constrained family with a
set of conditional log-ratio terms expressing ``w_q - w_phi(q)``.  From these
we build the divergence-penalized objective, the two-parameter cumulant and
the auxiliary quantities used to bound both.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from . import _arr
from .errors import DomainError, InputError, MapError, StructuralError
from .omega import (
    OmegaSpec,
    _window_ok,
    log_mgf_batch,
    omega_tables,
    psi_batch,
    tilted_moments,
)
from .simplex import AlphabetProduct, JointDist

SLACK = 1e-9
MARKOV_TOL = 1e-9


# ---------------------------------------------------------------- maps


@dataclass(frozen=True)
class MapEntry:
    """A registered projection.

    ``apply`` maps a batch of masses ``(M, T)`` to a batch of masses.
    ``kl_modulus(delta)`` bounds how far ``D(q||phi(q))`` can move when ``q``
    moves by ``delta`` in L1; it may return ``inf``.
    """

    apply: Callable[[AlphabetProduct, dict, np.ndarray], np.ndarray]
    kl_modulus: Callable[[AlphabetProduct, dict, float], float]


MAPS: dict[str, MapEntry] = {}


def register_map(name: str, entry: MapEntry) -> None:
    MAPS[name] = entry


def entropy_modulus(delta: float, size: int) -> float:
    """Bound on |H(a) - H(b)| for ||a - b||_1 <= delta on ``size`` symbols."""
    if delta <= 0 or size <= 1:
        return 0.0
    if delta <= 0.5:
        return min(delta * math.log(size / delta), math.log(size))
    return math.log(size)


def _uniform_conditional(t: np.ndarray, target: Sequence[int], given: Sequence[int]):
    """t_{target|given} on the full shape with undefined rows made uniform."""
    r = _arr.conditional_ratio(t, target, given)
    k = math.prod(t.shape[1 + i] for i in target)
    return np.where(np.isnan(r), 1.0 / k, r)


def _labels_axes(space: AlphabetProduct, labels) -> tuple[int, ...]:
    return tuple(space.axes(lab)[0] for lab in labels)


def _wz_apply(space: AlphabetProduct, params: dict, masses: np.ndarray) -> np.ndarray:
    u, x, y, z = _labels_axes(space, params["labels"])
    n = masses.shape[0]
    t = masses.reshape((n,) + space.sizes)
    # bring to canonical (U, X, Y, Z) order
    order = (0, 1 + u, 1 + x, 1 + y, 1 + z)
    c = np.transpose(t, order)
    u_x = _uniform_conditional(c, [0], [1])[:, :, :, :1, :1]
    z_uy = _uniform_conditional(c, [3], [0, 2])[:, :, :1, :, :]
    pxy = np.asarray(params["p_xy_tensor"])[None, None, :, :, None]
    out = u_x * pxy * z_uy
    back = np.argsort(order)
    return np.transpose(out, back).reshape(n, -1)


def _wz_kl_modulus(space: AlphabetProduct, params: dict, delta: float) -> float:
    u, x, y, z = _labels_axes(space, params["labels"])
    s = space.sizes
    pxy = np.asarray(params["p_xy_tensor"])
    if np.any(pxy <= 0):
        return math.inf
    # D = -H(UXYZ) + H(UX) - H(X) + H(UYZ) - H(UY) - E log p_XY
    sizes = [
        s[u] * s[x] * s[y] * s[z],
        s[u] * s[x],
        s[x],
        s[u] * s[y] * s[z],
        s[u] * s[y],
    ]
    spread = float(np.log(pxy).max() - np.log(pxy).min())
    return sum(entropy_modulus(delta, k) for k in sizes) + delta * spread / 2


def _identity_apply(space, params, masses):
    return masses


def _identity_modulus(space, params, delta):
    return 0.0


def _fix_marginal_apply(space: AlphabetProduct, params: dict, masses: np.ndarray):
    ax = space.axes(params["subset"])
    n = masses.shape[0]
    t = masses.reshape((n,) + space.sizes)
    rest = [i for i in range(space.nvars) if i not in ax]
    target = np.asarray(params["target_tensor"])
    shape = [1] + [space.sizes[i] if i in ax else 1 for i in range(space.nvars)]
    tgt = target.reshape(shape)
    if not rest:
        return np.broadcast_to(tgt, t.shape).reshape(n, -1).copy()
    cond = _uniform_conditional(t, rest, ax)
    return (cond * tgt).reshape(n, -1)


def _fix_marginal_modulus(space, params, delta):
    ax = space.axes(params["subset"])
    tgt = np.asarray(params["target_tensor"]).reshape(-1)
    if np.any(tgt <= 0):
        return math.inf
    size = math.prod(space.sizes[i] for i in ax)
    spread = float(np.log(tgt).max() - np.log(tgt).min())
    return entropy_modulus(delta, size) + delta * spread / 2


register_map("identity", MapEntry(_identity_apply, _identity_modulus))
register_map("wz-compose", MapEntry(_wz_apply, _wz_kl_modulus))
register_map("fix-marginal", MapEntry(_fix_marginal_apply, _fix_marginal_modulus))


# ---------------------------------------------------------------- spec


@dataclass(frozen=True)
class RatioTerm:
    """Coefficient with conditioning subset ``given`` and target ``target``."""

    coef: float
    given: tuple[str, ...]
    target: tuple[str, ...]


def _dist_param(value, space: AlphabetProduct | None = None) -> JointDist:
    if isinstance(value, JointDist):
        return value
    return JointDist.from_dict(value)


@dataclass(frozen=True, eq=False)
class RelaxationSpec:
    """Named projection plus the log-ratio terms of the decomposition.

    Map parameters: ``wz-compose`` takes ``p_xy`` (a distribution over the X
    and Y labels) and optional ``labels`` (default ``("U","X","Y","Z")``);
    ``fix-marginal`` takes ``subset`` and ``target``.
    """

    space: AlphabetProduct
    map_name: str
    map_params: dict = field(default_factory=dict)
    a_terms: tuple[RatioTerm, ...] = ()
    b_terms: tuple[RatioTerm, ...] = ()

    def __post_init__(self) -> None:
        if self.map_name not in MAPS:
            raise InputError(f"unknown map {self.map_name!r}; registered: {sorted(MAPS)}")
        params = dict(self.map_params)
        if self.map_name == "wz-compose":
            labels = tuple(params.get("labels", ("U", "X", "Y", "Z")))
            for lab in labels:
                self.space.axes(lab)
            pxy = _dist_param(params["p_xy"])
            x, y = labels[1], labels[2]
            if pxy.space.sizes != (self.space.sizes[self.space.axes(x)[0]],
                                   self.space.sizes[self.space.axes(y)[0]]):
                raise InputError("p_xy alphabet sizes do not match the space")
            params.update(labels=labels, p_xy=pxy, p_xy_tensor=pxy.tensor)
        elif self.map_name == "fix-marginal":
            subset = tuple(params["subset"])
            tgt = _dist_param(params["target"])
            ax = self.space.axes(subset)
            if tgt.space.sizes != tuple(self.space.sizes[i] for i in ax):
                raise InputError("target marginal sizes do not match the subset")
            params.update(subset=subset, target=tgt, target_tensor=tgt.tensor)
        object.__setattr__(self, "map_params", params)
        for name in ("a_terms", "b_terms"):
            terms = []
            for term in getattr(self, name):
                coef, given, target = (
                    (term.coef, term.given, term.target)
                    if isinstance(term, RatioTerm)
                    else term
                )
                if not (coef > 0 and math.isfinite(coef)):
                    raise InputError(f"{name} coefficients must be positive, got {coef}")
                g, t = self.space.axes(given, allow_empty=True), self.space.axes(target)
                if set(g) & set(t):
                    raise InputError("conditioning and target subsets must be disjoint")
                terms.append(RatioTerm(
                    float(coef),
                    tuple(self.space.names[i] for i in g),
                    tuple(self.space.names[i] for i in t),
                ))
            object.__setattr__(self, name, tuple(terms))

    @property
    def kappa_sum(self) -> float:
        return float(sum(t.coef for t in self.a_terms))

    @property
    def nu_sum(self) -> float:
        return float(sum(t.coef for t in self.b_terms))

    @property
    def entry(self) -> MapEntry:
        return MAPS[self.map_name]

    def to_dict(self) -> dict:
        params = {}
        for k, v in self.map_params.items():
            if k.endswith("_tensor"):
                continue
            params[k] = v.to_dict() if isinstance(v, JointDist) else (
                list(v) if isinstance(v, tuple) else v
            )

        def terms(ts):
            return [
                {"coef": t.coef, "given": list(t.given), "target": list(t.target)}
                for t in ts
            ]

        return {
            "space": self.space.to_dict(),
            "map": self.map_name,
            "params": params,
            "a_terms": terms(self.a_terms),
            "b_terms": terms(self.b_terms),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RelaxationSpec":
        try:
            space = AlphabetProduct(tuple(d["space"]["names"]), tuple(d["space"]["sizes"]))

            def terms(ts):
                return tuple(
                    RatioTerm(t["coef"], tuple(t["given"]), tuple(t["target"])) for t in ts
                )

            return cls(space, d["map"], dict(d.get("params", {})),
                       terms(d.get("a_terms", [])), terms(d.get("b_terms", [])))
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed relaxation JSON: {exc}") from None


# ---------------------------------------------------------------- feasible sets


class SetKind(enum.Enum):
    TILDE_P = "tilde_p"
    P_STAR = "p_star"


@dataclass(frozen=True)
class PredicateResult:
    name: str
    passed: bool
    residual: float


class Predicate:
    """A named constraint evaluable on a batch of masses."""

    name: str = "predicate"
    tol: float = 0.0

    def residuals(self, space: AlphabetProduct, masses: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def passes(self, space: AlphabetProduct, masses: np.ndarray) -> np.ndarray:
        return self.residuals(space, masses) <= self.tol

    def evaluate(self, p: JointDist) -> PredicateResult:
        r = float(self.residuals(p.space, p.mass[None])[0])
        return PredicateResult(self.name, r <= self.tol, r)


@dataclass(frozen=True, eq=False)
class FixedMarginal(Predicate):
    subset: tuple[str, ...]
    target: JointDist
    tol: float = MARKOV_TOL

    @property
    def name(self) -> str:
        return f"marginal[{','.join(self.subset)}]"

    def residuals(self, space, masses):
        ax = space.axes(self.subset)
        t = masses.reshape((masses.shape[0],) + space.sizes)
        mg = _arr.flat(_arr.marg(t, ax))
        return np.abs(mg - self.target.mass[None]).max(axis=1)


@dataclass(frozen=True)
class MarkovChain(Predicate):
    """left - middle - right, measured by I(left; right | middle)."""

    left: tuple[str, ...]
    middle: tuple[str, ...]
    right: tuple[str, ...]
    tol: float = MARKOV_TOL

    @property
    def name(self) -> str:
        return f"markov[{','.join(self.left)}|{','.join(self.middle)}|{','.join(self.right)}]"

    def residuals(self, space, masses):
        t = masses.reshape((masses.shape[0],) + space.sizes)
        return _arr.cond_mutual_info(
            t, space.axes(self.left), space.axes(self.right), space.axes(self.middle)
        )


@dataclass(frozen=True, eq=False)
class SupportInclusion(Predicate):
    """Supp(q) contains Supp(phi(q)); residual is phi(q) mass outside Supp(q)."""

    relax: RelaxationSpec
    tol: float = 0.0
    name: str = "support"

    def residuals(self, space, masses):
        img = map_batch(self.relax, masses)
        return np.where(masses > 0, 0.0, img).sum(axis=1)


@dataclass(frozen=True)
class CardinalityCap(Predicate):
    """At most ``cap`` symbols of ``label`` carry positive mass."""

    label: str
    cap: int
    tol: float = 0.0

    @property
    def name(self) -> str:
        return f"card[{self.label}<={self.cap}]"

    def residuals(self, space, masses):
        ax = space.axes(self.label)
        t = masses.reshape((masses.shape[0],) + space.sizes)
        mg = _arr.flat(_arr.marg(t, ax))
        used = (mg > 0).sum(axis=1)
        return np.maximum(used - self.cap, 0).astype(float)


@dataclass(frozen=True, eq=False)
class FeasibleSet:
    """A constrained or relaxed family.

    ``factorization`` (optional) parameterizes the set by row-stochastic
    blocks so that searches stay inside it by construction.  ``points``
    (optional) replaces grid enumeration by an explicit finite candidate set.
    """

    kind: SetKind
    space: AlphabetProduct
    predicates: tuple[Predicate, ...] = ()
    factorization: object | None = None
    points: np.ndarray | None = field(default=None, repr=False)

    def mask(self, masses: np.ndarray) -> np.ndarray:
        ok = np.ones(masses.shape[0], dtype=bool)
        for pred in self.predicates:
            ok &= pred.passes(self.space, masses)
        return ok

    def check(self, q: JointDist) -> list[PredicateResult]:
        return [pred.evaluate(q) for pred in self.predicates]

    def contains(self, q: JointDist) -> bool:
        return all(r.passed for r in self.check(q))

    def with_points(self, points: np.ndarray) -> "FeasibleSet":
        pts = np.ascontiguousarray(points, dtype=float)
        pts.flags.writeable = False
        return FeasibleSet(self.kind, self.space, self.predicates, self.factorization, pts)


# ---------------------------------------------------------------- map application


def map_batch(relax: RelaxationSpec, masses: np.ndarray) -> np.ndarray:
    return relax.entry.apply(relax.space, relax.map_params, np.atleast_2d(masses))


def apply_map(relax: RelaxationSpec, q: JointDist) -> JointDist:
    """Project ``q`` onto the constrained family."""
    if q.space != relax.space:
        raise InputError("distribution space does not match the relaxation")
    out = map_batch(relax, q.mass[None])[0]
    if not np.all(np.isfinite(out)) or np.any(out < 0):
        raise MapError(f"map {relax.map_name!r} produced non-finite or negative mass")
    s = out.sum()
    if abs(s - 1.0) > 1e-9:
        raise MapError(f"map {relax.map_name!r} produced total mass {s!r}")
    return JointDist(q.space, out / s)


def _ratio_logs(relax: RelaxationSpec, t_q, t_p, terms):
    """Per-term log(p_{target|given} / q_{target|given}) on the full shape."""
    outs = []
    for term in terms:
        g = relax.space.axes(term.given, allow_empty=True)
        a = relax.space.axes(term.target)
        rq = _arr.conditional_ratio(t_q, a, g)
        rp = _arr.conditional_ratio(t_p, a, g)
        with np.errstate(divide="ignore", invalid="ignore"):
            outs.append((term.coef, np.log(rp) - np.log(rq), rp, rq))
    return outs


def verify_decomposition(relax: RelaxationSpec, omega: OmegaSpec, q: JointDist) -> float:
    """Largest pointwise mismatch of the log-ratio decomposition on Supp(q)."""
    p = apply_map(relax, q)
    n = q.space.total
    on = q.mass > 0
    w = omega_tables(omega, np.stack([q.mass, p.mass]))
    with np.errstate(invalid="ignore"):
        lhs = w[0] - w[1]
    t_q = q.mass.reshape((1,) + q.space.sizes)
    t_p = p.mass.reshape((1,) + q.space.sizes)
    rhs = np.zeros(n)
    for sign, terms in ((1.0, relax.a_terms), (-1.0, relax.b_terms)):
        for coef, lr, rp, rq in _ratio_logs(relax, t_q, t_p, terms):
            rp_flat, rq_flat = rp.reshape(-1), rq.reshape(-1)
            if np.any(on & (np.isnan(rp_flat) | np.isnan(rq_flat))):
                raise StructuralError(
                    "conditional row undefined inside the support of q"
                )
            with np.errstate(invalid="ignore"):
                rhs = rhs + sign * coef * lr.reshape(-1)
    with np.errstate(invalid="ignore"):
        diff = lhs - rhs
    same_inf = np.isinf(lhs) & np.isinf(rhs) & (np.sign(lhs) == np.sign(rhs))
    diff = np.where(same_inf, 0.0, diff)
    diff = np.where(np.isnan(diff), np.inf, np.abs(diff))
    return float(diff[on].max()) if on.any() else 0.0


def penalty_batch(relax: RelaxationSpec, masses: np.ndarray, images=None) -> np.ndarray:
    """Row-wise D(q || phi(q))."""
    img = map_batch(relax, masses) if images is None else images
    return _arr.kl_rows(masses, img)


def _psi_alpha_from(psi, kl, alpha, sign):
    if alpha == 0:
        return psi.copy()
    if sign == "+":
        return psi - alpha * kl
    return psi + alpha * kl


def _check_sign(sign: str) -> None:
    if sign not in ("+", "-"):
        raise InputError(f"sign must be '+' or '-', got {sign!r}")


def psi_alpha_batch(relax, omega, masses, alpha: float, sign: str) -> np.ndarray:
    _check_sign(sign)
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    m = np.atleast_2d(masses)
    psi = psi_batch(m, omega_tables(omega, m))
    return _psi_alpha_from(psi, penalty_batch(relax, m), alpha, sign)


def psi_alpha(relax, omega, q: JointDist, alpha: float, sign: str = "+") -> float:
    """Mean minus (sign '+') or plus (sign '-') alpha times D(q || phi(q))."""
    return float(psi_alpha_batch(relax, omega, q.mass, alpha, sign)[0])


def theta_window(relax, omega, alpha_signed: float) -> tuple[float, float]:
    if alpha_signed > 0:
        return 0.0, 1.0 / (alpha_signed + omega.eta_sum)
    if alpha_signed < 0:
        return -1.0 / (-alpha_signed + omega.mu_sum), 0.0
    return omega.lambda_window


def relaxed_tables(relax, omega, masses, alpha_signed: float, images=None):
    """w_q - alpha_signed * log(q / phi(q)) on the support of each row."""
    m = np.atleast_2d(masses)
    w = omega_tables(omega, m)
    if alpha_signed == 0:
        return w
    img = map_batch(relax, m) if images is None else images
    on = m > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.where(on, np.log(np.where(on, m, 1.0)) - np.log(img), 0.0)
    return np.where(on, w - alpha_signed * lr, w)


def _check_theta(relax, omega, theta, alpha_signed, half=False):
    lo, hi = theta_window(relax, omega, alpha_signed)
    if half:
        lo, hi = lo / 2, hi / 2
    if not math.isfinite(theta) or not _window_ok(theta, lo, hi):
        raise DomainError(f"theta={theta} outside [{lo}, {hi}] for alpha={alpha_signed}")


def big_omega_batch(relax, omega, masses, theta, alpha_signed, tables=None):
    _check_theta(relax, omega, theta, alpha_signed)
    m = np.atleast_2d(masses)
    w = relaxed_tables(relax, omega, m, alpha_signed) if tables is None else tables
    return log_mgf_batch(m, w, theta)


def big_omega(relax, omega, q: JointDist, theta: float, alpha_signed: float) -> float:
    """log E_q exp(theta * (w_q - alpha_signed * log(q / phi(q))))."""
    return float(big_omega_batch(relax, omega, q.mass, theta, alpha_signed)[0])


def big_omega_derivatives(relax, omega, q: JointDist, theta: float, alpha_signed: float):
    """First three theta-derivatives, valid on the half-width window."""
    _check_theta(relax, omega, theta, alpha_signed, half=True)
    m = q.mass[None]
    w = relaxed_tables(relax, omega, m, alpha_signed)
    d1, d2, d3 = tilted_moments(m, w, theta)
    return float(d1[0]), float(d2[0]), float(d3[0])


@dataclass(frozen=True)
class HolderFactors:
    e: tuple[float, ...] = ()
    f: tuple[float, ...] = ()


def holder_factors(relax: RelaxationSpec, q: JointDist, theta: float, alpha: float) -> HolderFactors:
    """Expected powered conditional ratios; each is at most one."""
    if alpha < 0:
        raise DomainError("alpha must be nonnegative")
    kap, nu = relax.kappa_sum, relax.nu_sum
    p = apply_map(relax, q)
    t_q = q.mass.reshape((1,) + q.space.sizes)
    t_p = p.mass.reshape((1,) + q.space.sizes)
    on = q.mass > 0

    def factors(terms, expo):
        out = []
        for term in terms:
            g = relax.space.axes(term.given, allow_empty=True)
            a = relax.space.axes(term.target)
            rq = _arr.conditional_ratio(t_q, a, g).reshape(-1)
            rp = _arr.conditional_ratio(t_p, a, g).reshape(-1)
            rp = np.where(np.isnan(rp), 0.0, rp)
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(on, rp / np.where(on, rq, 1.0), 0.0)
            out.append(float((q.mass * np.where(on, ratio ** expo, 0.0)).sum()))
        return tuple(out)

    if 0 < theta and _window_ok(theta, 0.0, 1.0 / (alpha + kap) if alpha + kap > 0 else math.inf):
        expo = theta * kap / (1.0 - theta * alpha)
        return HolderFactors(e=factors(relax.a_terms, expo))
    if theta < 0 and _window_ok(theta, -1.0 / (alpha + nu) if alpha + nu > 0 else -math.inf, 0.0):
        expo = -theta * nu / (1.0 + theta * alpha)
        return HolderFactors(f=factors(relax.b_terms, expo))
    raise DomainError(f"theta={theta} lies in neither factor regime for alpha={alpha}")


@dataclass(frozen=True)
class HatCheck:
    hat: float
    check: float


def hat_check_omega(relax: RelaxationSpec, omega: OmegaSpec, q: JointDist, alpha: float) -> HatCheck:
    """Reweighted cumulants at scale 1/alpha under p = phi(q)."""
    kap, nu = relax.kappa_sum, relax.nu_sum
    if not alpha > max(kap, nu):
        raise DomainError(f"alpha={alpha} must exceed {max(kap, nu)}")
    p = apply_map(relax, q)
    t_q = q.mass.reshape((1,) + q.space.sizes)
    t_p = p.mass.reshape((1,) + q.space.sizes)
    on = p.mass > 0
    w = omega_tables(omega, p.mass[None])[0]
    logp = np.log(np.where(on, p.mass, 1.0))

    def weight(terms):
        acc = np.zeros(q.space.total)
        for coef, lr, rp, rq in _ratio_logs(relax, t_q, t_p, terms):
            lr = lr.reshape(-1)
            if np.any(on & np.isnan(lr)):
                raise StructuralError("conditional row of q undefined on Supp(phi(q))")
            # lr is log(p/q); the weights use log(q/p)
            acc = acc - coef * np.where(on, lr, 0.0)
        return acc

    hat_a = np.where(on, logp + w / alpha + weight(relax.b_terms) / alpha, -np.inf)
    chk_a = np.where(on, logp - w / alpha + weight(relax.a_terms) / alpha, -np.inf)
    return HatCheck(float(logsumexp(hat_a)), float(logsumexp(chk_a)))
