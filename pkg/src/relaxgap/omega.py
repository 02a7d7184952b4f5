"""The log-marginal functional family, its expectation and its cumulant function.

For a distribution ``p`` the functional is

    w_p(x) = sum_l xi_l phi_l(x) + sum_l mu_l log p_S(x_S) - sum_l eta_l log p_T(x_T)

where the ``phi_l`` are fixed nonnegative tables and ``p_S`` denotes the
marginal on the variable subset ``S``.  Its mean under ``p`` is ``psi_tilde``
and ``omega_tilde_lambda`` is the log moment generating function in ``lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.special import logsumexp

from . import _arr
from .errors import DomainError, InputError, NumericDomainError
from .simplex import AlphabetProduct, JointDist, central_moments, tilt_mass

WINDOW_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class PhiTerm:
    coef: float
    table: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class LogTerm:
    coef: float
    subset: tuple[str, ...]


def _window_ok(lam: float, lo: float, hi: float) -> bool:
    slack_lo = WINDOW_RTOL * abs(lo) if math.isfinite(lo) else 0.0
    slack_hi = WINDOW_RTOL * abs(hi) if math.isfinite(hi) else 0.0
    return lo - slack_lo <= lam <= hi + slack_hi


def sum_window(neg_sum: float, pos_sum: float, scale: float = 1.0):
    """Interval [-scale/neg_sum, scale/pos_sum] with zero sums giving infinity."""
    lo = -scale / neg_sum if neg_sum > 0 else -math.inf
    hi = scale / pos_sum if pos_sum > 0 else math.inf
    return lo, hi


@dataclass(frozen=True, eq=False)
class OmegaSpec:
    """Coefficients and subsets defining the functional.

    ``psi_cap`` optionally supplies a known upper bound on the mean over every
    distribution; when absent a generic entropy bound is used.
    """

    space: AlphabetProduct
    phi_terms: tuple[PhiTerm, ...] = ()
    mu_terms: tuple[LogTerm, ...] = ()
    eta_terms: tuple[LogTerm, ...] = ()
    psi_cap: float | None = None

    def __post_init__(self) -> None:
        phis = []
        for term in self.phi_terms:
            coef, table = (term.coef, term.table) if isinstance(term, PhiTerm) else term
            tab = np.array(table, dtype=float).reshape(-1)
            if tab.size != self.space.total:
                raise InputError(
                    f"phi table has {tab.size} entries, need {self.space.total}"
                )
            if not np.all(np.isfinite(tab)) or np.any(tab < 0):
                raise InputError("phi tables must be finite and nonnegative")
            if not math.isfinite(coef):
                raise InputError("phi coefficient must be finite")
            tab.flags.writeable = False
            phis.append(PhiTerm(float(coef), tab))
        object.__setattr__(self, "phi_terms", tuple(phis))
        for name in ("mu_terms", "eta_terms"):
            terms = []
            for term in getattr(self, name):
                coef, subset = (
                    (term.coef, term.subset) if isinstance(term, LogTerm) else term
                )
                if not (coef > 0 and math.isfinite(coef)):
                    raise InputError(f"{name} coefficients must be positive, got {coef}")
                ax = self.space.axes(subset)
                labels = tuple(self.space.names[i] for i in ax)
                terms.append(LogTerm(float(coef), labels))
            object.__setattr__(self, name, tuple(terms))

    @property
    def mu_sum(self) -> float:
        return float(sum(t.coef for t in self.mu_terms))

    @property
    def eta_sum(self) -> float:
        return float(sum(t.coef for t in self.eta_terms))

    @property
    def phi_max(self) -> float:
        return max((float(t.table.max()) for t in self.phi_terms), default=0.0)

    @property
    def K_prime(self) -> float:
        xi_abs = sum(abs(t.coef) for t in self.phi_terms)
        return max(self.phi_max * xi_abs, self.mu_sum, self.eta_sum)

    @property
    def lambda_window(self) -> tuple[float, float]:
        return sum_window(self.mu_sum, self.eta_sum)

    @property
    def derivative_window(self) -> tuple[float, float]:
        return sum_window(self.mu_sum, self.eta_sum, 0.5)

    @cached_property
    def phi_combined(self) -> np.ndarray:
        out = np.zeros(self.space.total)
        for t in self.phi_terms:
            out += t.coef * t.table
        return out

    @cached_property
    def _mu_axes(self):
        return [(t.coef, self.space.axes(t.subset)) for t in self.mu_terms]

    @cached_property
    def _eta_axes(self):
        return [(t.coef, self.space.axes(t.subset)) for t in self.eta_terms]

    def analytic_cap(self) -> float:
        """Upper bound on the mean valid for every distribution."""
        if self.psi_cap is not None:
            return float(self.psi_cap)
        cap = sum(max(t.coef * float(t.table.max()), 0.0) for t in self.phi_terms)
        for t in self.eta_terms:
            size = math.prod(self.space.sizes[i] for i in self.space.axes(t.subset))
            cap += t.coef * math.log(size)
        return float(cap)

    def is_empty(self) -> bool:
        return not (self.phi_terms or self.mu_terms or self.eta_terms)

    def to_dict(self) -> dict:
        order = {n: i for i, n in enumerate(self.space.names)}

        def terms(ts):
            return [
                {"coef": t.coef, "subset": sorted(t.subset, key=order.__getitem__)}
                for t in ts
            ]

        return {
            "space": self.space.to_dict(),
            "phi_terms": [
                {"coef": t.coef, "table": [float(v) for v in t.table]}
                for t in self.phi_terms
            ],
            "mu_terms": terms(self.mu_terms),
            "eta_terms": terms(self.eta_terms),
            "psi_cap": self.psi_cap,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OmegaSpec":
        try:
            space = AlphabetProduct(tuple(d["space"]["names"]), tuple(d["space"]["sizes"]))
            return cls(
                space,
                tuple(PhiTerm(t["coef"], np.asarray(t["table"])) for t in d.get("phi_terms", [])),
                tuple(LogTerm(t["coef"], tuple(t["subset"])) for t in d.get("mu_terms", [])),
                tuple(LogTerm(t["coef"], tuple(t["subset"])) for t in d.get("eta_terms", [])),
                d.get("psi_cap"),
            )
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed functional JSON: {exc}") from None


def _masses(spec: OmegaSpec, masses) -> np.ndarray:
    m = np.asarray(masses, dtype=float)
    if m.ndim == 1:
        m = m[None]
    if m.shape[1] != spec.space.total:
        raise InputError(f"mass rows have {m.shape[1]} entries, need {spec.space.total}")
    return m


def omega_tables(spec: OmegaSpec, masses) -> np.ndarray:
    """Functional values for a batch of distributions, shape ``(M, T)``.

    Where a subtracted marginal vanishes the value is ``+inf``; otherwise
    where an added marginal vanishes it is ``-inf``.  Both only occur off the
    support of the corresponding row.
    """
    m = _masses(spec, masses)
    n = m.shape[0]
    t = m.reshape((n,) + spec.space.sizes)
    val = np.broadcast_to(spec.phi_combined, m.shape).copy()
    neg = np.zeros(m.shape, dtype=bool)
    pos = np.zeros(m.shape, dtype=bool)
    for sign, terms, flag in ((1.0, spec._mu_axes, neg), (-1.0, spec._eta_axes, pos)):
        for coef, ax in terms:
            mg = _arr.marg(t, ax)
            zero = mg <= 0
            lg = np.where(zero, 0.0, _arr.safe_log(np.where(zero, 1.0, mg)))
            val += sign * coef * np.broadcast_to(lg, t.shape).reshape(m.shape)
            flag |= np.broadcast_to(zero, t.shape).reshape(m.shape)
    val[neg] = -np.inf
    val[pos] = np.inf
    return val


def omega_table(spec: OmegaSpec, p: JointDist) -> np.ndarray:
    return omega_tables(spec, p.mass)[0]


def omega_eval(spec: OmegaSpec, p: JointDist, x) -> float:
    """Functional value at one outcome (flat index or tuple of symbols)."""
    idx = x if isinstance(x, (int, np.integer)) else spec.space.ravel(x)
    return float(omega_table(spec, p)[idx])


def psi_batch(masses: np.ndarray, tables: np.ndarray) -> np.ndarray:
    on = masses > 0
    return (masses * np.where(on, tables, 0.0)).sum(axis=1)


def psi_tilde_batch(spec: OmegaSpec, masses) -> np.ndarray:
    m = _masses(spec, masses)
    return psi_batch(m, omega_tables(spec, m))


def psi_tilde(spec: OmegaSpec, p: JointDist) -> float:
    """Mean of the functional under its own distribution."""
    return float(psi_tilde_batch(spec, p.mass)[0])


def log_mgf_batch(masses: np.ndarray, tables: np.ndarray, lam: float) -> np.ndarray:
    """Row-wise log E exp(lam * tables) over the support, max-shifted."""
    if lam == 0:
        return np.zeros(masses.shape[0])
    on = masses > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(on, np.log(np.where(on, masses, 1.0)) + lam * tables, -np.inf)
    if np.any(np.isnan(a)) or np.any(a == np.inf):
        raise NumericDomainError("exponent is not finite on the support")
    out = logsumexp(a, axis=1)
    if not np.all(np.isfinite(out)):
        raise NumericDomainError("log moment generating function is not finite")
    return out


def check_lambda(spec: OmegaSpec, lam: float, half: bool = False) -> None:
    lo, hi = spec.derivative_window if half else spec.lambda_window
    if not math.isfinite(lam) or not _window_ok(lam, lo, hi):
        which = "derivative" if half else "existence"
        raise DomainError(f"lambda={lam} outside the {which} window [{lo}, {hi}]")


def omega_tilde_batch(spec: OmegaSpec, masses, lam: float, tables=None) -> np.ndarray:
    check_lambda(spec, lam)
    m = _masses(spec, masses)
    w = omega_tables(spec, m) if tables is None else tables
    return log_mgf_batch(m, w, lam)


def omega_tilde_lambda(spec: OmegaSpec, p: JointDist, lam: float) -> float:
    """log E_p exp(lam * w_p(X)); exactly zero at lam = 0."""
    return float(omega_tilde_batch(spec, p.mass, lam)[0])


def tilted_moments(masses: np.ndarray, tables: np.ndarray, lam: float):
    """Mean, variance and third central moment of ``tables`` under the tilt."""
    on = masses > 0
    w = np.where(on, tables, 0.0)
    tilted = masses if lam == 0 else tilt_mass(masses, lam * w)
    return central_moments(tilted, w)


def omega_tilde_derivatives(
    spec: OmegaSpec, p: JointDist, lam: float
) -> tuple[float, float, float]:
    """First three derivatives of the cumulant function at ``lam``."""
    check_lambda(spec, lam, half=True)
    w = omega_table(spec, p)
    d1, d2, d3 = tilted_moments(p.mass[None], w[None], lam)
    return float(d1[0]), float(d2[0]), float(d3[0])


@dataclass(frozen=True)
class RegularityConstants:
    """Constants entering the divergence-penalty baseline bound.

    ``K`` is the grid maximum of the mean (a lower estimate of the true
    bound); ``K_cap`` is an analytic upper bound.  Bounds should use
    ``K_bound``.
    """

    K: float
    K_prime: float
    phi_max: float
    mu_sum: float
    eta_sum: float
    K_cap: float
    resolution: float
    grid_based: bool = True

    @property
    def K_bound(self) -> float:
        return max(self.K, self.K_cap)


def regularity_constants(spec: OmegaSpec, feasible, cfg=None) -> RegularityConstants:
    from .optimize import OptimizerConfig, Sense, extremize_psi_tilde

    cfg = cfg or OptimizerConfig()
    res = extremize_psi_tilde(spec, feasible, Sense.MAX, cfg)
    return RegularityConstants(
        K=max(res.value, 0.0),
        K_prime=spec.K_prime,
        phi_max=spec.phi_max,
        mu_sum=spec.mu_sum,
        eta_sum=spec.eta_sum,
        K_cap=spec.analytic_cap(),
        resolution=cfg.grid_resolution,
    )
