"""Closed-form gap bounds and blocklength-dependent outer-bound gaps."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass

from .errors import DomainError

SLACK = 1e-9


def prop1_bound(K: float, K_prime: float, alpha: float, total_alphabet: int) -> float:
    """Pinsker-type baseline: K' sqrt(2K/alpha) log(sqrt(alpha/2K) e |X|)."""
    if not (K > 0 and alpha > 0):
        raise DomainError(f"K and alpha must be positive, got K={K}, alpha={alpha}")
    if total_alphabet < 1:
        raise DomainError("alphabet size must be >= 1")
    if K_prime == 0:
        return 0.0
    r = math.sqrt(2.0 * K / alpha)
    return K_prime * r * math.log(math.e * total_alphabet / r)


def prop2_threshold(side: str, mu_sum: float, eta_sum: float, kappa_sum: float, nu_sum: float):
    """(threshold, subtracted constant) for the MAX ('+') or MIN ('-') side."""
    if side == "+":
        return 2.0 * eta_sum + nu_sum, nu_sum
    if side == "-":
        return 2.0 * mu_sum + kappa_sum, kappa_sum
    raise DomainError(f"side must be '+' or '-', got {side!r}")


def prop2_bound(rho: float, c: float, alpha: float, subtract: float, threshold: float | None = None) -> float:
    """(1/(alpha-s)) [rho/2 + c/(alpha-s)] for alpha above ``threshold``.

    ``threshold`` defaults to ``subtract`` (the weakest meaningful value).
    """
    thr = subtract if threshold is None else threshold
    if not alpha > thr:
        raise DomainError(f"alpha={alpha} must exceed {thr}")
    if rho < 0 or c < 0:
        raise DomainError("rho and c must be nonnegative")
    a = alpha - subtract
    return (rho / 2.0 + c / a) / a


def prop3_wz_bound(rho_minus: float, c_minus: float, alpha: float, xi: float) -> float:
    """Per-weight side-information bound, valid for alpha > 5 (1 - xi)."""
    if not 0 <= xi <= 1:
        raise DomainError(f"xi must lie in [0, 1], got {xi}")
    xb = 1.0 - xi
    return prop2_bound(rho_minus, c_minus, alpha, xb, threshold=5.0 * xb)


@dataclass(frozen=True)
class BoundReport:
    instance: str
    measured_gap: float
    prop1_bound: float
    prop2_bound: float
    parameters: dict
    holds1: bool
    holds2: bool
    slack: float

    def to_dict(self) -> dict:
        return asdict(self)


def bound_report(
    instance: str,
    measured_gap: float,
    prop1: float,
    prop2: float,
    parameters: dict,
    slack: float = SLACK,
) -> BoundReport:
    return BoundReport(
        instance, measured_gap, prop1, prop2, dict(parameters),
        measured_gap <= prop1 + slack, measured_gap <= prop2 + slack, slack,
    )


REPORT_COLUMNS = ("instance", "alpha", "measured_gap", "prop1", "prop2", "holds1", "holds2")


def reports_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        w.writerow([
            r.instance, repr(r.parameters.get("alpha")), repr(r.measured_gap),
            repr(r.prop1_bound), repr(r.prop2_bound), r.holds1, r.holds2,
        ])
    return buf.getvalue()


@dataclass(frozen=True)
class ConverseGap:
    n: int
    epsilon: float
    rho: float
    c: float
    alpha: float
    upsilon: float
    alpha_star: float
    upsilon_star: float
    upsilon_prime: float | None = None
    c_cmp: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def upsilon(rho: float, c: float, n: int, epsilon: float, alpha: float) -> float:
    """Outer-bound gap at a given penalty weight."""
    _check_ne(n, epsilon)
    a = alpha - 1.0
    if not a > 0:
        raise DomainError("alpha must exceed 1")
    return (rho / 2.0 + c / a) / a + alpha * _log_term(epsilon) / n


def _log_term(epsilon: float) -> float:
    return -math.log1p(-epsilon)


def _check_ne(n, epsilon):
    if not (isinstance(n, int) or float(n).is_integer()) or n < 1:
        raise DomainError(f"n must be a positive integer, got {n}")
    if not 0 < epsilon < 1:
        raise DomainError(f"epsilon must lie in (0, 1), got {epsilon}")


def alpha_star(rho: float, n: int, epsilon: float) -> float:
    _check_ne(n, epsilon)
    return math.sqrt(rho * n / (2.0 * _log_term(epsilon))) + 1.0


def upsilon_star(rho: float, c: float, n: int, epsilon: float) -> float:
    _check_ne(n, epsilon)
    lt = _log_term(epsilon)
    return math.sqrt(2.0 * rho * lt / n) + (2.0 * c / rho + 1.0) * lt / n


def upsilon_prime(c_cmp: float, n: int, epsilon: float) -> float:
    _check_ne(n, epsilon)
    if not c_cmp > 0:
        raise DomainError("comparison constant must be positive")
    lt = math.log(5.0) + _log_term(epsilon)
    return math.sqrt(c_cmp * lt / n) + 2.0 * lt / n


def converse_gap(
    rho: float,
    c: float,
    n: int,
    epsilon: float,
    alpha: float | None = None,
    c_cmp: float | None = None,
) -> ConverseGap:
    """Outer-bound gap with the closed-form penalty choice.

    When ``alpha`` is omitted the gap is evaluated at the closed-form choice.
    The comparison quantity is only computed when ``c_cmp`` is supplied.
    """
    _check_ne(n, epsilon)
    if not rho > 0:
        raise DomainError("rho must be positive")
    if c < 0:
        raise DomainError("c must be nonnegative")
    a_star = alpha_star(rho, n, epsilon)
    if alpha is not None and not alpha > 5:
        raise DomainError(f"explicit alpha must exceed 5, got {alpha}")
    a = a_star if alpha is None else float(alpha)
    return ConverseGap(
        n=int(n), epsilon=float(epsilon), rho=float(rho), c=float(c), alpha=a,
        upsilon=upsilon(rho, c, n, epsilon, a),
        alpha_star=a_star,
        upsilon_star=upsilon_star(rho, c, n, epsilon),
        upsilon_prime=None if c_cmp is None else upsilon_prime(c_cmp, n, epsilon),
        c_cmp=c_cmp,
    )
