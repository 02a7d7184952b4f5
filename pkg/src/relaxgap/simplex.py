"""Finite-alphabet probability machinery.

Distributions live on a product of finite alphabets and are stored as dense
row-major mass arrays.  All logarithms are natural.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _arr
from .errors import InputError, NumericDomainError

NORMALIZATION_TOL = 1e-12
MAX_CELLS = 1 << 26


def _canon_labels(subset) -> tuple[str, ...]:
    if isinstance(subset, str):
        return (subset,)
    return tuple(subset)


@dataclass(frozen=True)
class AlphabetProduct:
    """Variables ``names`` taking values in alphabets of the given ``sizes``."""

    names: tuple[str, ...]
    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))
        if not self.sizes:
            raise InputError("alphabet product needs at least one variable")
        if len(self.names) != len(self.sizes):
            raise InputError("names and sizes differ in length")
        if len(set(self.names)) != len(self.names):
            raise InputError(f"duplicate variable labels in {self.names}")
        if any(s < 1 for s in self.sizes):
            raise InputError(f"alphabet sizes must be >= 1, got {self.sizes}")
        if math.prod(self.sizes) > MAX_CELLS:
            raise InputError(
                f"product of sizes {self.sizes} exceeds {MAX_CELLS} cells"
            )

    @property
    def total(self) -> int:
        return math.prod(self.sizes)

    @property
    def nvars(self) -> int:
        return len(self.sizes)

    def axes(self, subset, allow_empty: bool = False) -> tuple[int, ...]:
        """Axis positions of ``subset`` in variable order."""
        labels = _canon_labels(subset)
        out = set()
        for lab in labels:
            if lab not in self.names:
                raise InputError(f"unknown variable label {lab!r}; have {self.names}")
            out.add(self.names.index(lab))
        if not out and not allow_empty:
            raise InputError("subset must be non-empty")
        return tuple(sorted(out))

    def sub(self, subset) -> "AlphabetProduct":
        ax = self.axes(subset)
        return AlphabetProduct(
            tuple(self.names[i] for i in ax), tuple(self.sizes[i] for i in ax)
        )

    def unravel(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.sizes))

    def ravel(self, outcome: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(outcome), self.sizes))

    def to_dict(self) -> dict:
        return {"names": list(self.names), "sizes": list(self.sizes)}


@dataclass(frozen=True, eq=False)
class JointDist:
    """A probability mass function over ``space`` (flat, row-major)."""

    space: AlphabetProduct
    mass: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        m = np.array(self.mass, dtype=float).reshape(-1)
        if m.size != self.space.total:
            raise InputError(
                f"mass has {m.size} entries, space {self.space.sizes} needs "
                f"{self.space.total}"
            )
        if not np.all(np.isfinite(m)):
            raise InputError("mass contains non-finite entries")
        if np.any(m < 0):
            raise InputError("mass contains negative entries")
        s = float(m.sum())
        if abs(s - 1.0) > NORMALIZATION_TOL:
            raise InputError(f"mass sums to {s!r}, not 1 within {NORMALIZATION_TOL}")
        m.flags.writeable = False
        object.__setattr__(self, "mass", m)

    @property
    def tensor(self) -> np.ndarray:
        return self.mass.reshape(self.space.sizes)

    @classmethod
    def from_tensor(cls, space: AlphabetProduct, t) -> "JointDist":
        return cls(space, np.asarray(t, dtype=float).reshape(-1))

    @classmethod
    def uniform(cls, space: AlphabetProduct) -> "JointDist":
        return cls(space, np.full(space.total, 1.0 / space.total))

    @classmethod
    def point(cls, space: AlphabetProduct, outcome) -> "JointDist":
        m = np.zeros(space.total)
        idx = outcome if isinstance(outcome, (int, np.integer)) else space.ravel(outcome)
        m[idx] = 1.0
        return cls(space, m)

    def to_dict(self) -> dict:
        return {**self.space.to_dict(), "mass": [float(v) for v in self.mass]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "JointDist":
        try:
            space = AlphabetProduct(tuple(d["names"]), tuple(d["sizes"]))
            return cls(space, d["mass"])
        except KeyError as exc:
            raise InputError(f"distribution JSON missing key {exc}") from None

    @classmethod
    def from_json(cls, text: str) -> "JointDist":
        return cls.from_dict(json.loads(text))

    def support(self) -> np.ndarray:
        return self.mass > 0


def _same_space(q: JointDist, p: JointDist) -> None:
    if q.space != p.space:
        raise InputError(f"space mismatch: {q.space} vs {p.space}")


def marginal(p: JointDist, subset) -> JointDist:
    ax = p.space.axes(subset)
    if ax == tuple(range(p.space.nvars)):
        return p
    t = _arr.marg(p.mass.reshape((1,) + p.space.sizes), ax)
    return JointDist(p.space.sub(subset), t.reshape(-1))


@dataclass(frozen=True, eq=False)
class ConditionalTable:
    """Rows of p(target | given); rows with zero-mass conditioning are undefined.

    ``rows[g]`` is a mass over target configurations for given-configuration
    ``g`` (both row-major).  ``defined[g]`` is False where the conditioning
    event has probability zero; such rows hold zeros and must not be read.
    """

    given: AlphabetProduct | None
    target: AlphabetProduct
    rows: np.ndarray = field(repr=False)
    defined: np.ndarray = field(repr=False)

    def row(self, g: int) -> np.ndarray | None:
        return self.rows[g] if self.defined[g] else None


def conditional(p: JointDist, target, given=()) -> ConditionalTable:
    t_ax = p.space.axes(target)
    g_ax = p.space.axes(given, allow_empty=True)
    if set(t_ax) & set(g_ax):
        raise InputError("target and given subsets overlap")
    tensor = p.tensor
    # move given axes first, then target axes, sum out the rest
    rest = tuple(i for i in range(p.space.nvars) if i not in t_ax and i not in g_ax)
    reduced = tensor.sum(axis=rest) if rest else tensor
    kept = [i for i in range(p.space.nvars) if i not in rest]
    order = [kept.index(i) for i in g_ax] + [kept.index(i) for i in t_ax]
    reduced = np.transpose(reduced, order)
    n_g = math.prod(p.space.sizes[i] for i in g_ax) if g_ax else 1
    n_t = math.prod(p.space.sizes[i] for i in t_ax)
    joint = reduced.reshape(n_g, n_t)
    norm = joint.sum(axis=1)
    defined = norm > 0
    rows = np.zeros_like(joint)
    rows[defined] = joint[defined] / norm[defined, None]
    given_space = p.space.sub(given) if g_ax else None
    return ConditionalTable(given_space, p.space.sub(target), rows, defined)


def kl_divergence(q: JointDist, p: JointDist) -> float:
    """D(q||p) in nats; ``math.inf`` when supp(q) is not inside supp(p)."""
    _same_space(q, p)
    return float(_arr.kl_rows(q.mass[None], p.mass[None])[0])


def total_variation_l1(q: JointDist, p: JointDist) -> float:
    """Sum of absolute differences (twice the usual total variation)."""
    _same_space(q, p)
    return float(np.abs(q.mass - p.mass).sum())


def _table(space: AlphabetProduct, f) -> np.ndarray:
    a = np.asarray(f, dtype=float).reshape(-1)
    if a.size != space.total:
        raise InputError(f"function table has {a.size} entries, need {space.total}")
    return a


def tilt_mass(base: np.ndarray, log_weight: np.ndarray) -> np.ndarray:
    """Normalize base * exp(log_weight) row-wise with a max shift.

    ``log_weight`` may be -inf (cell dropped) but not +inf or NaN on the
    support of ``base``.
    """
    base = np.atleast_2d(base)
    log_weight = np.broadcast_to(log_weight, base.shape)
    on = base > 0
    if np.any(on & ~(np.isfinite(log_weight) | (log_weight == -np.inf))):
        raise NumericDomainError("tilt weight is +inf or NaN on the support")
    with np.errstate(divide="ignore"):
        a = np.where(on, np.log(np.where(on, base, 1.0)) + log_weight, -np.inf)
    top = a.max(axis=1, keepdims=True)
    if np.any(~np.isfinite(top)):
        raise NumericDomainError("tilt normalizer is zero")
    w = np.exp(a - top)
    return w / w.sum(axis=1, keepdims=True)


def tilt(base: JointDist, weight, scale: float) -> JointDist:
    """Distribution proportional to base(x) * exp(scale * weight(x))."""
    if scale == 0:
        return base
    w = _table(base.space, weight)
    with np.errstate(invalid="ignore"):
        lw = scale * w
    lw = np.where(base.mass > 0, lw, 0.0)
    out = tilt_mass(base.mass[None], lw[None])[0]
    # exact renormalization keeps the 1e-12 invariant
    return JointDist(base.space, out / out.sum())


def moments(p: JointDist, f, up_to: int = 2) -> tuple[float, ...]:
    """(mean, variance, third central moment) of ``f`` under ``p``, truncated."""
    if up_to not in (1, 2, 3):
        raise InputError("up_to must be 1, 2 or 3")
    vals = _table(p.space, f)
    res = central_moments(p.mass[None], vals[None])
    return tuple(float(r[0]) for r in res[:up_to])


def central_moments(mass: np.ndarray, vals: np.ndarray):
    """Batched mean, variance and third central moment over the support."""
    on = mass > 0
    v = np.where(on, vals, 0.0)
    mean = (mass * v).sum(axis=1)
    dev = np.where(on, v - mean[:, None], 0.0)
    var = (mass * dev * dev).sum(axis=1)
    third = (mass * dev * dev * dev).sum(axis=1)
    return mean, np.maximum(var, 0.0), third


def entropy(p: JointDist, subset=None) -> float:
    ax = tuple(range(p.space.nvars)) if subset is None else p.space.axes(subset)
    return float(_arr.entropy(p.mass.reshape((1,) + p.space.sizes), ax)[0])


def mutual_information(p: JointDist, a, c, given=()) -> float:
    """I(A;C|B) from marginal entropies."""
    sp = p.space
    t = p.mass.reshape((1,) + sp.sizes)
    return float(
        _arr.cond_mutual_info(
            t, sp.axes(a), sp.axes(c), sp.axes(given, allow_empty=True)
        )[0]
    )


def random_dist(
    space: AlphabetProduct, rng: np.random.Generator, concentration: float = 1.0
) -> JointDist:
    m = rng.dirichlet(np.full(space.total, concentration))
    return JointDist(space, m / m.sum())


def stack(dists: Iterable[JointDist]) -> np.ndarray:
    return np.stack([d.mass for d in dists])
