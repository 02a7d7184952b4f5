"""Extremum searches over feasible families.

Two engines are provided.  The oracle enumerates every type distribution with
a fixed denominator (or an explicit finite candidate set) and is exact on that
set.  The heuristic runs seeded multiplicative-weights descent on the
row-stochastic blocks of a factorization.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import CapExceededError, DomainError, InputError, RelaxGapError
from .omega import (
    OmegaSpec,
    check_lambda,
    log_mgf_batch,
    omega_tables,
    psi_batch,
    tilted_moments,
)
from .relaxation import (
    FeasibleSet,
    FixedMarginal,
    MarkovChain,
    RelaxationSpec,
    entropy_modulus,
    penalty_batch,
)
from .simplex import AlphabetProduct, JointDist, central_moments


class Sense(enum.Enum):
    MAX = "max"
    MIN = "min"


class Method(enum.Enum):
    ORACLE = "oracle"
    HEURISTIC = "heuristic"


@dataclass(frozen=True)
class OptimizerConfig:
    grid_denominator: int = 8
    restarts: int = 8
    max_iters: int = 500
    step_tolerance: float = 1e-10
    near_max_tol: float = 1e-6
    seed: int = 0
    point_cap: int = 50_000_000
    gamma_samples: int = 9
    chunk_size: int = 65536
    fd_step: float = 1e-7

    def __post_init__(self) -> None:
        if int(self.grid_denominator) != self.grid_denominator or self.grid_denominator < 2:
            raise InputError("grid denominator must be an integer >= 2")
        if self.restarts < 1 or self.max_iters < 1:
            raise InputError("restarts and max_iters must be >= 1")
        if not self.near_max_tol > 0:
            raise InputError("near_max_tol must be positive")
        if self.gamma_samples < 2:
            raise InputError("gamma_samples must be >= 2")
        if not 0 <= self.seed < 2**64:
            raise InputError("seed must fit in 64 bits")

    @property
    def grid_resolution(self) -> float:
        return 1.0 / self.grid_denominator

    @classmethod
    def from_resolution(cls, resolution: float, **kw) -> "OptimizerConfig":
        return cls(grid_denominator=denominator_of(resolution), **kw)

    def to_dict(self) -> dict:
        return asdict(self)


def denominator_of(resolution) -> int:
    """Integer N from a resolution given as 1/N (float) or "1/N" text."""
    if isinstance(resolution, str):
        text = resolution.strip()
        if text.startswith("1/"):
            text = text[2:]
            n = float(text)
        else:
            n = 1.0 / float(text)
    else:
        n = 1.0 / float(resolution)
    rounded = round(n)
    if rounded < 2 or abs(n - rounded) > 1e-9 * max(1.0, n):
        raise InputError(f"resolution {resolution!r} is not 1/N with integer N >= 2")
    return int(rounded)


@dataclass(frozen=True, eq=False)
class ExtremumResult:
    value: float
    argument: JointDist
    method: Method
    certified_gap: float
    evaluations: int
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "method": self.method.value,
            "certified_gap": self.certified_gap,
            "evaluations": self.evaluations,
            "argument": self.argument.to_dict(),
        }


@dataclass(frozen=True, eq=False)
class BlockFactorization:
    """Parameterization by row-stochastic blocks.

    ``blocks`` lists ``(rows, cols)`` per block; ``compose`` maps a list of
    arrays shaped ``(M, rows, cols)`` to masses ``(M, T)``.  ``joint`` marks
    the trivial one-block parameterization of the whole simplex.
    """

    blocks: tuple[tuple[int, int], ...]
    compose: Callable[[Sequence[np.ndarray]], np.ndarray]
    joint: bool = False


def joint_factorization(space: AlphabetProduct) -> BlockFactorization:
    return BlockFactorization(((1, space.total),), lambda bl: bl[0][:, 0, :], joint=True)


# ---------------------------------------------------------------- enumeration


def composition_count(k: int, n: int) -> int:
    return math.comb(n + k - 1, k - 1)


def compositions(k: int, n: int, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Integer vectors of length ``k`` summing to ``n``, lexicographic by bars."""
    total = composition_count(k, n)
    stop = total if stop is None else min(stop, total)
    if k == 1:
        return np.full((max(stop - start, 0), 1), n, dtype=np.int64)
    combos = itertools.islice(itertools.combinations(range(n + k - 1), k - 1), start, stop)
    bars = np.fromiter(
        itertools.chain.from_iterable(combos), dtype=np.int64, count=(stop - start) * (k - 1)
    ).reshape(stop - start, k - 1)
    out = np.empty((stop - start, k), dtype=np.int64)
    out[:, 0] = bars[:, 0]
    out[:, 1:-1] = np.diff(bars, axis=1) - 1
    out[:, -1] = n + k - 2 - bars[:, -1]
    return out


def _joint_chunks(space: AlphabetProduct, n: int, cap: int, chunk: int) -> Iterator[np.ndarray]:
    k = space.total
    count = composition_count(k, n)
    if count > cap:
        raise CapExceededError(
            f"grid with denominator {n} on {k} cells has {count} points; "
            f"raise the point cap to at least {count}"
        )
    combos = itertools.combinations(range(n + k - 1), k - 1)
    done = 0
    while done < count:
        m = min(chunk, count - done)
        if k == 1:
            counts = np.full((m, 1), n, dtype=np.int64)
        else:
            bars = np.fromiter(
                itertools.chain.from_iterable(itertools.islice(combos, m)),
                dtype=np.int64,
                count=m * (k - 1),
            ).reshape(m, k - 1)
            counts = np.empty((m, k), dtype=np.int64)
            counts[:, 0] = bars[:, 0]
            counts[:, 1:-1] = np.diff(bars, axis=1) - 1
            counts[:, -1] = n + k - 2 - bars[:, -1]
        done += m
        yield counts / n


def factor_grid_size(fac: BlockFactorization, n: int) -> int:
    return math.prod(composition_count(c, n) ** r for r, c in fac.blocks)


def _factor_chunks(fac: BlockFactorization, n: int, cap: int, chunk: int) -> Iterator[np.ndarray]:
    total = factor_grid_size(fac, n)
    if total > cap:
        raise CapExceededError(
            f"factor grid with denominator {n} has {total} points; "
            f"raise the point cap to at least {total}"
        )
    tables = [compositions(c, n) / n for _, c in fac.blocks]
    radices = []
    for (r, _), tab in zip(fac.blocks, tables):
        radices.extend([len(tab)] * r)
    # first row of the first block is the most significant digit
    weights = np.ones(len(radices), dtype=np.int64)
    for i in range(len(radices) - 2, -1, -1):
        weights[i] = weights[i + 1] * radices[i + 1]
    for lo in range(0, total, chunk):
        idx = np.arange(lo, min(lo + chunk, total), dtype=np.int64)
        digits = (idx[:, None] // weights[None, :]) % np.asarray(radices)[None, :]
        blocks, pos = [], 0
        for (r, _), tab in zip(fac.blocks, tables):
            blocks.append(tab[digits[:, pos:pos + r]])
            pos += r
        yield fac.compose(blocks)


def grid_chunks(feasible: FeasibleSet, cfg: OptimizerConfig) -> Iterator[np.ndarray]:
    """Candidate masses in deterministic order, in chunks."""
    if feasible.points is not None:
        pts = feasible.points
        for lo in range(0, pts.shape[0], cfg.chunk_size):
            yield pts[lo:lo + cfg.chunk_size]
        return
    fac = feasible.factorization
    n = cfg.grid_denominator
    if fac is not None and not fac.joint:
        # the factorization satisfies every predicate by construction
        yield from _factor_chunks(fac, n, cfg.point_cap, cfg.chunk_size)
        return
    for chunk in _joint_chunks(feasible.space, n, cfg.point_cap, cfg.chunk_size):
        keep = feasible.mask(chunk)
        if keep.any():
            yield chunk[keep]


def grid_enumerate(
    feasible: FeasibleSet, space: AlphabetProduct, resolution, cap: int = 50_000_000
) -> Iterator[JointDist]:
    """Every type distribution with denominator N that passes all predicates."""
    if space != feasible.space:
        raise InputError("space does not match the feasible set")
    n = denominator_of(resolution)
    for chunk in _joint_chunks(space, n, cap, 65536):
        keep = feasible.mask(chunk)
        for row in chunk[keep]:
            yield JointDist(space, row)


def collect_points(feasible: FeasibleSet, cfg: OptimizerConfig) -> np.ndarray:
    chunks = list(grid_chunks(feasible, cfg))
    if not chunks:
        raise InputError("feasible grid is empty at this resolution")
    return np.concatenate(chunks)


# ---------------------------------------------------------------- certification


def covering_radius(k: int, n: int) -> float:
    """Largest L1 distance from a point of the k-simplex to the 1/n grid."""
    if k <= 1:
        return 0.0
    return 2.0 * (k // 2) * ((k + 1) // 2) / (k * n)


def grid_delta(feasible: FeasibleSet, n: int) -> float:
    fac = feasible.factorization
    if fac is None or fac.joint:
        return min(covering_radius(feasible.space.total, n), 2.0)
    return min(sum(covering_radius(c, n) for _, c in fac.blocks), 2.0)


def psi_modulus(omega: OmegaSpec, delta: float) -> float:
    """Bound on |mean(p) - mean(p')| when ||p - p'||_1 <= delta."""
    sp = omega.space
    out = 0.5 * delta * omega.phi_max * sum(abs(t.coef) for t in omega.phi_terms)
    for t in omega.mu_terms + omega.eta_terms:
        size = math.prod(sp.sizes[i] for i in sp.axes(t.subset))
        out += t.coef * entropy_modulus(delta, size)
    return float(out)


# ---------------------------------------------------------------- oracle core


def _lex_first(points: np.ndarray) -> int:
    return int(np.lexsort(points.T[::-1])[0])


def _scan(
    chunks: Iterator[np.ndarray],
    objective: Callable[[np.ndarray], np.ndarray],
    sense: Sense,
):
    best_val, best_pt, count = -math.inf, None, 0
    sgn = 1.0 if sense is Sense.MAX else -1.0
    for chunk in chunks:
        vals = sgn * objective(chunk)
        vals = np.where(np.isnan(vals), -np.inf, vals)
        count += chunk.shape[0]
        top = vals.max()
        ties = np.flatnonzero(vals == top)
        cand = chunk[ties[_lex_first(chunk[ties])]]
        if best_pt is None or top > best_val or (
            top == best_val and tuple(cand) < tuple(best_pt)
        ):
            best_val, best_pt = float(top), cand.copy()
    if best_pt is None:
        raise InputError("feasible grid is empty at this resolution")
    return sgn * best_val, best_pt, count


_CACHE: dict = {}
_CACHE_LIMIT = 24


def _cached(key, build):
    hit = _CACHE.get(key[0])
    if hit is not None and all(a is b for a, b in zip(hit[0], key[1])):
        return hit[1]
    val = build()
    if len(_CACHE) >= _CACHE_LIMIT:
        _CACHE.pop(next(iter(_CACHE)))
    _CACHE[key[0]] = (key[1], val)
    return val


def _point_values(kind: str, spec, points: np.ndarray, fn, chunk: int) -> np.ndarray:
    """Per-point scalar values over a materialized set, memoized by identity."""

    def build():
        out = np.concatenate(
            [fn(points[lo:lo + chunk]) for lo in range(0, points.shape[0], chunk)]
        )
        out.flags.writeable = False
        return out

    return _cached(((kind, id(spec), id(points)), (spec, points)), build)


def _psi_values(omega, chunk):
    return psi_batch(chunk, omega_tables(omega, chunk))


def _as_dist(space, row) -> JointDist:
    row = np.asarray(row, dtype=float)
    return JointDist(space, row / row.sum())


def _oracle(objective, feasible, sense, cfg, gap, materialized=None):
    if feasible.points is not None and materialized is not None:
        vals = materialized(feasible.points)
        value, arg, count = _scan(iter([feasible.points]), lambda _: vals, sense)
    else:
        value, arg, count = _scan(grid_chunks(feasible, cfg), objective, sense)
    return ExtremumResult(
        value, _as_dist(feasible.space, arg), Method.ORACLE, gap, count,
        {"resolution": cfg.grid_resolution},
    )


def extremize_psi_tilde(
    omega: OmegaSpec,
    feasible: FeasibleSet,
    sense: Sense,
    cfg: OptimizerConfig,
    method: Method = Method.ORACLE,
) -> ExtremumResult:
    """Largest or smallest mean of the functional over the feasible family."""
    objective = lambda chunk: _psi_values(omega, chunk)
    if method is Method.HEURISTIC:
        return heuristic_extremum(objective, feasible, sense, cfg)
    gap = psi_modulus(omega, grid_delta(feasible, cfg.grid_denominator))

    def materialized(points):
        return _point_values("psi", omega, points, objective, cfg.chunk_size)

    return _oracle(objective, feasible, sense, cfg, gap, materialized)


def _penalty_values(relax, points, chunk):
    return _point_values(
        "kl", relax, points, lambda c: penalty_batch(relax, c), chunk
    )


def extremize_psi_alpha(
    omega: OmegaSpec,
    relax: RelaxationSpec,
    feasible_star: FeasibleSet,
    alpha: float,
    sense: Sense,
    cfg: OptimizerConfig,
    method: Method = Method.ORACLE,
) -> ExtremumResult:
    """Penalized extremum: MAX pairs with +alpha, MIN with -alpha."""
    if not (alpha >= 0 and math.isfinite(alpha)):
        raise DomainError(f"alpha must be finite and nonnegative, got {alpha}")
    sgn = -1.0 if sense is Sense.MAX else 1.0

    def combine(psi, kl):
        if alpha == 0:
            return psi
        with np.errstate(invalid="ignore"):
            return psi + sgn * alpha * kl

    def objective(chunk):
        return combine(_psi_values(omega, chunk), penalty_batch(relax, chunk))

    if method is Method.HEURISTIC:
        res = heuristic_extremum(objective, feasible_star, sense, cfg)
    else:
        delta = grid_delta(feasible_star, cfg.grid_denominator)
        kl_mod = relax.entry.kl_modulus(relax.space, relax.map_params, delta)
        gap = psi_modulus(omega, delta) + (alpha * kl_mod if alpha > 0 else 0.0)

        def materialized(points):
            psi = _point_values("psi", omega, points, lambda c: _psi_values(omega, c),
                                cfg.chunk_size)
            return combine(psi, _penalty_values(relax, points, cfg.chunk_size))

        res = _oracle(objective, feasible_star, sense, cfg, gap, materialized)
    res.diagnostics["alpha"] = alpha
    return res


def omega_tilde_max(
    omega: OmegaSpec, feasible: FeasibleSet, lam: float, cfg: OptimizerConfig
) -> ExtremumResult:
    """Largest cumulant value at ``lam`` over the feasible family.

    No continuity modulus is available for this objective, so the certified
    gap is reported as infinite.
    """
    check_lambda(omega, lam, half=True)
    objective = lambda chunk: log_mgf_batch(chunk, omega_tables(omega, chunk), lam)
    res = _oracle(objective, feasible, Sense.MAX, cfg, math.inf)
    if lam == 0:
        return ExtremumResult(0.0, res.argument, res.method, res.certified_gap,
                              res.evaluations, res.diagnostics)
    return res


# ---------------------------------------------------------------- heuristic


def _ipf(masses: np.ndarray, space: AlphabetProduct, preds, sweeps: int = 50) -> np.ndarray:
    t = masses.reshape((masses.shape[0],) + space.sizes).copy()
    for _ in range(sweeps):
        for pred in preds:
            ax = space.axes(pred.subset)
            drop = tuple(1 + i for i in range(space.nvars) if i not in ax)
            cur = t.sum(axis=drop, keepdims=True)
            shape = [1] + [space.sizes[i] if i in ax else 1 for i in range(space.nvars)]
            tgt = pred.target.mass.reshape(shape)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = t * np.where(cur > 0, tgt / cur, 0.0)
    return t.reshape(masses.shape)


def heuristic_extremum(
    objective: Callable[[np.ndarray], np.ndarray],
    feasible: FeasibleSet,
    sense: Sense,
    cfg: OptimizerConfig,
) -> ExtremumResult:
    """Seeded multi-start multiplicative-weights search on row blocks.

    All restarts advance together as one batch.  Gradients are forward
    differences along renormalized coordinate bumps, which differ from the
    true gradient only by a per-row constant that the update ignores.  A
    final pass snaps rows to vertices when that improves the objective.
    """
    fac = feasible.factorization or joint_factorization(feasible.space)
    preds = [p for p in feasible.predicates if isinstance(p, FixedMarginal)]
    if fac.joint and any(isinstance(p, MarkovChain) for p in feasible.predicates):
        raise InputError("Markov constraints need a factorization for heuristic search")
    project = (lambda m: _ipf(m, feasible.space, preds)) if fac.joint and preds else None

    def evaluate(blocks):
        m = fac.compose(blocks)
        if project:
            m = project(m)
        return sgn * objective(m), m

    sgn = 1.0 if sense is Sense.MAX else -1.0
    h = cfg.fd_step
    rng = np.random.default_rng(cfg.seed)
    shapes = fac.blocks
    n_par = sum(r * c for r, c in shapes)
    R = cfg.restarts
    blocks = [rng.dirichlet(np.ones(c), size=(R, r)) for r, c in shapes]
    # bump k of every restart perturbs one (block, row, col) entry
    bumps = []
    for bi, (r, c) in enumerate(shapes):
        for row in range(r):
            for col in range(c):
                bumps.append((bi, row, col))
    best_val = np.full(R, -np.inf)
    best_pt = np.zeros((R, feasible.space.total))
    evals = 0
    active = np.ones(R, dtype=bool)
    for it in range(1, cfg.max_iters + 1):
        batch = [np.repeat(b[:, None], n_par + 1, axis=1) for b in blocks]
        for k, (bi, row, col) in enumerate(bumps, start=1):
            v = batch[bi][:, k, row]
            v[:, col] += h
            v /= 1.0 + h
        flat = [b.reshape((R * (n_par + 1),) + b.shape[2:]) for b in batch]
        vals, masses = evaluate(flat)
        vals = vals.reshape(R, n_par + 1)
        evals += vals.size
        cur = vals[:, 0]
        better = np.isfinite(cur) & (cur > best_val)
        best_val = np.where(better, cur, best_val)
        best_pt[better] = masses.reshape(R, n_par + 1, -1)[better, 0]
        with np.errstate(invalid="ignore"):
            grad = (vals[:, 1:] - cur[:, None]) / h
        grad = np.nan_to_num(grad, nan=0.0, posinf=0.0, neginf=0.0)
        step = 0.5 / math.sqrt(it)
        moved = np.zeros(R)
        j = 0
        for bi, (r, c) in enumerate(shapes):
            g = grad[:, j:j + r * c].reshape(R, r, c)
            j += r * c
            expo = np.clip(step * g, -50.0, 50.0)
            expo -= expo.max(axis=2, keepdims=True)
            nb = blocks[bi] * np.exp(expo)
            nb /= nb.sum(axis=2, keepdims=True)
            nb = np.where(active[:, None, None], nb, blocks[bi])
            moved = np.maximum(moved, np.abs(nb - blocks[bi]).max(axis=(1, 2)))
            blocks[bi] = nb
        active &= moved >= cfg.step_tolerance
        if not active.any():
            break
    # greedy vertex snapping, one row at a time
    for bi, (r, c) in enumerate(shapes):
        for row in range(r):
            trial = [b.copy() for b in blocks]
            snap = np.zeros((R, c))
            snap[np.arange(R), trial[bi][:, row].argmax(axis=1)] = 1.0
            trial[bi][:, row] = snap
            tv, _ = evaluate(blocks)
            nv, _ = evaluate(trial)
            evals += 2 * R
            keep = np.isfinite(nv) & (nv >= tv)
            blocks[bi] = np.where(keep[:, None, None], trial[bi], blocks[bi])
    fv, fm = evaluate(blocks)
    evals += R
    better = np.isfinite(fv) & (fv > best_val)
    best_val = np.where(better, fv, best_val)
    best_pt[better] = fm[better]
    if not np.isfinite(best_val).any():
        raise RelaxGapError("heuristic found no point with a finite objective")
    top = int(np.argmax(best_val))
    return ExtremumResult(
        sgn * float(best_val[top]), _as_dist(feasible.space, best_pt[top]),
        Method.HEURISTIC, math.inf, evals,
        {"restarts": R, "seed": cfg.seed, "iterations": it},
    )


# ---------------------------------------------------------------- curvature


@dataclass(frozen=True)
class CurvatureConstants:
    """Variance and third-derivative constants over near-maximizers.

    The per-lambda arrays are aligned with the lambda grids.
    """

    rho_plus: float
    rho_minus: float
    c_plus: float
    c_minus: float
    lambda_grid_plus: tuple[float, ...]
    lambda_grid_minus: tuple[float, ...]
    rho_by_lambda_plus: tuple[float, ...]
    rho_by_lambda_minus: tuple[float, ...]
    c_by_lambda_plus: tuple[float, ...]
    c_by_lambda_minus: tuple[float, ...]
    near_max_tol: float
    gamma_samples: int

    def side(self, sign: str) -> tuple[float, float]:
        return (self.rho_plus, self.c_plus) if sign == "+" else (self.rho_minus, self.c_minus)

    def to_dict(self) -> dict:
        return asdict(self)


def _side_grid(edge: float, samples: int, extras, cap, sign: str) -> np.ndarray:
    if not math.isfinite(edge):
        if cap is None:
            raise DomainError(
                f"the {sign} window is unbounded; supply lambda_cap to limit it"
            )
        edge = cap if sign == "+" else -cap
    grid = set(np.linspace(0.0, edge, samples).tolist())
    for lam in extras:
        if (lam > 0) == (sign == "+") and lam != 0:
            if abs(lam) > abs(edge) * (1 + 1e-12):
                raise DomainError(f"extra lambda {lam} lies outside [0, {edge}]")
            grid.add(float(lam))
    return np.array(sorted(grid))


def curvature_constants(
    omega: OmegaSpec,
    feasible: FeasibleSet,
    cfg: OptimizerConfig,
    lambda_samples: int = 9,
    extra_lambdas: Sequence[float] = (),
    lambda_cap: float | None = None,
) -> CurvatureConstants:
    """Grid estimates of the variance and third-cumulant constants.

    ``extra_lambdas`` adds specific points to the grids.  When a window is
    unbounded (a zero coefficient sum) ``lambda_cap`` bounds its magnitude.
    """
    if lambda_samples < 3:
        raise InputError("lambda_samples must be >= 3")
    lo, hi = omega.derivative_window
    plus = _side_grid(hi, lambda_samples, extra_lambdas, lambda_cap, "+")
    minus = _side_grid(lo, lambda_samples, extra_lambdas, lambda_cap, "-")
    lams = np.unique(np.concatenate([minus, plus]))
    points = collect_points(feasible, cfg)
    m = points.shape[0]
    values = np.empty((m, lams.size))
    var0 = np.empty(m)
    for lo_i in range(0, m, cfg.chunk_size):
        chunk = points[lo_i:lo_i + cfg.chunk_size]
        w = omega_tables(omega, chunk)
        var0[lo_i:lo_i + chunk.shape[0]] = central_moments(
            chunk, np.where(chunk > 0, w, 0.0)
        )[1]
        for j, lam in enumerate(lams):
            values[lo_i:lo_i + chunk.shape[0], j] = log_mgf_batch(chunk, w, lam)
    rho, cc = {}, {}
    for j, lam in enumerate(lams):
        col = values[:, j]
        near = np.flatnonzero(col >= col.max() - cfg.near_max_tol)
        if near.size == 0:
            raise RelaxGapError("empty near-maximizer set")
        rho[lam] = float(var0[near].max())
        gammas = np.linspace(0.0, lam, cfg.gamma_samples)
        best = 0.0
        for lo_i in range(0, near.size, cfg.chunk_size):
            sub = points[near[lo_i:lo_i + cfg.chunk_size]]
            w = omega_tables(omega, sub)
            for gam in np.unique(gammas):
                third = tilted_moments(sub, w, float(gam))[2]
                best = max(best, float(np.abs(third).max()) / 6.0)
        cc[lam] = best
    rp = tuple(rho[v] for v in plus)
    rm = tuple(rho[v] for v in minus)
    cp = tuple(cc[v] for v in plus)
    cm = tuple(cc[v] for v in minus)
    return CurvatureConstants(
        rho_plus=max(rp), rho_minus=max(rm), c_plus=max(cp), c_minus=max(cm),
        lambda_grid_plus=tuple(plus.tolist()), lambda_grid_minus=tuple(minus.tolist()),
        rho_by_lambda_plus=rp, rho_by_lambda_minus=rm,
        c_by_lambda_plus=cp, c_by_lambda_minus=cm,
        near_max_tol=cfg.near_max_tol, gamma_samples=cfg.gamma_samples,
    )
