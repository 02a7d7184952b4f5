"""Command-line front end: ``relaxgap {verify,wz,sweep-alpha}``.

Every run reads one JSON config (optional), applies flag overrides,
validates all numeric parameters, then writes ``report.json`` plus the
command's CSV into the output directory.  Exit status is 0 when every
check holds, 1 when some check fails and 2 on config or domain errors.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field, fields, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .bounds import SLACK, converse_gap
from .errors import DomainError, InputError, RelaxGapError
from .optimize import Method, OptimizerConfig, denominator_of
from .suite import CheckResult, SuiteConfig, instance_gap_rows, run_suite
from .wyner_ziv import BUILTINS, WzInstance, build_wz, delta_grid, region_csv, wz_region

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
COMMANDS = ("verify", "wz", "sweep-alpha")
DEFAULT_INSTANCE = {"name": "binary-symmetric", "crossover": 0.25, "u_card_star": 2}
DEFAULT_WZ_ALPHAS = (6.0, 12.0, 24.0)
DEFAULT_SWEEP_ALPHAS = "8:512:7"
INVALID = "invalid-domain"


class ConfigError(InputError):
    """Malformed or out-of-domain configuration."""


# ---------------------------------------------------------------- parsing


def parse_list(value) -> tuple[float, ...]:
    """Floats from a list, "a,b,c" text or a "lo:hi:count" log-spaced range."""
    if value is None:
        return ()
    if isinstance(value, (int, float)):
        return (float(value),)
    if isinstance(value, str):
        text = value.strip()
        if text.count(":") == 2:
            lo, hi, k = text.split(":")
            lo, hi, k = float(lo), float(hi), int(k)
            if not (0 < lo <= hi and k >= 1):
                raise ConfigError(f"bad log range {value!r}")
            return tuple(float(v) for v in np.geomspace(lo, hi, k))
        try:
            return tuple(float(v) for v in text.split(",") if v.strip())
        except ValueError:
            raise ConfigError(f"cannot parse number list {value!r}") from None
    try:
        return tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"cannot parse number list {value!r}") from None


@dataclass
class ExperimentConfig:
    """Effective run configuration after defaults and overrides."""

    command: str
    seed: int = 42
    out: str = "out"
    resolution: str | None = None
    alpha: tuple[float, ...] = ()
    xi_grid: tuple[float, ...] = ()
    xi: float = 0.5
    n: int | None = None
    epsilon: float | None = None
    rho: float | None = None
    c: float | None = None
    c_cmp: float | None = None
    method: str = "oracle"
    instance: Any = field(default_factory=lambda: dict(DEFAULT_INSTANCE))
    optimizer: dict = field(default_factory=dict)
    suite: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {f.name: _plain(getattr(self, f.name)) for f in fields(self)}


def _plain(v):
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    return v


def load_config(command: str, path: str | None, overrides: dict) -> ExperimentConfig:
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    known = {f.name for f in fields(ExperimentConfig)} - {"command"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    cfg = ExperimentConfig(command=command)
    for key, value in raw.items():
        if key in ("alpha", "xi_grid"):
            value = parse_list(value)
        setattr(cfg, key, value)
    if not cfg.xi_grid:
        cfg.xi_grid = tuple(float(x) for x in np.linspace(0.0, 1.0, 11))
    if not cfg.alpha and command == "wz":
        cfg.alpha = DEFAULT_WZ_ALPHAS
    if not cfg.alpha and command == "sweep-alpha":
        cfg.alpha = parse_list(DEFAULT_SWEEP_ALPHAS)
    if cfg.resolution is None and command != "verify":
        cfg.resolution = "1/8" if command == "wz" else "1/4"
    validate(cfg)
    return cfg


def _num(name, value, kind=float):
    try:
        out = kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {value!r}") from None
    if kind is float and not math.isfinite(out):
        raise ConfigError(f"{name} must be finite")
    return out


def validate(cfg: ExperimentConfig) -> None:
    """Check every parameter against the domain of the operations it feeds."""
    cfg.seed = _num("seed", cfg.seed, int)
    if not 0 <= cfg.seed < 2**63:
        raise ConfigError("seed must be a nonnegative 63-bit integer")
    if cfg.resolution is not None:
        denominator_of(cfg.resolution)
    if any(not (0.0 <= x <= 1.0) for x in cfg.xi_grid):
        raise DomainError(f"xi grid must lie in [0, 1], got {list(cfg.xi_grid)}")
    cfg.xi = _num("xi", cfg.xi)
    if not 0.0 <= cfg.xi <= 1.0:
        raise DomainError(f"xi must lie in [0, 1], got {cfg.xi}")
    for a in cfg.alpha:
        if not (math.isfinite(a) and a > 0):
            raise DomainError(f"alpha values must be positive and finite, got {a}")
    if cfg.command == "verify":
        # the side-information check needs alpha > 5(1 - xi) at every grid point
        for a in cfg.alpha:
            for xi in cfg.xi_grid:
                if not a > 5.0 * (1.0 - xi):
                    raise DomainError(
                        f"alpha={a:g} must exceed 5(1 - xi) = {5.0 * (1.0 - xi):g} at xi={xi:g}"
                    )
    if (cfg.n is None) != (cfg.epsilon is None) and cfg.command != "verify":
        raise ConfigError("n and epsilon must be given together")
    if cfg.n is not None:
        n = _num("n", cfg.n)
        if not (n >= 1 and float(n).is_integer()):
            raise DomainError(f"n must be a positive integer, got {cfg.n}")
        cfg.n = int(n)
    if cfg.epsilon is not None:
        cfg.epsilon = _num("epsilon", cfg.epsilon)
        if not 0.0 < cfg.epsilon < 1.0:
            raise DomainError(f"epsilon must lie in (0, 1), got {cfg.epsilon}")
    for name in ("rho", "c", "c_cmp"):
        v = getattr(cfg, name)
        if v is not None:
            v = _num(name, v)
            if v < 0 or (name != "c" and v == 0):
                raise DomainError(f"{name} out of range: {v}")
            setattr(cfg, name, v)
    if cfg.method not in ("oracle", "heuristic"):
        raise ConfigError(f"method must be 'oracle' or 'heuristic', got {cfg.method!r}")
    optimizer_config(cfg)
    suite_config(cfg)
    if cfg.command != "verify":
        load_instance(cfg.instance)


def optimizer_config(cfg: ExperimentConfig) -> OptimizerConfig:
    opts = dict(cfg.optimizer)
    if cfg.resolution is not None:
        opts["grid_denominator"] = denominator_of(cfg.resolution)
    opts.setdefault("seed", cfg.seed)
    try:
        return OptimizerConfig(**opts)
    except TypeError as exc:
        raise ConfigError(f"bad optimizer block: {exc}") from None


def suite_config(cfg: ExperimentConfig) -> SuiteConfig:
    opts = dict(cfg.suite)
    for key in ("alphas", "prop3_alphas", "xi_grid"):
        if key in opts and opts[key] is not None:
            opts[key] = parse_list(opts[key])
    opts["seed"] = cfg.seed
    if cfg.resolution is not None:
        n = denominator_of(cfg.resolution)
        opts.update(grid_denominator=n, prop3_denominator=n, heuristic_denominator=n)
    if cfg.alpha:
        opts["prop3_alphas"] = tuple(cfg.alpha)
    opts["xi_grid"] = tuple(cfg.xi_grid)
    if cfg.n is not None:
        opts["converse_n"] = cfg.n
    if cfg.epsilon is not None:
        opts["converse_epsilon"] = cfg.epsilon
    if cfg.rho is not None:
        opts["converse_rho"] = cfg.rho
    if cfg.c is not None:
        opts["converse_c"] = cfg.c
    try:
        sc = SuiteConfig(**opts)
    except TypeError as exc:
        raise ConfigError(f"bad suite block: {exc}") from None
    if sc.grid_denominator < 2 or sc.prop3_denominator < 2 or sc.heuristic_denominator < 2:
        raise ConfigError("grid denominators must be >= 2")
    return sc


def load_instance(spec) -> WzInstance:
    """Builtin name, ``{"name": ..., **params}``, inline instance dict or JSON path."""
    if isinstance(spec, str):
        if spec in BUILTINS:
            return BUILTINS[spec]()
        try:
            spec = json.loads(Path(spec).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load instance {spec!r}: {exc}") from None
    if not isinstance(spec, dict):
        raise ConfigError("instance must be a name, a path or an object")
    if "name" in spec:
        params = {k: v for k, v in spec.items() if k != "name"}
        try:
            return BUILTINS[spec["name"]](**params)
        except KeyError:
            raise ConfigError(f"unknown builtin instance {spec['name']!r}") from None
        except TypeError as exc:
            raise ConfigError(f"bad instance parameters: {exc}") from None
    return WzInstance.from_dict(spec)


# ---------------------------------------------------------------- output


def jsonable(v):
    """Recursively convert to JSON types; non-finite floats become strings."""
    if isinstance(v, dict):
        return {str(k): jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [jsonable(x) for x in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    return v


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    path.write_text(buf.getvalue())


def _guard(name: str, fn, *args):
    """Run ``fn``; numeric or library errors become one failed check."""
    try:
        return fn(*args), None
    except (RelaxGapError, ArithmeticError, ValueError) as exc:
        return None, CheckResult(name, math.nan, math.nan, False, 0.0, 0,
                                 {"error": f"{type(exc).__name__}: {exc}"})


# ---------------------------------------------------------------- commands


def cmd_verify(cfg: ExperimentConfig, out: Path) -> tuple[list[CheckResult], dict]:
    return run_suite(suite_config(cfg)), {}


def _converse_block(cfg: ExperimentConfig, rho: float, c: float) -> dict:
    cg = converse_gap(rho, c, cfg.n, cfg.epsilon, c_cmp=cfg.c_cmp)
    return cg.to_dict()


def cmd_wz(cfg: ExperimentConfig, out: Path) -> tuple[list[CheckResult], dict]:
    inst = load_instance(cfg.instance)
    ocfg = optimizer_config(cfg)
    method = Method.ORACLE if cfg.method == "oracle" else Method.HEURISTIC
    checks: list[CheckResult] = []
    results: dict = {"instance": inst.to_dict()}

    rows, fail = _guard("delta_table", delta_grid, inst, cfg.alpha, cfg.xi_grid, ocfg)
    if fail:
        return [fail], results
    header = ("xi", "alpha", "rwz", "rwz_alpha", "delta", "certified_gap", "bound",
              "rho_minus", "c_minus", "status")
    status = []
    for r in rows:
        if r.bound is None:
            status.append(INVALID)
        else:
            status.append("holds" if r.holds_exact else "violated")
    write_csv(out / "gaps.csv", header, [
        (r.xi, r.alpha, r.rwz, r.rwz_alpha, r.delta, r.certified_gap, r.bound,
         r.rho_minus, r.c_minus, s) for r, s in zip(rows, status)
    ])
    valid = [r for r in rows if r.bound is not None]
    margins = [r.delta - r.bound for r in valid]
    worst = max(margins, default=-math.inf)
    checks.append(CheckResult("prop3_bound", worst, 0.0, worst <= SLACK, SLACK, len(valid),
                              {"invalid_domain_rows": len(rows) - len(valid)}))
    # for each xi, the gap must not increase with the weight
    mono = 0.0
    by_xi: dict = {}
    for r in rows:
        by_xi.setdefault(r.xi, []).append(r)
    for rs in by_xi.values():
        rs.sort(key=lambda r: r.alpha)
        for a, b in zip(rs, rs[1:]):
            mono = max(mono, b.delta - a.delta)
    checks.append(CheckResult("delta_monotone", mono, 0.0, mono <= SLACK, SLACK, len(rows)))

    converse = None
    if cfg.n is not None:
        rho = cfg.rho if cfg.rho is not None else max(
            (r.rho_minus for r in valid), default=None)
        c = cfg.c if cfg.c is not None else max((r.c_minus for r in valid), default=None)
        if rho is None or c is None or not rho > 0:
            raise DomainError("converse block needs rho > 0 and c; none could be measured")
        block, fail = _guard("converse", _converse_block, cfg, rho, c)
        if fail:
            checks.append(fail)
        else:
            converse = converse_gap(rho, c, cfg.n, cfg.epsilon)
            results["converse"] = block
    polys, fail = _guard("region", wz_region, inst, cfg.xi_grid, ocfg, converse, method)
    if fail:
        checks.append(fail)
    else:
        (out / "region.csv").write_text(region_csv(polys))
        results["region_certified_gap"] = polys[0].certified_gap
        rates = [r for r, _ in polys[0].points]
        neg = min(rates, default=0.0)
        checks.append(CheckResult("region_rates_nonnegative", -neg, 0.0, neg >= 0.0, 0.0,
                                  len(rates)))
    return checks, results


def cmd_sweep_alpha(cfg: ExperimentConfig, out: Path) -> tuple[list[CheckResult], dict]:
    inst = load_instance(cfg.instance)
    ocfg = optimizer_config(cfg)
    problem = build_wz(inst, cfg.xi)
    probe = replace(ocfg, restarts=2, max_iters=200)
    res, fail = _guard("sweep", instance_gap_rows, 0, problem, cfg.alpha, ocfg, probe)
    if fail:
        return [fail], {}
    rows, info = res
    out_rows = []
    for r in rows:
        if r.prop2 is None:
            st = INVALID
        else:
            st = "holds" if r.gap <= r.prop2 + SLACK else "violated"
        out_rows.append((r.alpha, r.side, r.gap, r.prop1, r.prop2, st))
    write_csv(out / "sweep.csv", ("alpha", "side", "gap", "prop1", "prop2", "status"), out_rows)
    valid = [r for r in rows if r.prop2 is not None]
    m2 = max((r.gap - r.prop2 for r in valid), default=-math.inf)
    m1 = max(r.gap - r.prop1 for r in rows)
    checks = [
        CheckResult("gap_within_prop2", m2, 0.0, m2 <= SLACK, SLACK, len(valid),
                    {"invalid_domain_rows": len(rows) - len(valid)}),
        CheckResult("gap_within_prop1", m1, 0.0, m1 <= SLACK, SLACK, len(rows)),
    ]
    cross = {}
    for side in ("+", "-"):
        rs = sorted((r for r in valid if r.side == side), key=lambda r: r.alpha)
        below = [r.prop2 < r.prop1 for r in rs]
        start = len(below)
        while start > 0 and below[start - 1]:
            start -= 1
        cross[side] = rs[start].alpha if start < len(rs) else None
    ok = all(v is not None for v in cross.values())
    checks.append(CheckResult("improvement_crossover", 0.0 if ok else 1.0, 0.0, ok, 0.0,
                              len(valid), {"alpha0": cross}))
    return checks, {"xi": cfg.xi, "constants": info}


HANDLERS = {"verify": cmd_verify, "wz": cmd_wz, "sweep-alpha": cmd_sweep_alpha}


def build_report(cfg: ExperimentConfig, checks, results, wall_time: float) -> dict:
    return {
        "tool": "relaxgap",
        "version": __version__,
        "command": cfg.command,
        "seed": cfg.seed,
        "config": cfg.to_dict(),
        "checks": [c.to_dict() for c in checks],
        "failed": [c.name for c in checks if not c.holds],
        "all_hold": all(c.holds for c in checks),
        "results": results,
        "wall_time": wall_time,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def dump_report(report: dict) -> str:
    return json.dumps(jsonable(report), indent=2, sort_keys=True, allow_nan=False) + "\n"


def run(command: str, config_path: str | None = None, **overrides) -> int:
    """Execute one command; returns the exit status."""
    start = time.perf_counter()
    try:
        cfg = load_config(command, config_path, overrides)
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        checks, results = HANDLERS[command](cfg, out)
    except (InputError, DomainError) as exc:
        print(f"relaxgap: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = build_report(cfg, checks, results, time.perf_counter() - start)
    (out / "report.json").write_text(dump_report(report))
    for c in checks:
        mark = "PASS" if c.holds else "FAIL"
        print(f"{mark} {c.name}: measured={c.measured:.6g} bound={c.bound:.6g}")
    return EXIT_OK if report["all_hold"] else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="relaxgap", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"relaxgap {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    helps = {
        "verify": "run the property suite",
        "wz": "side-information region, gaps and bounds",
        "sweep-alpha": "gap against both bounds over a weight list",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", metavar="PATH")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--resolution", metavar="1/N")
        p.add_argument("--alpha", metavar="LIST", help="a,b,c or lo:hi:count (log spaced)")
        p.add_argument("--xi-grid", dest="xi_grid", metavar="LIST")
        p.add_argument("--n", type=int)
        p.add_argument("--epsilon", type=float)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in
                 ("seed", "out", "resolution", "alpha", "xi_grid", "n", "epsilon")}
    return run(args.command, args.config, **overrides)


if __name__ == "__main__":
    sys.exit(main())
