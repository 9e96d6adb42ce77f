"""Command-line front end: rate, optimize, sweep and verify.

Configuration is an INI file with [problem], [model] and [command] sections;
intervals are written "lo,hi". `--set section.key=value` overrides file values.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, replace
from enum import Enum
from typing import Any, Sequence

from .analytic import growth
from .core import (
    ConstraintError, FeasibilityError, Gbm, GrowthPoint, Interval, MODEL_TYPES, ModelSpec,
    OptimalLeverage, Problem,
)
from .mc import SimRequest, SimulationError, dominance_check, growth_curve
from .optimizer import DEFAULT_EPSILON, lipschitz_M, optimize, optimize_beta_grid

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VALIDATION, EXIT_FEASIBILITY, EXIT_VERIFY = 0, 1, 2, 3
SCAN_AXES = ("sigma_lo", "rho_hi")
ALL_CHECKS = ("analytic", "convergence", "dominance")

log = logging.getLogger("robust_letf")


class Command(str, Enum):
    RATE = "rate"
    OPTIMIZE = "optimize"
    SWEEP = "sweep"
    VERIFY = "verify"


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec
    prob: Problem
    command: Command
    beta: float | None = None
    epsilon: float = DEFAULT_EPSILON
    candidates: bool = False
    beta_grid: tuple[float, float, int] | None = None
    scan_axis: str | None = None
    scan_values: tuple[float, float, int] | None = None
    horizon: float = 100.0
    dt: float = 1 / 500
    paths: int = 100_000
    seed: int = 0
    antithetic: bool = False
    samples: int = 0
    checks: tuple[str, ...] = ALL_CHECKS
    v0: float | None = None
    output_path: str | None = None
    output_format: str = "csv"

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp["problem"] = {"p": repr(self.prob.p), "beta_range": str(self.prob.beta_range)}
        if self.prob.r is not None:
            cp["problem"]["r"] = repr(self.prob.r)
        cp["model"] = {"family": self.model.family}
        for name, iv in self.model.box().items():
            cp["model"][name] = str(iv)
        if getattr(self.model, "r0", None) is not None:
            cp["model"]["r0"] = repr(self.model.r0)
        sec = {"name": self.command.value}
        defaults = RunConfig.__dataclass_fields__
        for key in _COMMAND_KEYS:
            value = getattr(self, key)
            if value != defaults[key].default:
                sec[key] = _fmt_option(value)
        cp["command"] = sec
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


_COMMAND_KEYS = ("beta", "epsilon", "candidates", "beta_grid", "scan_axis", "scan_values",
                 "horizon", "dt", "paths", "seed", "antithetic", "samples", "checks", "v0",
                 "output_path", "output_format")


def _fmt_option(value) -> str:
    if isinstance(value, tuple):
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _triple(text: str) -> tuple[float, float, int]:
    parts = [s.strip() for s in text.split(",")]
    if len(parts) != 3:
        raise ConstraintError(f"expected 'lo,hi,n', got {text!r}")
    n = int(parts[2])
    if n < 2:
        raise ConstraintError("grid needs at least 2 points")
    return float(parts[0]), float(parts[1]), n


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConstraintError(f"not a boolean: {text!r}")


_PARSERS = {
    "beta": float, "epsilon": float, "candidates": _bool, "beta_grid": _triple,
    "scan_axis": str, "scan_values": _triple, "horizon": float, "dt": float, "paths": int,
    "seed": int, "antithetic": _bool, "samples": int, "v0": float, "output_path": str,
    "output_format": str,
    "checks": lambda s: tuple(c.strip() for c in s.split(",") if c.strip()),
}


def parse_config(text: str, command: str | None = None,
                 overrides: Sequence[str] = ()) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConstraintError(f"bad config: {exc}") from None
    for item in overrides:
        key, sep, value = item.partition("=")
        section, dot, name = key.strip().partition(".")
        if not dot:
            section, name = "command", section
        if not (sep and name):
            raise ConstraintError(f"--set expects [section.]key=value, got {item!r}")
        if not cp.has_section(section):
            cp.add_section(section)
        cp[section][name] = value.strip()
    for sec in ("problem", "model"):
        if not cp.has_section(sec):
            raise ConstraintError(f"config lacks a [{sec}] section")
    pr = cp["problem"]
    try:
        prob = Problem(
            p=float(pr["p"]),
            r=float(pr["r"]) if "r" in pr else None,
            beta_range=Interval.parse(pr.get("beta_range", "-5,5")),
        )
        ms = dict(cp["model"])
        family = ms.pop("family", None)
        if family not in MODEL_TYPES:
            raise ConstraintError(f"unknown model family {family!r}; choose from {sorted(MODEL_TYPES)}")
        cls = MODEL_TYPES[family]
        kwargs: dict[str, Any] = {}
        for name in cls.param_names:
            if name not in ms:
                raise ConstraintError(f"[model] lacks {name}")
            kwargs[name] = Interval.parse(ms.pop(name))
        if "r0" in ms:
            kwargs["r0"] = float(ms.pop("r0"))
        if ms:
            raise ConstraintError(f"unknown [model] keys {sorted(ms)}")
        model = cls(**kwargs)
        cs = dict(cp["command"]) if cp.has_section("command") else {}
        name = cs.pop("name", None)
        if command and name and command != name:
            log.info("subcommand %r replaces [command] name=%r", command, name)
        name = command or name
        if name not in {c.value for c in Command}:
            raise ConstraintError(f"unknown command {name!r}")
        opts = {}
        for key, raw in cs.items():
            if key not in _PARSERS:
                raise ConstraintError(f"unknown [command] key {key!r}")
            opts[key] = _PARSERS[key](raw)
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConstraintError):
            raise
        raise ConstraintError(f"bad config value: {exc}") from None
    cfg = RunConfig(model=model, prob=prob, command=Command(name), **opts)
    _check_config(cfg)
    return cfg


def _check_config(cfg: RunConfig) -> None:
    if cfg.output_format not in ("csv", "json"):
        raise ConstraintError("format must be csv or json")
    if cfg.command is Command.RATE and cfg.beta is None:
        raise ConstraintError("rate needs beta")
    if cfg.scan_axis is not None:
        if cfg.scan_axis not in SCAN_AXES:
            raise ConstraintError(f"scan_axis must be one of {SCAN_AXES}")
        if cfg.scan_values is None:
            raise ConstraintError("scan_axis needs scan_values")
    bad = set(cfg.checks) - set(ALL_CHECKS)
    if bad:
        raise ConstraintError(f"unknown checks {sorted(bad)}")
    if not cfg.epsilon > 0:
        raise ConstraintError("epsilon must be positive")


# --- records ------------------------------------------------------------------

def _num(x):
    if x is None:
        return None
    if isinstance(x, bool):
        return x
    if isinstance(x, int):
        return x
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return float(f"{float(x):.12g}")


def growth_record(gp: GrowthPoint) -> dict:
    rec = {"schema_version": SCHEMA_VERSION, "beta": _num(gp.beta), "rate": _num(gp.rate),
           "feasible": gp.feasible, "feasibility_note": gp.feasibility_note}
    if gp.worst is not None:
        rec["regime"] = gp.worst.regime.value
        rec["subcase"] = gp.worst.subcase or ""
        for k, v in gp.worst.params.items():
            rec[f"worst.{k}"] = _num(v)
    return rec


def optimal_records(opt: OptimalLeverage, with_candidates: bool) -> list[dict]:
    base = {"schema_version": SCHEMA_VERSION, "beta_star": _num(opt.beta_star),
            "rate_star": _num(opt.rate_star), "method": opt.method.value,
            "error_bound": _num(opt.error_bound), "lipschitz_M": _num(opt.lipschitz_M),
            "mesh": _num(opt.mesh), "n_candidates": len(opt.candidates),
            "n_skipped": len(opt.skipped)}
    if not with_candidates:
        return [base]
    return [{**base, "candidate_beta": _num(b), "candidate_rate": _num(r)}
            for b, r in opt.candidates]


def write_records(records: list[dict], path: str | None, fmt: str) -> None:
    if fmt == "json":
        text = json.dumps(records, indent=2) + "\n"
    else:
        cols: list[str] = []
        for rec in records:
            cols.extend(k for k in rec if k not in cols)
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for rec in records:
            w.writerow({k: "" if rec.get(k) is None else rec.get(k) for k in cols})
        text = buf.getvalue()
    if path in (None, "", "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


# --- commands -----------------------------------------------------------------

def cmd_rate(cfg: RunConfig) -> tuple[list[dict], int]:
    gp = growth(cfg.model, cfg.prob, cfg.beta)
    return [growth_record(gp)], EXIT_OK if gp.feasible else EXIT_FEASIBILITY


def cmd_optimize(cfg: RunConfig) -> tuple[list[dict], int]:
    opt = optimize(cfg.model, cfg.prob, cfg.epsilon)
    return optimal_records(opt, cfg.candidates), EXIT_OK


def _linspace(lo: float, hi: float, n: int) -> list[float]:
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _scanned_model(model: ModelSpec, axis: str, value: float) -> ModelSpec:
    if axis == "sigma_lo":
        return replace(model, sigma=Interval(value, model.sigma.hi))
    return replace(model, rho=Interval(model.rho.lo, value))


def cmd_sweep(cfg: RunConfig) -> tuple[list[dict], int]:
    if cfg.scan_axis is None:
        br = cfg.prob.beta_range
        lo, hi, n = cfg.beta_grid or (br.lo, br.hi, 201)
        return [growth_record(growth(cfg.model, cfg.prob, b)) for b in _linspace(lo, hi, n)], EXIT_OK
    models = [(v, _scanned_model(cfg.model, cfg.scan_axis, v)) for v in _linspace(*cfg.scan_values)]
    rows = []
    grid_models = not isinstance(cfg.model, Gbm) and cfg.model.family not in ("cir", "threehalves")
    # one β grid for every scan point, so β* values are comparable
    common_M = max(lipschitz_M(m, cfg.prob) for _, m in models) if grid_models else None
    for value, m in models:
        if grid_models:
            opt = optimize_beta_grid(m, cfg.prob, cfg.epsilon, M=common_M)
        else:
            opt = optimize(m, cfg.prob, cfg.epsilon)
        rows.append({"schema_version": SCHEMA_VERSION, "axis": cfg.scan_axis, "value": _num(value),
                     "beta_star": _num(opt.beta_star), "rate_star": _num(opt.rate_star)})
    return rows, EXIT_OK


def _check_row(check: str, passed: bool, measured: float, threshold: float, note: str = "") -> dict:
    return {"schema_version": SCHEMA_VERSION, "check": check, "passed": passed,
            "measured": _num(measured), "threshold": _num(threshold), "note": note}


def cmd_verify(cfg: RunConfig) -> tuple[list[dict], int]:
    beta = cfg.beta if cfg.beta is not None else 1.0
    gp = growth(cfg.model, cfg.prob, beta)
    if not gp.feasible:
        raise FeasibilityError(gp.feasibility_note)
    template = SimRequest(gp.worst.as_model(cfg.model), cfg.prob, beta, cfg.horizon, cfg.dt,
                          cfg.paths, cfg.seed, antithetic=cfg.antithetic, v0=cfg.v0)
    exact = isinstance(cfg.model, Gbm) or (beta == 0 and cfg.model.constant_rate)
    rows = []
    need_curve = "analytic" in cfg.checks or "convergence" in cfg.checks
    if need_curve:
        T = cfg.horizon
        curve = growth_curve(template, [T / 4, T]) if "convergence" in cfg.checks else \
            growth_curve(template, [T])
        est = curve[-1][1]
    if "analytic" in cfg.checks:
        gap = abs(est.estimate - gp.rate)
        if exact:
            tol = 3 * est.rate_std_err
            note = "zero variance" if est.rate_std_err == 0 else "exact scheme"
            passed = gap <= tol + 1e-12
        else:
            tol = max(0.02, 3 * est.rate_std_err)
            note = "finite-horizon estimate"
            passed = gap <= tol
        rows.append(_check_row("analytic", passed, gap, tol, note))
    if "convergence" in cfg.checks:
        (t0, e0), (t1, e1) = curve[0], curve[-1]
        g0, g1 = abs(e0.estimate - gp.rate), abs(e1.estimate - gp.rate)
        allowance = 2 * math.hypot(e0.rate_std_err, e1.rate_std_err)
        rows.append(_check_row("convergence", g1 <= g0 + allowance + 1e-12, g1 - g0, allowance,
                               f"gap at T={t0:g} then T={t1:g}"))
    if "dominance" in cfg.checks:
        rep = dominance_check(cfg.model, cfg.prob, beta, cfg.samples, template)
        worst_margin = min(e.margin for e in rep.entries)
        note = f"{len(rep.entries)} points, {len(rep.violations)} violations"
        rows.append(_check_row("dominance", rep.passed, worst_margin, 0.0, note))
    ok = all(r["passed"] for r in rows)
    return rows, EXIT_OK if ok else EXIT_VERIFY


COMMANDS = {Command.RATE: cmd_rate, Command.OPTIMIZE: cmd_optimize, Command.SWEEP: cmd_sweep,
            Command.VERIFY: cmd_verify}


def run(cfg: RunConfig) -> int:
    records, code = COMMANDS[cfg.command](cfg)
    write_records(records, cfg.output_path, cfg.output_format)
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="robust-letf", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=[c.value for c in Command])
    ap.add_argument("--config", required=True, help="INI file with [problem], [model], [command]")
    ap.add_argument("--out", help="output file (default stdout)")
    ap.add_argument("--format", choices=["csv", "json"])
    ap.add_argument("--epsilon", type=float)
    ap.add_argument("--beta", type=float)
    ap.add_argument("--seed", type=int)
    ap.add_argument("--paths", type=int)
    ap.add_argument("--dt", type=float)
    ap.add_argument("--horizon", type=float)
    ap.add_argument("--candidates", action="store_true", help="list every evaluated candidate")
    ap.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.set)
    flag_keys = {"out": "output_path", "format": "output_format", "epsilon": "epsilon",
                 "beta": "beta", "seed": "seed", "paths": "paths", "dt": "dt", "horizon": "horizon"}
    for flag, key in flag_keys.items():
        value = getattr(args, flag)
        if value is not None:
            overrides.append(f"command.{key}={value}")
    if args.candidates:
        overrides.append("command.candidates=true")
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        cfg = parse_config(text, args.command, overrides)
        return run(cfg)
    except (ConstraintError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FeasibilityError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_FEASIBILITY
    except SimulationError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
