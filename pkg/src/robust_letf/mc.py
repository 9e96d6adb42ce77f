"""Monte-Carlo estimates of (1/T) log E[L_T^p] for one fixed parameter vector.

Paths are simulated in fixed-size blocks. Block j draws from a Philox stream keyed
by (seed, j), so results do not depend on how many worker threads run the blocks.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .analytic import growth, rate_at
from .core import (
    Cir, ConstraintError, Gbm, Heston, InvGarch, McEstimate, ModelSpec, Problem, Sv32,
    ThreeHalves, Vasicek, require_valid,
)

log = logging.getLogger(__name__)

BLOCK = 4096
MAX_NONFINITE_FRACTION = 1e-3


class SimulationError(RuntimeError):
    pass


class SimScheme(str, Enum):
    EXACT_GBM = "ExactGbm"
    FULL_TRUNCATION_EULER = "FullTruncationEuler"
    EXACT_OU = "ExactOu"
    LOG_EULER_INVERSE = "LogEulerInverse"


SCHEME_FOR = {
    Gbm: SimScheme.EXACT_GBM,
    Cir: SimScheme.FULL_TRUNCATION_EULER,
    ThreeHalves: SimScheme.FULL_TRUNCATION_EULER,
    Heston: SimScheme.FULL_TRUNCATION_EULER,
    Sv32: SimScheme.FULL_TRUNCATION_EULER,
    Vasicek: SimScheme.EXACT_OU,
    InvGarch: SimScheme.LOG_EULER_INVERSE,
}


@dataclass(frozen=True)
class SimRequest:
    model: ModelSpec
    prob: Problem
    beta: float
    horizon_T: float
    dt: float = 1 / 500
    n_paths: int = 100_000
    seed: int = 0
    scheme: SimScheme | None = None
    antithetic: bool = False
    substeps: int = 1  # ExactGbm only: normal increments per horizon segment
    v0: float | None = None  # initial variance (Heston, Sv32); long-run level by default

    def __post_init__(self):
        if self.scheme is None:
            object.__setattr__(self, "scheme", SCHEME_FOR[type(self.model)])
        else:
            object.__setattr__(self, "scheme", SimScheme(self.scheme))

    def validate(self) -> None:
        require_valid(self.model, self.prob)
        problems = []
        if not self.model.degenerate:
            problems.append("all model intervals must be degenerate")
        if self.scheme is not SCHEME_FOR[type(self.model)]:
            problems.append(f"scheme {self.scheme.value} does not apply to {self.model.family}")
        if not (self.dt > 0 and self.dt <= self.horizon_T):
            problems.append("need 0 < dt <= horizon_T")
        if self.n_paths < 100:
            problems.append("n_paths >= 100")
        if self.antithetic and self.n_paths % 2:
            problems.append("antithetic sampling needs an even n_paths")
        if self.substeps < 1:
            problems.append("substeps >= 1")
        if problems:
            raise ConstraintError("; ".join(problems))

    def at_params(self, params: dict[str, float]) -> "SimRequest":
        return replace(self, model=self.model.at(**params))


def _threads() -> int:
    n = int(os.environ.get("LETF_THREADS", "0") or 0)
    return n if n > 0 else (os.cpu_count() or 1)


def _normals(rng: np.random.Generator, k: int, m: int, antithetic: bool) -> np.ndarray:
    if not antithetic:
        return rng.standard_normal((k, m))
    half = rng.standard_normal((k, m // 2))
    return np.concatenate([half, -half], axis=1)


def _step_counts(horizons: Sequence[float], dt: float) -> list[int]:
    return [max(1, int(round(T / dt))) for T in horizons]


# --- path kernels: each returns log L at the requested step counts -----------------

def _gbm_paths(x, prob, beta, horizons, dt, substeps, rng, m, anti):
    p, r = prob.p, prob.r
    drift = beta * x["mu"] - (beta - 1) * r - 0.5 * beta**2 * x["sigma"] ** 2
    vol = beta * x["sigma"]
    out = np.empty((len(horizons), m))
    logl = np.zeros(m)
    t = 0.0
    for i, T in enumerate(horizons):
        h = (T - t) / substeps
        for _ in range(substeps):
            z = _normals(rng, 1, m, anti)[0]
            logl = logl + drift * h + vol * math.sqrt(h) * z
        t = T
        out[i] = logl
    return out


def _inverse_cir_step(z, kappa_theta, kappa, sigma, h, dw):
    """Full-truncation Euler step of dZ = (κθ − κZ)dt − σ√Z dB."""
    zp = np.maximum(z, 0.0)
    return z + (kappa_theta - kappa * zp) * h - sigma * np.sqrt(zp) * dw


def _reference_paths(x, prob, beta, steps, h, rng, m, anti, three_halves: bool):
    """CIR or 3/2 reference index X; log L from the exact identity

    log L_T = β log X_T − (β−1) r T − ½ β(β−1) ∫ σ_t² dt,

    with σ_t² = σ²/X (CIR) or σ²X (3/2) and the integral by the trapezoid rule.
    """
    b, a, s, r = x["b"], x["a"], x["sigma"], prob.r
    sqh = math.sqrt(h)
    state = np.ones(m)  # X for CIR, Z = 1/X for 3/2; X_0 = 1 in both cases
    var_prev = np.full(m, s * s)
    integral = np.zeros(m)
    out = np.empty((len(steps), m))
    want = {n: i for i, n in enumerate(steps)}
    c_log, c_int = beta, 0.5 * beta * (beta - 1)
    for n in range(1, steps[-1] + 1):
        dw = sqh * _normals(rng, 1, m, anti)[0]
        if three_halves:
            # 1/X is CIR: dZ = (a + σ² − bZ)dt − σ√Z dB
            state = _inverse_cir_step(state, a + s * s, b, s, h, dw)
            pos = np.maximum(state, 0.0)
            with np.errstate(divide="ignore"):
                var_now = s * s / pos
        else:
            xp = np.maximum(state, 0.0)
            state = state + (b - a * xp) * h + s * np.sqrt(xp) * dw
            pos = np.maximum(state, 0.0)
            with np.errstate(divide="ignore"):
                var_now = s * s / pos
        if c_int:
            integral += 0.5 * (var_prev + var_now) * h
        var_prev = var_now
        if n in want:
            with np.errstate(divide="ignore"):
                log_x = -np.log(pos) if three_halves else np.log(pos)
            val = -(beta - 1) * r * n * h
            if c_log:
                val = val + c_log * log_x
            if c_int:
                val = val - c_int * integral
            out[want[n]] = val
    return out


def _sv_paths(x, prob, beta, steps, h, rng, m, anti, v0, three_halves: bool):
    """Heston (variance by full truncation) or 3/2 volatility (1/variance as CIR)."""
    mu, rho, b, a, s, r = x["mu"], x["rho"], x["b"], x["a"], x["sigma"], prob.r
    sqh = math.sqrt(h)
    perp = math.sqrt(max(0.0, 1 - rho * rho))
    if three_halves:
        state = np.full(m, 1.0 / v0)
    else:
        state = np.full(m, v0)
    logl = np.zeros(m)
    out = np.empty((len(steps), m))
    want = {n: i for i, n in enumerate(steps)}
    drift0 = beta * mu - (beta - 1) * r
    for n in range(1, steps[-1] + 1):
        z = _normals(rng, 2, m, anti)
        dw = sqh * z[0]
        db = rho * dw + perp * sqh * z[1]
        if three_halves:
            pos = np.maximum(state, 0.0)
            with np.errstate(divide="ignore"):
                var = 1.0 / pos
            state = _inverse_cir_step(state, a + s * s, b, s, h, db)
        else:
            var = np.maximum(state, 0.0)
            state = state + (b - a * var) * h + s * np.sqrt(var) * db
        with np.errstate(invalid="ignore"):
            logl = logl + (drift0 - 0.5 * beta**2 * var) * h + beta * np.sqrt(var) * dw
        if n in want:
            out[want[n]] = logl
    return out


def _rate_paths(x, prob, beta, steps, h, rng, m, anti, r0, inverse_garch: bool):
    """Vasicek (exact OU transition) or inverse GARCH (1/r by its explicit linear-SDE solution)."""
    mu, vs, rho, b, a, s = x["mu"], x["varsigma"], x["rho"], x["b"], x["a"], x["sigma"]
    sqh = math.sqrt(h)
    perp = math.sqrt(max(0.0, 1 - rho * rho))
    rate = np.full(m, r0)
    logl = np.zeros(m)
    out = np.empty((len(steps), m))
    want = {n: i for i, n in enumerate(steps)}
    drift0 = beta * mu - 0.5 * beta**2 * vs**2
    if not inverse_garch:
        e = math.exp(-a * h)
        mean_add = (b / a) * (1 - e)
        var_eps = s * s * (1 - e * e) / (2 * a)
        cov = rho * s * (1 - e) / a
        load = cov / h
        resid = math.sqrt(max(var_eps - cov * cov / h, 0.0))
    else:
        inv = 1.0 / rate
    for n in range(1, steps[-1] + 1):
        z = _normals(rng, 2, m, anti)
        dw = sqh * z[0]
        if inverse_garch:
            db = rho * dw + perp * sqh * z[1]
            g = np.exp(-(b - 0.5 * s * s) * h - s * db)
            inv = g * inv + a * h * 0.5 * (g + 1.0)
            new = 1.0 / inv
        else:
            new = rate * e + mean_add + load * dw + resid * z[1]
        logl = logl + drift0 * h - (beta - 1) * 0.5 * (rate + new) * h + beta * vs * dw
        rate = new
        if n in want:
            out[want[n]] = logl
    return out


def _default_v0(model: ModelSpec, x: dict[str, float]) -> float:
    if isinstance(model, Heston):
        return x["b"] / x["a"]
    # stationary mean of 1/ν is (a + σ²)/b
    return x["b"] / (x["a"] + x["sigma"] ** 2)


def _block_log_wealth(req: SimRequest, horizons: Sequence[float], block: int, m: int) -> np.ndarray:
    """p·log L at each horizon for one block of m paths."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(req.seed, spawn_key=(block,))))
    x = req.model.point_values()
    prob, beta, anti = req.prob, req.beta, req.antithetic
    model = req.model
    if isinstance(model, Gbm):
        logl = _gbm_paths(x, prob, beta, horizons, req.dt, req.substeps, rng, m, anti)
    else:
        steps = _step_counts(horizons, req.dt)
        h = horizons[-1] / steps[-1]
        if isinstance(model, (Cir, ThreeHalves)):
            logl = _reference_paths(x, prob, beta, steps, h, rng, m, anti,
                                    isinstance(model, ThreeHalves))
        elif isinstance(model, (Heston, Sv32)):
            v0 = req.v0 if req.v0 is not None else _default_v0(model, x)
            logl = _sv_paths(x, prob, beta, steps, h, rng, m, anti, v0, isinstance(model, Sv32))
        else:
            logl = _rate_paths(x, prob, beta, steps, h, rng, m, anti, model.r0,
                               isinstance(model, InvGarch))
    return prob.p * logl


def _block_sizes(n: int) -> list[int]:
    sizes = [BLOCK] * (n // BLOCK)
    if n % BLOCK:
        sizes.append(n % BLOCK)
    return sizes


def _check_horizons(req: SimRequest, horizons: Sequence[float]) -> list[float]:
    hs = [float(T) for T in horizons]
    if not hs or any(b <= a for a, b in zip(hs, hs[1:])):
        raise ConstraintError("horizons must be increasing")
    if hs[0] < req.dt:
        raise ConstraintError("each horizon must be >= dt")
    if not isinstance(req.model, Gbm):
        steps = _step_counts(hs, req.dt)
        h = hs[-1] / steps[-1]
        for T, n in zip(hs, steps):
            if abs(n * h - T) > 1e-9 * max(1.0, T):
                raise ConstraintError(f"horizon {T} is not a multiple of the step {h}")
    return hs


def sample_log_wealth(req: SimRequest, horizons: Sequence[float] | None = None) -> np.ndarray:
    """p·log L_T per path, shape (len(horizons), n_paths)."""
    req.validate()
    hs = _check_horizons(req, horizons if horizons is not None else [req.horizon_T])
    sizes = _block_sizes(req.n_paths)
    if req.antithetic and any(s % 2 for s in sizes):
        raise ConstraintError("antithetic sampling needs even block sizes")
    jobs = list(enumerate(sizes))
    workers = min(_threads(), len(jobs))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda j: _block_log_wealth(req, hs, *j), jobs))
    else:
        parts = [_block_log_wealth(req, hs, *j) for j in jobs]
    return np.concatenate(parts, axis=1)


def _pair_means(w: np.ndarray, sizes: Sequence[int]) -> np.ndarray:
    """Average each path with its antithetic partner (second half of its block)."""
    out, start = [], 0
    for s in sizes:
        blk = w[start:start + s]
        out.append(0.5 * (blk[: s // 2] + blk[s // 2:]))
        start += s
    return np.concatenate(out)


def estimate_from_samples(xs: np.ndarray, req: SimRequest, T: float) -> McEstimate:
    """Rate estimate from p·log L_T samples, using a max-shift for stability."""
    finite = np.isfinite(xs)
    bad = int(xs.size - finite.sum())
    if bad > MAX_NONFINITE_FRACTION * xs.size:
        raise SimulationError(f"{bad} of {xs.size} paths are non-finite")
    if bad:
        log.warning("%d non-finite paths dropped", bad)
    shift = float(np.max(xs[finite]))
    w = np.where(finite, np.exp(xs - shift), np.nan)
    if req.antithetic and not bad:
        units = _pair_means(w, _block_sizes(req.n_paths))
    else:
        units = w[finite]
    n = units.size
    mean_w = math.fsum(units) / n
    sd = float(np.std(units, ddof=1)) if n > 1 else 0.0
    se_w = sd / math.sqrt(n)
    log_mean = shift + math.log(mean_w)
    log.debug("max p*log L_T = %.6g", shift)
    return McEstimate(
        horizon_T=T, n_paths=req.n_paths, dt=req.dt, scheme=req.scheme.value, seed=req.seed,
        estimate=log_mean / T, std_err_of_mean=math.exp(shift) * se_w, log_mean=log_mean,
        rate_std_err=se_w / (mean_w * T), antithetic=req.antithetic, n_nonfinite=bad,
        max_log_weight=shift,
    )


def growth_curve(req: SimRequest, horizons: Sequence[float]) -> list[tuple[float, McEstimate]]:
    """Estimates at several horizons from the same simulated paths."""
    xs = sample_log_wealth(req, horizons)
    return [(float(T), estimate_from_samples(xs[i], req, float(T))) for i, T in enumerate(horizons)]


def simulate_utility(req: SimRequest) -> McEstimate:
    return growth_curve(req, [req.horizon_T])[0][1]


# --- worst-case dominance ------------------------------------------------------------

@dataclass(frozen=True)
class DominanceEntry:
    params: dict[str, float]
    estimate: float
    rate_std_err: float
    slack: float
    margin: float  # estimate − (worst rate − slack); negative means a violation

    @property
    def ok(self) -> bool:
        return self.margin >= 0


@dataclass(frozen=True)
class DominanceReport:
    beta: float
    worst_rate: float
    horizon_T: float
    entries: list[DominanceEntry] = field(default_factory=list)

    @property
    def violations(self) -> list[DominanceEntry]:
        return [e for e in self.entries if not e.ok]

    @property
    def passed(self) -> bool:
        return not self.violations


def finite_horizon_allowance(T: float) -> float:
    return 5.0 / T


def dominance_check(model: ModelSpec, prob: Problem, beta: float, n_samples: int,
                    sim: SimRequest, sample_seed: int = 0) -> DominanceReport:
    """Simulate corners plus uniform samples of the box; each must not fall below the worst rate."""
    gp = growth(model, prob, beta)
    if not gp.feasible:
        raise ConstraintError(f"analytic rate unavailable at beta={beta}: {gp.feasibility_note}")
    rng = np.random.default_rng(sample_seed)
    box = model.box()
    points = model.corners()
    for _ in range(n_samples):
        points.append({k: float(rng.uniform(iv.lo, iv.hi)) for k, iv in box.items()})
    allowance = finite_horizon_allowance(sim.horizon_T)
    entries = []
    for pt in points:
        req = replace(sim, model=model.at(**pt), prob=prob, beta=beta)
        est = simulate_utility(req)
        slack = max(0.02, 3 * est.rate_std_err) + allowance
        entries.append(DominanceEntry(pt, est.estimate, est.rate_std_err, slack,
                                      est.estimate - (gp.rate - slack)))
    return DominanceReport(beta, gp.rate, sim.horizon_T, entries)


def analytic_rate_for(req: SimRequest) -> float:
    """Long-run rate at the request's single parameter vector."""
    return rate_at(req.model, req.prob, req.beta, req.model.point_values())
