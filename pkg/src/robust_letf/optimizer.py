"""Optimal leverage: closed form (GBM), candidate sets (CIR, 3/2), certified grid (others)."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import search
from .analytic import (
    cir_worst, gbm_growth, growth, threehalves_worst, cir_growth, threehalves_growth,
)
from .core import (
    Cir, FeasibilityError, Gbm, Heston, Interval, InvGarch, Method, ModelSpec, OptimalLeverage,
    Problem, Sv32, ThreeHalves, Vasicek, best_candidate, require_valid,
)

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 0.01
SAFETY = 1.1  # inflation for sup bounds taken from a sampled grid


@dataclass(frozen=True)
class CertifiedGridConfig:
    epsilon: float
    mesh: float
    lipschitz_M: float
    beta_range: Interval

    def __post_init__(self):
        if not self.mesh > 0:
            raise ValueError("mesh must be positive")
        if self.mesh > self.epsilon / self.lipschitz_M * (1 + 1e-12):
            raise ValueError("mesh exceeds epsilon / M")

    def grid(self) -> np.ndarray:
        lo, hi = self.beta_range.lo, self.beta_range.hi
        n = max(1, math.ceil((hi - lo) / self.mesh - 1e-9))
        return np.linspace(lo, hi, n + 1)

    @classmethod
    def build(cls, epsilon: float, M: float, beta_range: Interval, divisor: int = 1):
        lo, hi = beta_range.lo, beta_range.hi
        n = max(1, math.ceil((hi - lo) * M / epsilon - 1e-9)) * divisor
        return cls(epsilon, (hi - lo) / n, M, beta_range)


# --- GBM ----------------------------------------------------------------------

def optimal_beta_gbm(model: Gbm, prob: Problem) -> OptimalLeverage:
    require_valid(model, prob)
    p, r = prob.p, prob.r
    s2 = model.sigma.hi**2
    br = prob.beta_range
    if model.mu.hi < r:
        beta = (model.mu.hi - r) / ((1 - p) * s2)
    elif model.mu.lo > r:
        beta = (model.mu.lo - r) / ((1 - p) * s2)
    else:
        beta = 0.0
    beta = min(max(beta, br.lo), br.hi)
    rate = gbm_growth(model, prob, beta).rate
    return OptimalLeverage(beta, rate, Method.CLOSED_FORM, 0.0, ((beta, rate),))


# --- CIR and 3/2: candidate sets ----------------------------------------------

def _critical_beta(k2: float, m: float, p: float, r: float) -> float | None:
    """Stationary point of −pr(β−1) − m·η(β), η the root with linear coefficient k2.

    Solves (2β−1)·m = −r·sqrt(k2² + 4pβ(β−1)); None when there is no real solution.
    """
    if r == 0:
        return 0.5
    ratio2 = (m / r) ** 2
    if ratio2 <= p:
        return None
    u = math.sqrt((k2 * k2 - p) / (ratio2 - p))
    return 0.5 * (1 - math.copysign(u, r))


def _region_params(kind: str, model, beta_in_region: float) -> tuple[float, float]:
    """(k2, m) for the worst-case parameters of the regime containing the given β."""
    if kind == "cir":
        w = cir_worst(model, beta_in_region)
        return 2 * w["b"] / w["sigma"] ** 2 - 1, w["a"]
    w = threehalves_worst(model, beta_in_region)
    return 2 * w["a"] / w["sigma"] ** 2 + 1, w["b"]


def _candidate_set(kind: str, model, prob: Problem) -> tuple[list[float], list[str]]:
    """Region ends plus each region's interior stationary point.

    Λ is concave inside each of the three regimes, so its max over a regime is
    either the stationary point (when it falls inside) or a regime end.
    """
    lo, hi = prob.beta_range.lo, prob.beta_range.hi
    cands = {lo: "beta_lo", 0.0: "regime end", 1.0: "regime end", hi: "beta_hi"}
    regions = (("beta<0", -1.0, lo, 0.0), ("0<=beta<1", 0.5, 0.0, 1.0), ("beta>=1", 2.0, 1.0, hi))
    for label, probe, a, b in regions:
        k2, m = _region_params(kind, model, probe)
        bc = _critical_beta(k2, m, prob.p, prob.r)
        if bc is not None and a < bc < b:
            cands.setdefault(bc, f"stationary point in {label}")
    betas = sorted(cands)
    return betas, [cands[b] for b in betas]


def _run_candidates(kind: str, model, prob: Problem, rate_fn) -> OptimalLeverage:
    require_valid(model, prob)
    betas, origin = _candidate_set(kind, model, prob)
    feasible, skipped = [], []
    for beta in betas:
        gp = rate_fn(model, prob, beta)
        if gp.feasible:
            feasible.append((beta, gp.rate))
        else:
            skipped.append((beta, gp.feasibility_note))
    if not feasible:
        raise FeasibilityError("all candidates infeasible: " + "; ".join(n for _, n in skipped))
    b_star, r_star = best_candidate(feasible)
    note = ", ".join(f"{b:.6g} ({o})" for b, o in zip(betas, origin))
    return OptimalLeverage(b_star, r_star, Method.CANDIDATE_TABLE, 0.0, tuple(feasible),
                           tuple(skipped), note)


def candidates_cir(model: Cir, prob: Problem) -> OptimalLeverage:
    return _run_candidates("cir", model, prob, cir_growth)


def candidates_32(model: ThreeHalves, prob: Problem) -> OptimalLeverage:
    return _run_candidates("32", model, prob, threehalves_growth)


# --- Lipschitz bounds ---------------------------------------------------------

def _sv_eta_beta(sigma, beta, p, rho, core):
    """∂η/∂β for the stochastic-volatility η with core term A (A depends on β via −pβρσ)."""
    S = np.sqrt(core * core + p * (1 - p) * beta**2 * sigma**2)
    return (p / sigma) * ((-rho * core + (1 - p) * beta * sigma) / S + rho)


def _drift_slope(model, prob: Problem) -> float:
    return prob.p * max(abs(model.mu.hi - prob.r), abs(model.mu.lo - prob.r))


def lipschitz_M_heston(model: Heston, prob: Problem) -> float:
    require_valid(model, prob)
    p = prob.p
    br = prob.beta_range
    worst_beta = max(abs(br.lo), abs(br.hi))
    margin = model.a.lo - p * worst_beta * model.sigma.hi
    if not margin > 0:
        raise FeasibilityError(f"a.lo - p|beta|sigma.hi = {margin:.6g} <= 0 over the beta range")
    a = model.a.lo

    def slope(s):
        lo_side = -_sv_eta_beta(s, br.lo, p, model.rho.lo, a - p * br.lo * model.rho.lo * s)
        hi_side = _sv_eta_beta(s, br.hi, p, model.rho.hi, a - p * br.hi * model.rho.hi * s)
        return np.maximum(lo_side, hi_side)

    _, sup = search.maximize_1d(slope, model.sigma.lo, model.sigma.hi)
    return _drift_slope(model, prob) + model.b.hi * sup


def _lambda_slope_vasicek(v, rho, b, a, s, beta, p):
    return -p**2 * (beta - 1) * s**2 / a**2 + p**2 * (2 * beta - 1) * v * rho * s / a + p * b / a


def _lambda_slope_invgarch(v, rho, b, a, s, beta, p):
    return (-(p / (2 * a)) * s**2 * (2 * p * (beta - 1) / a + 1)
            + p**2 * (2 * beta - 1) * v * rho * s / a + p * b / a)


def lipschitz_M_vasicek(model: Vasicek, prob: Problem, n: int = 64) -> float:
    require_valid(model, prob)
    p = prob.p
    br = prob.beta_range
    base = p * model.mu.hi + p * (1 - p) * model.varsigma.hi**2 * max(abs(br.lo), br.hi)
    betas = np.linspace(br.lo, br.hi, n)
    a_g = np.linspace(model.a.lo, model.a.hi, n)[:, None, None]
    s_g = np.linspace(model.sigma.lo, model.sigma.hi, n)[None, :, None]
    b_g = betas[None, None, :]
    sup, arg = -1.0, None
    for v in model.varsigma.ends():
        for rho in model.rho.ends():
            for b in model.b.ends():
                vals = np.abs(_lambda_slope_vasicek(v, rho, b, a_g, s_g, b_g, p))
                k = int(np.argmax(vals))
                if vals.flat[k] > sup:
                    sup = float(vals.flat[k])
                    arg = (v, rho, b, betas[np.unravel_index(k, vals.shape)[2]])
    # the slope is affine in β, so the sup sits at a β end; polish (a, σ) there
    v, rho, b, _ = arg
    for beta in (br.lo, br.hi):
        f = lambda a, s: np.abs(_lambda_slope_vasicek(v, rho, b, a, s, beta, p))
        _, _, val = search.maximize_2d(f, (model.a.lo, model.a.hi),
                                       (model.sigma.lo, model.sigma.hi), n)
        sup = max(sup, val)
    return base + sup


def lipschitz_M_sv32(model: Sv32, prob: Problem, n_sigma: int = 257, n_beta: int = 2001) -> float:
    require_valid(model, prob)
    p = prob.p
    br = prob.beta_range
    betas = np.linspace(br.lo, br.hi, n_beta)
    rhos = np.where(betas >= 0, model.rho.hi, model.rho.lo)
    s = np.linspace(model.sigma.lo, model.sigma.hi, n_sigma)[:, None]
    core = model.a.lo - p * betas * rhos * s + s**2 / 2
    ok = np.all(core > 0, axis=0)
    if not ok.any():
        raise FeasibilityError("3/2-volatility proviso fails on the whole beta range")
    slope = np.abs(_sv_eta_beta(s, betas, p, rhos, core))[:, ok]
    return _drift_slope(model, prob) + SAFETY * model.b.hi * float(slope.max())


def lipschitz_M_invgarch(model: InvGarch, prob: Problem, n_sigma: int = 257,
                         n_beta: int = 401) -> float:
    require_valid(model, prob)
    p = prob.p
    br = prob.beta_range
    base = p * model.mu.hi + p * (1 - p) * model.varsigma.hi**2 * max(abs(br.lo), br.hi)
    betas = np.linspace(br.lo, br.hi, n_beta)[None, :]
    s = np.linspace(model.sigma.lo, model.sigma.hi, n_sigma)[:, None]
    sup = 0.0
    for v in model.varsigma.ends():
        for rho in model.rho.ends():
            for b in model.b.ends():
                for a in model.a.ends():
                    vals = np.abs(_lambda_slope_invgarch(v, rho, b, a, s, betas, p))
                    sup = max(sup, float(vals.max()))
    return base + SAFETY * sup


def lipschitz_M(model: ModelSpec, prob: Problem) -> float:
    if isinstance(model, Heston):
        return lipschitz_M_heston(model, prob)
    if isinstance(model, Vasicek):
        return lipschitz_M_vasicek(model, prob)
    if isinstance(model, Sv32):
        return lipschitz_M_sv32(model, prob)
    if isinstance(model, InvGarch):
        return lipschitz_M_invgarch(model, prob)
    raise TypeError(f"no Lipschitz bound for {type(model).__name__}")


# --- certified grid -------------------------------------------------------------

def optimize_beta_grid(model: ModelSpec, prob: Problem, epsilon: float = DEFAULT_EPSILON,
                       divisor: int = 1, M: float | None = None) -> OptimalLeverage:
    """Grid argmax of Λ with mesh ≤ ε/M, so the max is within ε of the true max.

    `divisor` subdivides the certified mesh further. A caller-supplied M must be
    at least the model's own bound; it lets several boxes share one β grid.
    """
    if isinstance(model, Gbm):
        raise TypeError("GBM has a closed-form optimum; use optimal_beta_gbm")
    if not isinstance(model, (Heston, Sv32, Vasicek, InvGarch)):
        raise TypeError(f"certified grid applies to Heston, Sv32, Vasicek, InvGarch; "
                        f"got {type(model).__name__}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    require_valid(model, prob)
    own = lipschitz_M(model, prob)
    if M is None:
        M = own
    elif M < own:
        raise ValueError(f"supplied M={M} is below the certified bound {own}")
    cfg = CertifiedGridConfig.build(epsilon, M, prob.beta_range, divisor)
    feasible, skipped = [], []
    for beta in cfg.grid():
        gp = growth(model, prob, float(beta))
        if gp.feasible:
            feasible.append((float(beta), gp.rate))
        else:
            skipped.append((float(beta), gp.feasibility_note))
    if not feasible:
        raise FeasibilityError("no feasible grid point: " + (skipped[0][1] if skipped else ""))
    if skipped:
        log.info("skipped %d infeasible grid points", len(skipped))
    b_star, r_star = best_candidate(feasible)
    return OptimalLeverage(b_star, r_star, Method.CERTIFIED_GRID, epsilon, tuple(feasible),
                           tuple(skipped), lipschitz_M=M, mesh=cfg.mesh)


def optimize(model: ModelSpec, prob: Problem, epsilon: float = DEFAULT_EPSILON) -> OptimalLeverage:
    """Pick the method matching the model family."""
    if isinstance(model, Gbm):
        return optimal_beta_gbm(model, prob)
    if isinstance(model, Cir):
        return candidates_cir(model, prob)
    if isinstance(model, ThreeHalves):
        return candidates_32(model, prob)
    return optimize_beta_grid(model, prob, epsilon)
