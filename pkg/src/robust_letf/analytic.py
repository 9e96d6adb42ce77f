"""Worst-case long-run growth rates Λ(β) of E[L_T^p] for each model family.

Each `*_growth` returns a GrowthPoint whose `worst` field carries the parameter
vector at which the infimum over the box is attained.
"""
from __future__ import annotations

import math
from functools import singledispatch

import numpy as np

from . import search
from .core import (
    Cir, ConstraintError, FeasibilityError, Gbm, GrowthPoint, Heston, Interval, InvGarch,
    ModelSpec, Problem, Regime, Sv32, ThreeHalves, Vasicek, WorstCase, regime_of, require_valid,
)


def mu_star(beta: float, mu: Interval) -> float:
    return mu.lo if beta >= 0 else mu.hi


def rho_star_sv(beta: float, rho: Interval) -> float:
    """Correlation selector of the stochastic-volatility models."""
    return rho.hi if beta >= 0 else rho.lo


def _quadratic_root(k, c):
    """Larger root of η² + 2kη − c = 0, i.e. −k + sqrt(k² + c), computed stably."""
    disc = k * k + c
    if np.any(np.asarray(disc) < 0):
        raise ValueError(f"negative square-root argument {disc}")
    root = np.sqrt(disc)
    if np.all(np.asarray(k) > 0):
        return c / (k + root)
    return -k + root


# --- GBM -------------------------------------------------------------------

def gbm_rate_at(mu: float, sigma: float, beta: float, p: float, r: float) -> float:
    """Growth rate for known (μ, σ)."""
    return p * r + p * (mu - r) * beta - 0.5 * p * (1 - p) * sigma**2 * beta**2


def gbm_growth(model: Gbm, prob: Problem, beta: float) -> GrowthPoint:
    require_valid(model, prob)
    mu = mu_star(beta, model.mu)
    sigma = model.sigma.hi
    rate = gbm_rate_at(mu, sigma, beta, prob.p, prob.r)
    worst = WorstCase({"mu": mu, "sigma": sigma}, regime_of(beta))
    return GrowthPoint(beta, rate, worst)


# --- CIR and 3/2 reference ----------------------------------------------------

def cir_eta(b: float, sigma: float, beta: float, p: float) -> float:
    return float(_quadratic_root(b / sigma**2 - 0.5, p * beta * (beta - 1)))


def threehalves_eta(a: float, sigma: float, beta: float, p: float) -> float:
    if not (a > 0 and sigma > 0):
        raise ConstraintError("threehalves_eta needs a > 0 and sigma > 0")
    return float(_quadratic_root(a / sigma**2 + 0.5, p * beta * (beta - 1)))


def cir_rate_at(b: float, a: float, sigma: float, beta: float, p: float, r: float) -> float:
    return -p * r * (beta - 1) - a * cir_eta(b, sigma, beta, p)


def threehalves_rate_at(b: float, a: float, sigma: float, beta: float, p: float, r: float) -> float:
    return -p * r * (beta - 1) - b * threehalves_eta(a, sigma, beta, p)


def cir_worst(model: Cir, beta: float) -> dict[str, float]:
    if beta >= 1 or beta < 0:
        return {"b": model.b.lo, "a": model.a.hi, "sigma": model.sigma.hi}
    return {"b": model.b.hi, "a": model.a.lo, "sigma": model.sigma.lo}


def threehalves_worst(model: ThreeHalves, beta: float) -> dict[str, float]:
    if beta >= 1 or beta < 0:
        return {"b": model.b.hi, "a": model.a.lo, "sigma": model.sigma.hi}
    return {"b": model.b.lo, "a": model.a.hi, "sigma": model.sigma.lo}


def cir_growth(model: Cir, prob: Problem, beta: float) -> GrowthPoint:
    require_valid(model, prob)
    w = cir_worst(model, beta)
    p = prob.p
    eta = cir_eta(w["b"], w["sigma"], beta, p)
    worst = WorstCase(w, regime_of(beta), inner_argmax={"eta": eta})
    side = 2 * w["b"] / w["sigma"] ** 2 + eta + p * beta
    if not side > 0:
        return GrowthPoint(beta, None, worst, False,
                           f"2b/sigma^2 + eta + p*beta = {side:.6g} <= 0")
    return GrowthPoint(beta, -p * prob.r * (beta - 1) - w["a"] * eta, worst)


def threehalves_growth(model: ThreeHalves, prob: Problem, beta: float) -> GrowthPoint:
    require_valid(model, prob)
    w = threehalves_worst(model, beta)
    p = prob.p
    eta = threehalves_eta(w["a"], w["sigma"], beta, p)
    worst = WorstCase(w, regime_of(beta), inner_argmax={"eta": eta})
    side = 2 * (w["a"] / w["sigma"] ** 2 + 1) + eta - p * beta
    if not side > 0:
        return GrowthPoint(beta, None, worst, False,
                           f"2(a/sigma^2 + 1) + eta - p*beta = {side:.6g} <= 0")
    return GrowthPoint(beta, -p * prob.r * (beta - 1) - w["b"] * eta, worst)


# --- stochastic volatility: Heston and 3/2 volatility -------------------------

def _sv_eta(sigma, beta, p, rho_star, core):
    # (sqrt(A^2 + y) - A) / sigma^2 with y = p(1-p)β²σ², written as y / (σ²(S + A))
    y = p * (1 - p) * beta**2
    return y / (np.sqrt(core * core + y * sigma**2) + core)


def heston_eta(sigma, beta: float, p: float, rho_star: float, a_lo: float):
    margin = a_lo - p * abs(beta) * np.max(sigma)
    if not margin > 0:
        raise FeasibilityError(f"a.lo - p|beta|sigma = {margin:.6g} <= 0 at beta={beta}")
    core = a_lo - p * beta * rho_star * sigma
    return _sv_eta(sigma, beta, p, rho_star, core)


def sv32_eta(sigma, beta: float, p: float, rho_star: float, a_lo: float):
    core = a_lo - p * beta * rho_star * sigma + sigma**2 / 2
    if not np.all(core > 0):
        raise FeasibilityError(f"a.lo - p*beta*rho*sigma + sigma^2/2 <= 0 at beta={beta}")
    return _sv_eta(sigma, beta, p, rho_star, core)


def _sv_margin(model, p: float, beta: float) -> tuple[float, str]:
    if isinstance(model, Heston):
        return model.a.lo - p * abs(beta) * model.sigma.hi, "a.lo - p|beta|sigma.hi"
    return (model.a.lo - p * abs(beta) * model.sigma.hi + model.sigma.lo**2 / 2,
            "a.lo - p|beta|sigma.hi + sigma.lo^2/2")


def _sigma_star(model, prob: Problem, beta: float, eta_fn, n: int = search.GRID_1D):
    margin, label = _sv_margin(model, prob.p, beta)
    if not margin > 0:
        raise FeasibilityError(f"{label} = {margin:.6g} <= 0 at beta={beta}")
    rho = rho_star_sv(beta, model.rho)
    f = lambda s: eta_fn(s, beta, prob.p, rho, model.a.lo)
    return search.maximize_1d(f, model.sigma.lo, model.sigma.hi, n)


def heston_sigma_star(box: Heston, prob: Problem, beta: float, n: int = search.GRID_1D):
    """σ in the box maximizing η, with the maximal η."""
    return _sigma_star(box, prob, beta, heston_eta, n)


def sv32_sigma_star(box: Sv32, prob: Problem, beta: float, n: int = search.GRID_1D):
    return _sigma_star(box, prob, beta, sv32_eta, n)


def _sv_growth(model, prob: Problem, beta: float, eta_fn) -> GrowthPoint:
    require_valid(model, prob)
    p, r = prob.p, prob.r
    mu = mu_star(beta, model.mu)
    rho = rho_star_sv(beta, model.rho)
    margin, label = _sv_margin(model, p, beta)
    if not margin > 0:
        worst = WorstCase({"mu": mu, "rho": rho, "b": model.b.hi, "a": model.a.lo},
                          regime_of(beta))
        return GrowthPoint(beta, None, worst, False, f"{label} = {margin:.6g} <= 0")
    sigma, eta = _sigma_star(model, prob, beta, eta_fn)
    params = {"mu": mu, "rho": rho, "b": model.b.hi, "a": model.a.lo, "sigma": sigma}
    worst = WorstCase(params, regime_of(beta), inner_argmax={"sigma": sigma, "eta": eta})
    return GrowthPoint(beta, p * (r + beta * (mu - r)) - model.b.hi * eta, worst)


def heston_growth(model: Heston, prob: Problem, beta: float) -> GrowthPoint:
    return _sv_growth(model, prob, beta, heston_eta)


def sv32_growth(model: Sv32, prob: Problem, beta: float) -> GrowthPoint:
    return _sv_growth(model, prob, beta, sv32_eta)


# --- stochastic rates: Vasicek ------------------------------------------------

def vasicek_lambda(varsigma, rho, b, a, sigma, beta: float, p: float):
    if np.any(np.asarray(a) <= 0):
        raise ConstraintError("vasicek_lambda needs a > 0")
    c = p * (beta - 1)
    return -0.5 * (c * sigma / a) ** 2 + p * c * beta * varsigma * rho * sigma / a + c * b / a


def _vasicek_rho(beta: float, rho: Interval) -> float:
    return rho.lo if 0 <= beta < 1 else rho.hi


def vasicek_worst_params(model: Vasicek, prob: Problem, beta: float,
                         grid_1d: int = search.GRID_1D, grid_2d: int = search.GRID_2D) -> WorstCase:
    """Maximize ½p(1−p)β²ς² + λ over the box via the sign-of-ρ case split."""
    require_valid(model, prob)
    p = prob.p
    q = 0.5 * p * (1 - p) * beta**2
    reg = regime_of(beta)
    rho = _vasicek_rho(beta, model.rho)
    b = model.b.hi if beta >= 1 else model.b.lo
    vs, a_iv, s_iv = model.varsigma, model.a, model.sigma

    def lam(v, r_, a, s):
        return vasicek_lambda(v, r_, b, a, s, beta, p)

    if reg is Regime.BETA_GE_1:
        case = "case1" if model.rho.hi > 0 else "case2"
    elif reg is Regime.BETA_IN_01:
        case = "case3" if model.rho.lo < 0 else "case4"
    else:
        case = "case5" if model.rho.hi > 0 else "case6"

    if case in ("case1", "case3", "case5"):
        v = vs.hi
        a, s, _ = search.maximize_2d(lambda a, s: lam(v, rho, a, s),
                                     (a_iv.lo, a_iv.hi), (s_iv.lo, s_iv.hi), grid_2d)
        inner = {"a": a, "sigma": s}
    elif case == "case2":
        s = s_iv.lo
        v, a, _ = search.maximize_2d(lambda v, a: q * v * v + lam(v, rho, a, s),
                                     (vs.lo, vs.hi), (a_iv.lo, a_iv.hi), grid_2d)
        inner = {"varsigma": v, "a": a}
    else:
        a, s = a_iv.hi, s_iv.lo
        v, _ = search.endpoint_max(lambda v: q * v * v + lam(v, rho, a, s), vs.lo, vs.hi)
        inner = {"varsigma": v}
    params = {"mu": mu_star(beta, model.mu), "varsigma": v, "rho": rho, "b": b, "a": a, "sigma": s}
    return WorstCase(params, reg, case, inner)


def _rate_model_rate(w: WorstCase, beta: float, p: float, lam_fn) -> float:
    x = w.params
    lam = lam_fn(x["varsigma"], x["rho"], x["b"], x["a"], x["sigma"], beta, p)
    return p * beta * x["mu"] - 0.5 * p * (1 - p) * beta**2 * x["varsigma"] ** 2 - lam


def vasicek_rate_at(params: dict, beta: float, p: float) -> float:
    """Growth rate for a known parameter vector."""
    return _rate_model_rate(WorstCase(params, regime_of(beta)), beta, p, vasicek_lambda)


def vasicek_growth(model: Vasicek, prob: Problem, beta: float) -> GrowthPoint:
    w = vasicek_worst_params(model, prob, beta)
    return GrowthPoint(beta, float(_rate_model_rate(w, beta, prob.p, vasicek_lambda)), w)


# --- stochastic rates: inverse GARCH --------------------------------------------

def invgarch_lambda(varsigma, rho, b_star, a_star, sigma, beta: float, p: float):
    if np.any(np.asarray(a_star) <= 0):
        raise ConstraintError("invgarch_lambda needs a > 0")
    c = p * (beta - 1)
    return (-(c / (2 * a_star)) * (c / a_star + 1) * sigma**2
            + p * c * beta * varsigma * rho * sigma / a_star + c * b_star / a_star)


def invgarch_rate_at(params: dict, beta: float, p: float) -> float:
    return _rate_model_rate(WorstCase(params, regime_of(beta)), beta, p, invgarch_lambda)


def invgarch_box_margin(model: InvGarch, p: float, beta: float) -> float:
    """b.lo − p|β|ς̄σ̄ − σ̄²/2, which must be positive."""
    return model.b.lo - p * abs(beta) * model.varsigma.hi * model.sigma.hi - model.sigma.hi**2 / 2


def invgarch_worst_params(model: InvGarch, prob: Problem, beta: float,
                          grid_1d: int = search.GRID_1D, grid_2d: int = search.GRID_2D) -> WorstCase:
    """Minimize −½p(1−p)β²ς² − λ over (ς, ρ, σ) with (b, a) fixed by β."""
    require_valid(model, prob)
    p = prob.p
    margin = invgarch_box_margin(model, p, beta)
    if not margin > 0:
        raise FeasibilityError(
            f"b.lo - p|beta|varsigma.hi*sigma.hi - sigma.hi^2/2 = {margin:.6g} <= 0 at beta={beta}")
    reg = regime_of(beta)
    if beta >= 1:
        b, a = model.b.hi, model.a.lo
    else:
        b, a = model.b.lo, model.a.hi
    rho = _vasicek_rho(beta, model.rho)
    q = 0.5 * p * (1 - p) * beta**2
    vs, s_iv = model.varsigma, model.sigma

    def obj(v, s):
        return -q * v * v - invgarch_lambda(v, rho, b, a, s, beta, p)

    if reg is Regime.BETA_GE_1:
        case = "case1" if model.rho.hi > 0 else "case2"
    elif reg is Regime.BETA_IN_01:
        case = "case3" if model.rho.lo < 0 else "case4"
    else:
        case = "case5" if model.rho.hi > 0 else "case6"

    if case in ("case1", "case3", "case5"):
        v = vs.hi
        s, _ = search.minimize_1d(lambda s: obj(v, s), s_iv.lo, s_iv.hi, grid_1d)
        inner = {"sigma": s}
    elif case == "case2":
        s = s_iv.lo
        # concave in ς, so the minimum sits at an end
        v, _ = search.endpoint_min(lambda v: obj(v, s), vs.lo, vs.hi)
        inner = {"varsigma": v}
    else:
        v, s, _ = search.minimize_2d(obj, (vs.lo, vs.hi), (s_iv.lo, s_iv.hi), grid_2d)
        inner = {"varsigma": v, "sigma": s}
    params = {"mu": mu_star(beta, model.mu), "varsigma": v, "rho": rho, "b": b, "a": a, "sigma": s}
    return WorstCase(params, reg, case, inner)


def invgarch_proviso(model: InvGarch, p: float, beta: float) -> float:
    """inf over (ς, ρ, σ) of b* + pβςρσ − p(β−1)σ²/a* − σ²; must be positive."""
    b, a = (model.b.hi, model.a.lo) if beta >= 1 else (model.b.lo, model.a.hi)
    k = p * (beta - 1) / a + 1
    best = math.inf
    for v in model.varsigma.ends():
        for rho in model.rho.ends():
            f = lambda s: b + p * beta * v * rho * s - k * s * s
            best = min(best, search.minimize_1d(f, model.sigma.lo, model.sigma.hi)[1])
    return best


def invgarch_growth(model: InvGarch, prob: Problem, beta: float) -> GrowthPoint:
    require_valid(model, prob)
    p = prob.p
    margin = invgarch_box_margin(model, p, beta)
    if not margin > 0:
        return GrowthPoint(beta, None, None, False,
                           f"b.lo - p|beta|varsigma.hi*sigma.hi - sigma.hi^2/2 = {margin:.6g} <= 0")
    w = invgarch_worst_params(model, prob, beta)
    prov = invgarch_proviso(model, p, beta)
    if not prov > 0:
        return GrowthPoint(beta, None, w, False,
                           f"inf of b + p*beta*varsigma*rho*sigma - p(beta-1)sigma^2/a - sigma^2 = {prov:.6g} <= 0")
    return GrowthPoint(beta, float(_rate_model_rate(w, beta, p, invgarch_lambda)), w)


# --- dispatch ---------------------------------------------------------------

@singledispatch
def growth(model: ModelSpec, prob: Problem, beta: float) -> GrowthPoint:
    raise TypeError(f"no growth rate for {type(model).__name__}")


growth.register(Gbm, gbm_growth)
growth.register(Cir, cir_growth)
growth.register(ThreeHalves, threehalves_growth)
growth.register(Heston, heston_growth)
growth.register(Sv32, sv32_growth)
growth.register(Vasicek, vasicek_growth)
growth.register(InvGarch, invgarch_growth)


def rate_at(model: ModelSpec, prob: Problem, beta: float, params: dict[str, float]) -> float:
    """Long-run rate for a single known parameter vector (no worst-case search).

    For the stochastic-volatility models this is the rate when σ, ρ, μ, a, b are
    all known; it dominates the worst-case rate for every vector in the box.
    """
    p, r = prob.p, prob.r
    x = params
    if isinstance(model, Gbm):
        return gbm_rate_at(x["mu"], x["sigma"], beta, p, r)
    if isinstance(model, Cir):
        return cir_rate_at(x["b"], x["a"], x["sigma"], beta, p, r)
    if isinstance(model, ThreeHalves):
        return threehalves_rate_at(x["b"], x["a"], x["sigma"], beta, p, r)
    if isinstance(model, Heston):
        core = x["a"] - p * beta * x["rho"] * x["sigma"]
        return p * (r + beta * (x["mu"] - r)) - x["b"] * float(_sv_eta(x["sigma"], beta, p, x["rho"], core))
    if isinstance(model, Sv32):
        core = x["a"] - p * beta * x["rho"] * x["sigma"] + x["sigma"] ** 2 / 2
        return p * (r + beta * (x["mu"] - r)) - x["b"] * float(_sv_eta(x["sigma"], beta, p, x["rho"], core))
    if isinstance(model, Vasicek):
        return vasicek_rate_at(x, beta, p)
    if isinstance(model, InvGarch):
        return invgarch_rate_at(x, beta, p)
    raise TypeError(type(model).__name__)
