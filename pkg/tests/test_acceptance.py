"""Acceptance criteria, one PASS/FAIL line each.

Run with pytest (`pytest tests/test_acceptance.py -s`) or directly as a script
(`python3 tests/test_acceptance.py`).
"""
import math
import sys
import time
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).parent))

from conftest import HESTON_BOX, VASICEK_BOX, random_cir, random_problem, random_threehalves  # noqa: E402

from robust_letf import Cir, Gbm, Heston, Problem, ThreeHalves, Vasicek  # noqa: E402
from robust_letf import analytic as an  # noqa: E402
from robust_letf import cli, mc  # noqa: E402
from robust_letf.optimizer import (  # noqa: E402
    candidates_32, candidates_cir, lipschitz_M, optimize, optimize_beta_grid,
)


def _line(n, title, passed, detail):
    return f"{'PASS' if passed else 'FAIL'}  criterion {n}: {title} | {detail}"


# --- 1. Heston experiment ------------------------------------------------------------

def criterion_1():
    t0 = time.perf_counter()
    opt = optimize(Heston(**HESTON_BOX), Problem(0.5, 0.015, (-5, 5)), 0.01)
    secs = time.perf_counter() - t0
    ok = abs(opt.beta_star - 1.25) <= 0.05 and abs(opt.rate_star - 0.0179) <= 0.01 and secs < 10
    return ok, (f"beta*={opt.beta_star:.4f} (1.25±0.05) rate*={opt.rate_star:.5f} (0.0179±0.01) "
                f"time={secs:.2f}s (<10)")


# --- 2. Vasicek experiment -----------------------------------------------------------

def criterion_2():
    t0 = time.perf_counter()
    opt = optimize(Vasicek(**VASICEK_BOX), Problem(0.5, None, (-5, 5)), 0.01)
    secs = time.perf_counter() - t0
    ok = abs(opt.beta_star - 1.7) <= 0.1 and abs(opt.rate_star - 0.025) <= 0.01 and secs < 30
    return ok, (f"beta*={opt.beta_star:.4f} (1.7±0.1) rate*={opt.rate_star:.5f} (0.025±0.01) "
                f"time={secs:.2f}s (<30)")


# --- 3. Heston monotonicity scans ---------------------------------------------------

def _scan_table(model, axis, lo, hi, n):
    cfg = cli.RunConfig(model=model, prob=Problem(0.5, 0.015, (-5, 5)), command=cli.Command.SWEEP,
                        scan_axis=axis, scan_values=(lo, hi, n))
    rows, code = cli.cmd_sweep(cfg)
    assert code == cli.EXIT_OK
    return [r["value"] for r in rows], [r["beta_star"] for r in rows]


def criterion_3():
    _, up = _scan_table(Heston(**{**HESTON_BOX, "sigma": (0.5, 1.0)}), "sigma_lo", 0.5, 0.93, 12)
    _, down = _scan_table(Heston(**{**HESTON_BOX, "rho": (-1.0, -0.5)}), "rho_hi", -1.0, -0.5, 11)
    inc = all(b >= a for a, b in zip(up, up[1:]))
    dec = all(b <= a for a, b in zip(down, down[1:]))
    return inc and dec, (f"sigma_lo scan beta* {up[0]:.3f}->{up[-1]:.3f} nondecreasing={inc}; "
                         f"rho_hi scan beta* {down[0]:.3f}->{down[-1]:.3f} nonincreasing={dec}")


# --- 4. GBM exactness ---------------------------------------------------------------------

def criterion_4():
    rng = np.random.default_rng(2024)
    prob = Problem(0.5, 0.02, (-5, 5))
    hits = {b: 0 for b in (-2.0, 0.5, 2.0)}
    zero_exact = True
    for i in range(20):
        mu = tuple(sorted(rng.uniform(0.01, 0.12, 2)))
        sg = tuple(sorted(rng.uniform(0.08, 0.35, 2)))
        box = Gbm(mu=mu, sigma=sg)
        for beta in (-2.0, 0.0, 0.5, 2.0):
            gp = an.gbm_growth(box, prob, beta)
            req = mc.SimRequest(gp.worst.as_model(box), prob, beta, 50.0, n_paths=100_000, seed=i)
            est = mc.simulate_utility(req)
            if beta == 0.0:
                zero_exact &= est.estimate == gp.rate and est.rate_std_err == 0
            elif abs(est.estimate - gp.rate) <= 3 * est.rate_std_err:
                hits[beta] += 1
    ok = zero_exact and all(h >= 19 for h in hits.values())
    counts = ", ".join(f"beta={b:g}: {h}/20" for b, h in hits.items())
    return ok, f"{counts} within 3 s.e. (need 19/20); beta=0 exact={zero_exact}"


# --- 5. candidate sets vs brute force ------------------------------------------------------

def criterion_5():
    worst = 0.0
    ok = True
    for kind, gen, cand, fn in (("cir", random_cir, candidates_cir, an.cir_growth),
                                ("threehalves", random_threehalves, candidates_32, an.threehalves_growth)):
        rng = np.random.default_rng(77 if kind == "cir" else 78)
        for _ in range(20):
            m, prob = gen(rng), random_problem(rng)
            opt = cand(m, prob)
            betas = np.linspace(prob.beta_range.lo, prob.beta_range.hi, 10_000)
            rates = np.array([fn(m, prob, float(b)).rate for b in betas])
            step = betas[1] - betas[0]
            err = abs(opt.beta_star - betas[int(np.argmax(rates))])
            worst = max(worst, err / step)
            ok &= err <= step
    return ok, f"40 boxes; worst |beta*_cand - beta*_scan| = {worst:.3f} scan steps (need <= 1)"


# --- 6. CIR / 3/2 long-horizon convergence ----------------------------------------------------

def criterion_6():
    prob = Problem(0.5, 0.02, (-5, 5))
    parts, ok = [], True
    for name, box, fn in (("cir", Cir(b=(0.5, 0.6), a=(1, 2), sigma=(0.4, 0.5)), an.cir_growth),
                          ("3/2", ThreeHalves(b=(0.3, 0.4), a=(1, 2), sigma=(0.8, 1.0)), an.threehalves_growth)):
        gp = fn(box, prob, 2.0)
        req = mc.SimRequest(gp.worst.as_model(box), prob, 2.0, 100.0, dt=1 / 500, n_paths=4096, seed=0)
        (_, e25), (_, e100) = mc.growth_curve(req, [25.0, 100.0])
        g25, g100 = abs(e25.estimate - gp.rate), abs(e100.estimate - gp.rate)
        tol = max(0.02, 3 * e100.rate_std_err)
        comb = math.hypot(e25.rate_std_err, e100.rate_std_err)
        good = g100 <= tol and g100 <= g25 + 2 * comb
        ok &= good
        parts.append(f"{name}: rate={gp.rate:.5f} gap25={g25:.4f} gap100={g100:.4f} (<= {tol:.3f})")
    return ok, "; ".join(parts)


# --- 7. invariants of the closed forms -------------------------------------------------------

def criterion_7():
    rng = np.random.default_rng(99)
    zero = sign = True
    resid = 0.0
    for _ in range(2000):
        p = rng.uniform(0.05, 0.95)
        s = rng.uniform(0.05, 1.5)
        b = s * s * rng.uniform(1.01, 5)
        a = rng.uniform(0.05, 3)
        beta = rng.uniform(-6, 6)
        zero &= (an.cir_eta(b, s, 0, p) == 0 and an.threehalves_eta(a, s, 0, p) == 0
                 and an.heston_eta(s, 0, p, -0.5, 2.0) == 0 and an.sv32_eta(s, 0, p, -0.5, 2.0) == 0)
        c = p * beta * (beta - 1)
        for eta, k in ((an.cir_eta(b, s, beta, p), 2 * b / s**2 - 1),
                       (an.threehalves_eta(a, s, beta, p), 2 * a / s**2 + 1)):
            sign &= np.sign(eta) == np.sign(c)
            resid = max(resid, abs(eta * eta + k * eta - c) / max(1.0, abs(k * eta), abs(c)))
    cont = 0.0
    dominance = True
    betas = np.linspace(-4, 4, 33)
    for _ in range(100):
        prob = random_problem(rng)
        boxes = ((random_cir(rng), an.cir_worst, an.cir_rate_at, an.cir_growth),
                 (random_threehalves(rng), an.threehalves_worst, an.threehalves_rate_at,
                  an.threehalves_growth))
        for m, worst, rate, grow in boxes:
            for beta, left in ((0.0, -1e-300), (1.0, 1.0 - 1e-16)):
                vals = [rate(*(worst(m, sel)[k] for k in ("b", "a", "sigma")), beta, prob.p, prob.r)
                        for sel in (beta, left)]
                cont = max(cont, abs(vals[0] - vals[1]))
            for beta in betas:
                w = grow(m, prob, beta).rate
                dominance &= all(rate(c["b"], c["a"], c["sigma"], beta, prob.p, prob.r) >= w
                                 for c in m.corners())
        mu = tuple(sorted(rng.uniform(0.001, 0.15, 2)))
        sg = tuple(sorted(rng.uniform(0.05, 0.5, 2)))
        g = Gbm(mu=mu, sigma=sg)
        for beta in betas:
            w = an.gbm_growth(g, prob, beta).rate
            dominance &= all(an.gbm_rate_at(c["mu"], c["sigma"], beta, prob.p, prob.r) >= w
                             for c in g.corners())
    ok = zero and sign and resid < 1e-12 and cont <= 1e-12 and dominance
    return ok, (f"eta(0)=0: {zero}; sign pattern: {sign}; max residual {resid:.1e} (<1e-12); "
                f"boundary jump {cont:.1e} (<=1e-12); corner dominance on 100 boxes: {dominance}")


# --- 8. Lipschitz certification --------------------------------------------------------------

def criterion_8():
    rng = np.random.default_rng(8)
    parts, ok = [], True
    for name, m, prob in (("heston", Heston(**HESTON_BOX), Problem(0.5, 0.015, (-5, 5))),
                          ("vasicek", Vasicek(**VASICEK_BOX), Problem(0.5, None, (-5, 5)))):
        M = lipschitz_M(m, prob)
        ratio = 0.0
        for _ in range(1000):
            h = float(10 ** rng.uniform(-4, -0.3))
            b = float(rng.uniform(-5, 5 - h))
            d = abs(an.growth(m, prob, b + h).rate - an.growth(m, prob, b).rate) / h
            ratio = max(ratio, d)
        coarse = optimize_beta_grid(m, prob, 0.01)
        fine = optimize_beta_grid(m, prob, 0.01, divisor=2)
        shift = abs(fine.rate_star - coarse.rate_star)
        good = ratio <= M and shift <= 0.01
        ok &= good
        parts.append(f"{name}: max FD slope {ratio:.4f} <= M={M:.4f}, halving shift {shift:.1e} (<=0.01)")
    return ok, "; ".join(parts)


CRITERIA = [
    (1, "Heston experiment", criterion_1),
    (2, "Vasicek experiment", criterion_2),
    (3, "Heston monotonicity scans", criterion_3),
    (4, "GBM exactness", criterion_4),
    (5, "candidate sets vs brute force", criterion_5),
    (6, "CIR and 3/2 long-horizon convergence", criterion_6),
    (7, "closed-form invariants", criterion_7),
    (8, "Lipschitz certification", criterion_8),
]


def _check(capsys, n):
    _, title, fn = CRITERIA[n - 1]
    passed, detail = fn()
    with capsys.disabled():
        print("\n" + _line(n, title, passed, detail))
    assert passed, detail


def test_criterion_1(capsys):
    _check(capsys, 1)


def test_criterion_2(capsys):
    _check(capsys, 2)


def test_criterion_3(capsys):
    _check(capsys, 3)


def test_criterion_4(capsys):
    _check(capsys, 4)


def test_criterion_5(capsys):
    _check(capsys, 5)


def test_criterion_6(capsys):
    _check(capsys, 6)


def test_criterion_7(capsys):
    _check(capsys, 7)


def test_criterion_8(capsys):
    _check(capsys, 8)


if __name__ == "__main__":
    failed = 0
    for n, title, fn in CRITERIA:
        passed, detail = fn()
        failed += not passed
        print(_line(n, title, passed, detail), flush=True)
    sys.exit(1 if failed else 0)
