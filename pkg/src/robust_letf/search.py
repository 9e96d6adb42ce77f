"""Bounded low-dimensional search: uniform grid, then golden-section polish.

All maximizers break ties toward the smallest argument (lexicographic in 2-D).
Objectives must accept numpy arrays as well as floats.
"""
from __future__ import annotations

import math
from typing import Callable

import numpy as np

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
GRID_1D = 1024
GRID_2D = 256
TOL = 1e-10


def golden_max(f: Callable[[float], float], lo: float, hi: float, tol: float = TOL,
               max_iter: int = 200) -> tuple[float, float]:
    """Golden-section search for the max of a unimodal f on [lo, hi]."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, float(f(x))


def maximize_1d(f, lo: float, hi: float, n: int = GRID_1D, tol: float = TOL) -> tuple[float, float]:
    if hi <= lo:
        return lo, float(f(lo))
    xs = np.linspace(lo, hi, n)
    ys = np.asarray(f(xs), dtype=float)
    i = int(np.argmax(ys))
    x_best, y_best = float(xs[i]), float(ys[i])
    xr, yr = golden_max(f, float(xs[max(i - 1, 0)]), float(xs[min(i + 1, n - 1)]), tol)
    if yr > y_best:
        return xr, yr
    return x_best, y_best


def minimize_1d(f, lo: float, hi: float, n: int = GRID_1D, tol: float = TOL) -> tuple[float, float]:
    x, y = maximize_1d(lambda t: -f(t), lo, hi, n, tol)
    return x, -y


def endpoint_max(f, lo: float, hi: float) -> tuple[float, float]:
    """Max of a convex function on [lo, hi]: one of the two ends."""
    flo, fhi = float(f(lo)), float(f(hi))
    return (lo, flo) if flo >= fhi else (hi, fhi)


def endpoint_min(f, lo: float, hi: float) -> tuple[float, float]:
    x, y = endpoint_max(lambda t: -f(t), lo, hi)
    return x, -y


def maximize_2d(f, xb: tuple[float, float], yb: tuple[float, float], n: int = GRID_2D,
                tol: float = TOL, sweeps: int = 50) -> tuple[float, float, float]:
    """Grid argmax of f(x, y) followed by coordinate-wise golden refinement."""
    (xlo, xhi), (ylo, yhi) = xb, yb
    if xhi <= xlo:
        y, v = maximize_1d(lambda t: f(xlo, t), ylo, yhi, max(n * 4, 2), tol)
        return xlo, y, v
    if yhi <= ylo:
        x, v = maximize_1d(lambda t: f(t, ylo), xlo, xhi, max(n * 4, 2), tol)
        return x, ylo, v
    xs = np.linspace(xlo, xhi, n)
    ys = np.linspace(ylo, yhi, n)
    vals = np.asarray(f(xs[:, None], ys[None, :]), dtype=float)
    i, j = np.unravel_index(int(np.argmax(vals)), vals.shape)
    x, y, v = float(xs[i]), float(ys[j]), float(vals[i, j])
    hx, hy = (xhi - xlo) / (n - 1), (yhi - ylo) / (n - 1)
    for _ in range(sweeps):
        v_old = v
        xr, vr = golden_max(lambda t: f(t, y), max(xlo, x - hx), min(xhi, x + hx), tol)
        if vr > v:
            x, v = xr, vr
        yr, vr = golden_max(lambda t: f(x, t), max(ylo, y - hy), min(yhi, y + hy), tol)
        if vr > v:
            y, v = yr, vr
        if v - v_old <= 1e-15 * max(1.0, abs(v)):
            break
    return x, y, v


def minimize_2d(f, xb, yb, n: int = GRID_2D, tol: float = TOL) -> tuple[float, float, float]:
    x, y, v = maximize_2d(lambda s, t: -f(s, t), xb, yb, n, tol)
    return x, y, -v
