import numpy as np
import pytest

from robust_letf import Cir, Gbm, Heston, InvGarch, Problem, Sv32, ThreeHalves, Vasicek

HESTON_BOX = dict(mu=(0.05, 0.08), rho=(-0.93, -0.75), b=(0.1, 0.2), a=(3, 10), sigma=(0.82, 0.93))
VASICEK_BOX = dict(mu=(0.06, 0.1), varsigma=(0.08, 0.25), rho=(-0.9, -0.5), b=(0.06, 0.1),
                   a=(6, 9), sigma=(0.2, 0.5))


@pytest.fixture
def heston():
    return Heston(**HESTON_BOX), Problem(0.5, 0.015, (-5, 5))


@pytest.fixture
def vasicek():
    return Vasicek(**VASICEK_BOX), Problem(0.5, None, (-5, 5))


@pytest.fixture
def cir_box():
    return Cir(b=(0.5, 0.6), a=(1, 2), sigma=(0.4, 0.5)), Problem(0.5, 0.02, (-5, 5))


@pytest.fixture
def th_box():
    return ThreeHalves(b=(0.3, 0.4), a=(1, 2), sigma=(0.8, 1.0)), Problem(0.5, 0.02, (-5, 5))


@pytest.fixture
def gbm_box():
    return Gbm(mu=(0.06, 0.10), sigma=(0.1, 0.2)), Problem(0.5, 0.02, (-5, 5))


@pytest.fixture
def sv32_box():
    return (Sv32(mu=(0.05, 0.08), rho=(-0.9, -0.7), b=(0.06, 0.1), a=(1.5, 3), sigma=(0.3, 0.6)),
            Problem(0.5, 0.015, (-5, 5)))


@pytest.fixture
def invgarch_box():
    return (InvGarch(mu=(0.06, 0.1), varsigma=(0.1, 0.2), rho=(-0.5, 0.3), b=(0.3, 0.5),
                     a=(6, 9), sigma=(0.1, 0.3)),
            Problem(0.5, None, (-3, 3)))


def _iv(rng, lo, hi, min_width=0.0):
    x, y = sorted(rng.uniform(lo, hi, 2))
    return (x, max(y, x + min_width))


def random_cir(rng):
    sigma = _iv(rng, 0.1, 0.6)
    b_lo = sigma[1] ** 2 * rng.uniform(1.05, 4.0)
    b = (b_lo, b_lo * rng.uniform(1.0, 1.6))
    a = tuple(sorted(np.exp(rng.uniform(np.log(0.01), np.log(3.0), 2))))
    return Cir(b=b, a=a, sigma=sigma)


def random_threehalves(rng):
    b = tuple(sorted(np.exp(rng.uniform(np.log(0.005), np.log(1.0), 2))))
    a = _iv(rng, 0.05, 3.0)
    sigma = _iv(rng, 0.1, 1.2)
    return ThreeHalves(b=b, a=a, sigma=sigma)


def random_problem(rng, r=True):
    return Problem(float(rng.uniform(0.2, 0.8)), float(rng.uniform(0.005, 0.06)) if r else None,
                   (float(rng.uniform(-6, -2)), float(rng.uniform(2, 6))))
