import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from robust_letf import (
    Cir, ConstraintError, Gbm, GrowthPoint, Heston, Interval, McEstimate, Problem, Regime,
    Vasicek, WorstCase, validate,
)
from robust_letf.core import best_candidate, model_violations, regime_of

from conftest import HESTON_BOX, VASICEK_BOX


def test_interval_basics():
    iv = Interval(0.1, 0.3)
    assert iv.width == pytest.approx(0.2)
    assert Interval.parse("0.1, 0.3") == iv
    assert Interval.point(2.0).degenerate
    with pytest.raises(ConstraintError):
        Interval(1.0, 0.0)
    with pytest.raises(ConstraintError):
        Interval.parse("1,2,3")


def test_valid_cir_has_empty_report():
    m = Cir(b=(0.5, 0.6), a=(1, 1), sigma=(0.5, 0.5))
    assert validate(m, Problem(0.5, 0.02)) == []


def test_cir_feller_violation_rejected():
    viol = model_violations("cir", b=(0.2, 0.3), a=(1, 1), sigma=(0.5, 0.5))
    assert [str(v) for v in viol] == ["b.lo > sigma.hi^2 fails"]
    with pytest.raises(ConstraintError) as exc:
        Cir(b=(0.2, 0.3), a=(1, 1), sigma=(0.5, 0.5))
    assert exc.value.violations == viol


def test_problem_p_boundary():
    m = Cir(b=(0.5, 0.6), a=(1, 1), sigma=(0.5, 0.5))
    viol = validate(m, Problem(1.0, 0.02))
    assert [str(v) for v in viol] == ["0 < p < 1 fails"]


def test_problem_beta_range_and_rate_presence():
    m = Cir(b=(0.5, 0.6), a=(1, 1), sigma=(0.5, 0.5))
    names = {v.constraint for v in validate(m, Problem(0.5, None, (0.5, 0.9)))}
    assert names == {"beta_range.lo < 0", "beta_range.hi > 1", "r given for constant-rate model"}


def test_heston_experiment_box_only_warns():
    m = Heston(**HESTON_BOX)
    viol = validate(m, Problem(0.5, 0.015))
    assert len(viol) == 1 and viol[0].severity == "warning"


def test_vasicek_rho_may_be_negative_and_r0_defaults():
    m = Vasicek(**VASICEK_BOX)
    assert m.r0 == pytest.approx(0.5 * (0.06 / 9 + 0.1 / 6))
    with pytest.raises(ConstraintError):
        Vasicek(**{**VASICEK_BOX, "rho": (-1.2, 0.0)})


_families = {
    "gbm": ("mu", "sigma"),
    "cir": ("b", "a", "sigma"),
    "threehalves": ("b", "a", "sigma"),
    "heston": ("mu", "rho", "b", "a", "sigma"),
    "sv32": ("mu", "rho", "b", "a", "sigma"),
    "vasicek": ("mu", "varsigma", "rho", "b", "a", "sigma"),
    "invgarch": ("mu", "varsigma", "rho", "b", "a", "sigma"),
}
from robust_letf.core import MODEL_TYPES  # noqa: E402

interval_st = st.tuples(st.floats(-1.2, 1.5), st.floats(0, 1.0)).map(lambda t: (t[0], t[0] + t[1]))


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(sorted(_families)), st.data())
def test_construction_rejected_iff_violation(family, data):
    params = {n: data.draw(interval_st, label=n) for n in _families[family]}
    errors = [v for v in model_violations(family, **params) if v.severity == "error"]
    if errors:
        with pytest.raises(ConstraintError) as exc:
            MODEL_TYPES[family](**params)
        assert exc.value.violations == errors
    else:
        MODEL_TYPES[family](**params)


def test_regime_boundaries():
    assert regime_of(0.0) is Regime.BETA_IN_01
    assert regime_of(1.0) is Regime.BETA_GE_1
    assert regime_of(-1e-12) is Regime.BETA_NEG


def test_growth_point_invariant():
    with pytest.raises(ValueError):
        GrowthPoint(1.0, 0.1, None, feasible=False)
    GrowthPoint(1.0, None, None, feasible=False, feasibility_note="x")


def test_worst_case_is_read_only():
    w = WorstCase({"a": 1.0}, Regime.BETA_NEG)
    with pytest.raises(TypeError):
        w.params["a"] = 2.0


def test_best_candidate_tie_goes_to_smaller_beta():
    assert best_candidate([(0.5, 1.0), (-1.0, 1.0), (2.0, 0.5)]) == (-1.0, 1.0)


def test_mc_estimate_invariants():
    with pytest.raises(ValueError):
        McEstimate(1.0, 1, 0.1, "ExactGbm", 0, 0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        McEstimate(0.01, 10, 0.1, "ExactGbm", 0, 0.0, 0.0, 0.0)


def test_corners_and_at():
    m = Gbm(mu=(0.05, 0.08), sigma=(0.1, 0.2))
    assert len(m.corners()) == 4
    pt = m.at(mu=0.06, sigma=0.15)
    assert pt.degenerate and pt.point_values() == {"mu": 0.06, "sigma": 0.15}
