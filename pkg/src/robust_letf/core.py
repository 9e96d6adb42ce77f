"""Domain types: intervals, uncertainty boxes, problem settings and result records."""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from enum import Enum
from itertools import product
from types import MappingProxyType
from typing import ClassVar, Mapping, Sequence


class ConstraintError(ValueError):
    """Raised when a model or problem violates a hard constraint."""

    def __init__(self, violations: Sequence["Violation"] | str):
        if isinstance(violations, str):
            self.violations = [Violation("input", violations)]
            super().__init__(violations)
            return
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class FeasibilityError(ValueError):
    """Raised when a β-dependent proviso fails for an otherwise valid model."""


@dataclass(frozen=True)
class Violation:
    subject: str
    constraint: str
    severity: str = "error"  # "error" rejects, "warning" is reported only

    def __str__(self) -> str:
        tag = "" if self.severity == "error" else f" [{self.severity}]"
        return f"{self.constraint} fails{tag}"


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ConstraintError(f"interval bounds must be finite, got [{lo}, {hi}]")
        if lo > hi:
            raise ConstraintError(f"interval needs lo <= hi, got [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @classmethod
    def coerce(cls, value) -> "Interval":
        if isinstance(value, Interval):
            return value
        if isinstance(value, str):
            return cls.parse(value)
        if isinstance(value, (int, float)):
            return cls.point(value)
        lo, hi = value
        return cls(lo, hi)

    @classmethod
    def parse(cls, text: str) -> "Interval":
        parts = [s.strip() for s in text.split(",")]
        if len(parts) == 1:
            return cls.point(float(parts[0]))
        if len(parts) != 2:
            raise ConstraintError(f"cannot parse interval {text!r}; expected 'lo,hi'")
        return cls(float(parts[0]), float(parts[1]))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def ends(self) -> tuple[float, ...]:
        return (self.lo,) if self.degenerate else (self.lo, self.hi)

    def __str__(self) -> str:
        return f"{self.lo!r},{self.hi!r}"


@dataclass(frozen=True)
class Problem:
    """Utility power p, constant short rate r (None for stochastic-rate models), β range.

    Construction does not reject bad values so that `validate` can report them;
    every computation calls `require_valid` first.
    """

    p: float
    r: float | None = None
    beta_range: Interval = Interval(-5.0, 5.0)

    def __post_init__(self):
        object.__setattr__(self, "beta_range", Interval.coerce(self.beta_range))
        object.__setattr__(self, "p", float(self.p))
        if self.r is not None:
            object.__setattr__(self, "r", float(self.r))

    def violations(self) -> list[Violation]:
        out = []
        if not (0.0 < self.p < 1.0):
            out.append(Violation("p", "0 < p < 1"))
        if not self.beta_range.lo < 0.0:
            out.append(Violation("beta_range", "beta_range.lo < 0"))
        if not self.beta_range.hi > 1.0:
            out.append(Violation("beta_range", "beta_range.hi > 1"))
        if self.r is not None and not math.isfinite(self.r):
            out.append(Violation("r", "r finite"))
        return out


class ModelSpec:
    """Base for the parameter boxes. Subclasses are frozen dataclasses of Intervals."""

    family: ClassVar[str]
    param_names: ClassVar[tuple[str, ...]]
    constant_rate: ClassVar[bool] = True

    def __post_init__(self):
        for name in self.param_names:
            object.__setattr__(self, name, Interval.coerce(getattr(self, name)))
        bad = [v for v in self.constraint_violations() if v.severity == "error"]
        if bad:
            raise ConstraintError(bad)

    def box(self) -> dict[str, Interval]:
        return {name: getattr(self, name) for name in self.param_names}

    def constraint_violations(self) -> list[Violation]:
        return _model_violations(self.family, self.box())

    @property
    def degenerate(self) -> bool:
        return all(iv.degenerate for iv in self.box().values())

    def at(self, **values: float) -> "ModelSpec":
        """A copy with the given parameters pinned to single points."""
        unknown = set(values) - set(self.param_names)
        if unknown:
            raise KeyError(f"unknown parameters {sorted(unknown)} for {self.family}")
        return replace(self, **{k: Interval.point(v) for k, v in values.items()})

    def point_values(self) -> dict[str, float]:
        if not self.degenerate:
            raise ConstraintError("model box is not degenerate")
        return {name: iv.lo for name, iv in self.box().items()}

    def corners(self) -> list[dict[str, float]]:
        names = self.param_names
        return [dict(zip(names, c)) for c in product(*(self.box()[n].ends() for n in names))]


@dataclass(frozen=True)
class Gbm(ModelSpec):
    mu: Interval
    sigma: Interval
    family: ClassVar[str] = "gbm"
    param_names: ClassVar[tuple[str, ...]] = ("mu", "sigma")


@dataclass(frozen=True)
class Cir(ModelSpec):
    b: Interval
    a: Interval
    sigma: Interval
    family: ClassVar[str] = "cir"
    param_names: ClassVar[tuple[str, ...]] = ("b", "a", "sigma")


@dataclass(frozen=True)
class ThreeHalves(ModelSpec):
    b: Interval
    a: Interval
    sigma: Interval
    family: ClassVar[str] = "threehalves"
    param_names: ClassVar[tuple[str, ...]] = ("b", "a", "sigma")


@dataclass(frozen=True)
class Heston(ModelSpec):
    mu: Interval
    rho: Interval
    b: Interval
    a: Interval
    sigma: Interval
    family: ClassVar[str] = "heston"
    param_names: ClassVar[tuple[str, ...]] = ("mu", "rho", "b", "a", "sigma")


@dataclass(frozen=True)
class Sv32(ModelSpec):
    mu: Interval
    rho: Interval
    b: Interval
    a: Interval
    sigma: Interval
    family: ClassVar[str] = "sv32"
    param_names: ClassVar[tuple[str, ...]] = ("mu", "rho", "b", "a", "sigma")


@dataclass(frozen=True)
class _RateModel(ModelSpec):
    mu: Interval
    varsigma: Interval
    rho: Interval
    b: Interval
    a: Interval
    sigma: Interval
    r0: float | None = None
    constant_rate: ClassVar[bool] = False
    param_names: ClassVar[tuple[str, ...]] = ("mu", "varsigma", "rho", "b", "a", "sigma")

    def __post_init__(self):
        super().__post_init__()
        if self.r0 is None:
            # midpoint of the extreme long-run levels b/a
            r0 = 0.5 * (self.b.lo / self.a.hi + self.b.hi / self.a.lo)
            object.__setattr__(self, "r0", r0)
        elif not (math.isfinite(self.r0) and self.r0 > 0):
            raise ConstraintError([Violation("r0", "r0 > 0")])
        else:
            object.__setattr__(self, "r0", float(self.r0))


@dataclass(frozen=True)
class Vasicek(_RateModel):
    family: ClassVar[str] = "vasicek"


@dataclass(frozen=True)
class InvGarch(_RateModel):
    family: ClassVar[str] = "invgarch"


MODEL_TYPES: dict[str, type[ModelSpec]] = {
    cls.family: cls for cls in (Gbm, Cir, ThreeHalves, Heston, Sv32, Vasicek, InvGarch)
}


def _positive_lo(box: Mapping[str, Interval], names: Sequence[str]) -> list[Violation]:
    return [Violation(n, f"{n}.lo > 0") for n in names if not box[n].lo > 0]


def _rho_ok(box: Mapping[str, Interval]) -> list[Violation]:
    rho = box["rho"]
    if -1.0 <= rho.lo and rho.hi <= 1.0:
        return []
    return [Violation("rho", "-1 <= rho.lo <= rho.hi <= 1")]


def _model_violations(family: str, box: Mapping[str, Interval]) -> list[Violation]:
    if family == "gbm":
        return _positive_lo(box, ("mu", "sigma"))
    if family == "cir":
        out = _positive_lo(box, ("a", "sigma"))
        if not box["b"].lo > box["sigma"].hi ** 2:
            out.append(Violation("b", "b.lo > sigma.hi^2"))
        return out
    if family == "threehalves":
        return _positive_lo(box, ("b", "a", "sigma"))
    if family == "heston":
        out = _positive_lo(box, ("mu", "a", "sigma")) + _rho_ok(box)
        if not box["b"].lo > 0:
            out.append(Violation("b", "b.lo > 0"))
        if not box["b"].lo > box["sigma"].hi ** 2 / 2:
            # Feller-type bound; the rate formula does not use it and the
            # simulation copes via truncation, so it is only reported.
            out.append(Violation("b", "b.lo > sigma.hi^2/2", "warning"))
        return out
    if family == "sv32":
        out = _positive_lo(box, ("mu", "b", "sigma")) + _rho_ok(box)
        if not box["a"].lo > -box["sigma"].lo ** 2 / 2:
            out.append(Violation("a", "a.lo > -sigma.lo^2/2"))
        return out
    if family == "vasicek":
        return _positive_lo(box, ("mu", "varsigma", "b", "a", "sigma")) + _rho_ok(box)
    if family == "invgarch":
        return _positive_lo(box, ("mu", "varsigma", "a", "sigma")) + _rho_ok(box)
    raise KeyError(f"unknown model family {family!r}")


def model_violations(family: str, **params) -> list[Violation]:
    """Standing-assumption violations for raw parameter boxes, before construction."""
    cls = MODEL_TYPES[family]
    box = {n: Interval.coerce(params[n]) for n in cls.param_names}
    return _model_violations(family, box)


def validate(model: ModelSpec, prob: Problem) -> list[Violation]:
    """All violated constraints of a model/problem pair, warnings included."""
    out = list(model.constraint_violations()) + prob.violations()
    if model.constant_rate and prob.r is None:
        out.append(Violation("r", "r given for constant-rate model"))
    return out


def require_valid(model: ModelSpec, prob: Problem) -> None:
    bad = [v for v in validate(model, prob) if v.severity == "error"]
    if bad:
        raise ConstraintError(bad)


class Regime(str, Enum):
    BETA_GE_1 = "BetaGe1"
    BETA_IN_01 = "BetaIn01"
    BETA_NEG = "BetaNeg"


def regime_of(beta: float) -> Regime:
    if beta >= 1.0:
        return Regime.BETA_GE_1
    if beta >= 0.0:
        return Regime.BETA_IN_01
    return Regime.BETA_NEG


def _frozen_map(m):
    return None if m is None else MappingProxyType({k: float(v) for k, v in dict(m).items()})


@dataclass(frozen=True)
class WorstCase:
    params: Mapping[str, float]
    regime: Regime
    subcase: str | None = None
    inner_argmax: Mapping[str, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "params", _frozen_map(self.params))
        object.__setattr__(self, "inner_argmax", _frozen_map(self.inner_argmax))

    def within(self, model: ModelSpec, tol: float = 1e-12) -> bool:
        box = model.box()
        return all(box[k].contains(v, tol) for k, v in self.params.items())

    def as_model(self, model: ModelSpec) -> ModelSpec:
        """The degenerate model sitting at this parameter vector."""
        return model.at(**self.params)


@dataclass(frozen=True)
class GrowthPoint:
    beta: float
    rate: float | None
    worst: WorstCase | None
    feasible: bool = True
    feasibility_note: str = ""

    def __post_init__(self):
        if not self.feasible and self.rate is not None:
            raise ValueError("an infeasible point carries no rate")
        if self.feasible and self.rate is None:
            raise ValueError("a feasible point needs a rate")


class Method(str, Enum):
    CLOSED_FORM = "ClosedForm"
    CANDIDATE_TABLE = "CandidateTable"
    CERTIFIED_GRID = "CertifiedGrid"


@dataclass(frozen=True)
class OptimalLeverage:
    beta_star: float
    rate_star: float
    method: Method
    error_bound: float
    candidates: tuple[tuple[float, float], ...]
    skipped: tuple[tuple[float, str], ...] = ()
    note: str = ""
    lipschitz_M: float | None = None
    mesh: float | None = None


def best_candidate(cands: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Max rate, ties to the smaller β."""
    if not cands:
        raise FeasibilityError("no feasible candidate")
    return min(cands, key=lambda c: (-c[1], c[0]))


@dataclass(frozen=True)
class McEstimate:
    horizon_T: float
    n_paths: int
    dt: float
    scheme: str
    seed: int
    estimate: float
    std_err_of_mean: float
    log_mean: float
    rate_std_err: float = 0.0
    antithetic: bool = False
    n_nonfinite: int = 0
    max_log_weight: float = 0.0

    def __post_init__(self):
        if self.n_paths < 2:
            raise ValueError("n_paths >= 2 required")
        if not self.dt > 0:
            raise ValueError("dt > 0 required")
        if self.horizon_T < self.dt * (1 - 1e-12):
            raise ValueError("horizon_T >= dt required")


def record_fields(obj) -> list[str]:
    return [f.name for f in fields(obj)]
