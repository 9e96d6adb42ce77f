"""Robust long-run growth rates and optimal leverage for leveraged ETFs."""
from .core import (
    Cir, ConstraintError, FeasibilityError, Gbm, GrowthPoint, Heston, Interval, InvGarch,
    McEstimate, Method, ModelSpec, OptimalLeverage, Problem, Regime, Sv32, ThreeHalves,
    Vasicek, Violation, WorstCase, validate,
)
from .analytic import growth

__version__ = "0.1.0"
