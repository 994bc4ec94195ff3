"""Model coefficients for the size-structured renewal equation and the three benchmark problems.

A model is given by a growth rate ``b``, mortality ``c`` and fertility ``beta``,
each a function ``f(t, summary, x)`` vectorised over ``x``. The dependence on
the population enters only through a :class:`MeasureSummary`, the integral of a
weight function ``gamma`` against the current measure.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class MeasureSummary:
    total_mass: float
    t: float = 0.0

    def __post_init__(self):
        # NaN is let through so that solvers can report the blow-up themselves
        if self.total_mass < 0:
            raise ValueError(f"summary mass must be nonnegative, got {self.total_mass}")


def _unit_weight(x):
    return np.ones_like(x)


@dataclass(frozen=True)
class CoefficientSet:
    b: Callable
    c: Callable
    beta: Callable
    db_dx: Callable
    dc_dx: Callable
    x_b: float = 0.0
    gamma: Callable = _unit_weight
    name: str = "custom"

    def summarize(self, t, points, masses) -> MeasureSummary:
        """``P = sum gamma(x_i) m_i``; negative transient masses are counted as they are, then floored at 0."""
        if len(points) == 0:
            return MeasureSummary(0.0, t)
        p = float(np.dot(self.gamma(np.asarray(points, dtype=float)), masses))
        return MeasureSummary(max(p, 0.0), t)


@dataclass(frozen=True)
class ExactSolution:
    u: Optional[Callable]  # u(t, x), None when unknown
    domain: tuple = (0.0, 1.0)
    sup: float = float("nan")  # bound on u over [0, T] x domain, used for discretisation bias

    @property
    def known(self) -> bool:
        return self.u is not None

    def at(self, t):
        if self.u is None:
            raise LookupError("exact solution unknown for this model; score against a reference measure")
        return lambda x: self.u(t, x)


@dataclass(frozen=True)
class TestCase:
    __test__ = False

    id: int
    coefficients: CoefficientSet
    exact: ExactSolution
    initial: Callable  # u0(x)
    domain: tuple
    beta_sup: float  # sup of beta over all (t, P, x) in the domain
    description: str = field(default="", repr=False)


# -- test case 1: linear, stationary solution u = 1 ------------------------

def _tc1():
    coeffs = CoefficientSet(
        b=lambda t, s, x: 0.2 * (1.0 - x),
        c=lambda t, s, x: np.full_like(x, 0.2),
        beta=lambda t, s, x: 2.4 * (x * x - x * x * x),
        db_dx=lambda t, s, x: np.full_like(x, -0.2),
        dc_dx=lambda t, s, x: np.zeros_like(x),
        name="tc1",
    )
    exact = ExactSolution(lambda t, x: np.ones_like(np.asarray(x, dtype=float)), (0.0, 1.0), 1.0)
    return TestCase(1, coeffs, exact, lambda x: np.ones_like(x), (0.0, 1.0),
                    2.4 * 4.0 / 27.0, "linear model started at its stable stationary state")


# -- test case 2: birth rate depends on the total population --------------

_TC2_P0 = 1.0 + 0.5 * np.sin(1.0)


def tc2_total_mass(t):
    """Mass of the exact solution ``e^-t (1 + cos(x)/2)`` on [0, 1]."""
    return np.exp(-t) * _TC2_P0


def _in_unit(x):
    return ((x >= 0.0) & (x <= 1.0)).astype(float)


def _tc2():
    def c(t, s, x):
        e = np.exp(-x)
        return 1.0 + e + e * np.sin(x) / (2.0 + np.cos(x))

    def dc_dx(t, s, x):
        e = np.exp(-x)
        sn, cs = np.sin(x), np.cos(x)
        # d/dx [e^-x sin/(2+cos)] = e^-x [(cos - sin)(2 + cos) + sin^2] / (2+cos)^2
        return -e + e * ((cs - sn) * (2.0 + cs) + sn * sn) / (2.0 + cs) ** 2

    def beta(t, s, x):
        scale = (0.5 + _TC2_P0 * np.exp(-t)) / (0.5 + s.total_mass)
        return 3.0 / (2.0 + np.cos(x)) * scale * _in_unit(x)

    coeffs = CoefficientSet(
        b=lambda t, s, x: np.exp(-x),
        c=c,
        beta=beta,
        db_dx=lambda t, s, x: -np.exp(-x),
        dc_dx=dc_dx,
        gamma=_in_unit,
        name="tc2",
    )
    exact = ExactSolution(lambda t, x: np.exp(-t) * (1.0 + 0.5 * np.cos(x)), (0.0, 1.0), 1.5)
    return TestCase(2, coeffs, exact, lambda x: 1.0 + 0.5 * np.cos(x), (0.0, 1.0),
                    3.0 / (2.0 + np.cos(1.0)) * (0.5 + _TC2_P0) / 0.5,
                    "nonlinear birth through the total population on [0, 1]")


# -- test case 3: steep mortality at the boundary --------------------------

_TC3_KINK = 0.5 * (1.0 - np.sqrt(1.0 - 4.0e-3))  # 1e4 x (1 - x) = 10, lower root


def _tc3():
    def b(t, s, x):
        return np.where(x < 0.5, 1.0, np.where(x <= 1.0, 1.0 - 2.0 * (x - 0.5), 0.0))

    def db_dx(t, s, x):
        # left limit at the kinks
        return np.where((x > 0.5) & (x <= 1.0), -2.0, 0.0)

    def c(t, s, x):
        return np.maximum(np.minimum(10.0, 1.0e4 * x * (1.0 - x)), 0.0)

    def dc_dx(t, s, x):
        steep = (x <= _TC3_KINK) | (x > 1.0 - _TC3_KINK)
        return np.where(steep & (x >= 0.0) & (x <= 1.0), 1.0e4 * (1.0 - 2.0 * x), 0.0)

    coeffs = CoefficientSet(
        b=b, c=c,
        beta=lambda t, s, x: np.full_like(x, 10.0),
        db_dx=db_dx, dc_dx=dc_dx,
        name="tc3",
    )
    return TestCase(3, coeffs, ExactSolution(None, (0.0, 1.0)), lambda x: np.ones_like(x), (0.0, 1.0),
                    10.0, "large mortality gradient at the boundary; no closed-form solution")


_BUILDERS = {1: _tc1, 2: _tc2, 3: _tc3}


def test_case(case_id: int) -> TestCase:
    """Coefficients, exact solution and initial density of benchmark problem 1, 2 or 3."""
    try:
        return _BUILDERS[int(case_id)]()
    except (KeyError, ValueError):
        raise ValueError(f"unknown test case {case_id!r}; expected 1, 2 or 3") from None


test_case.__test__ = False


def check_derivatives(coeffs: CoefficientSet, sample_points, t=0.0, summary=None, step=1e-5, tol=1e-6):
    """Compare ``db_dx``/``dc_dx`` with central finite differences.

    Returns a dict with the largest deviations and a list of ``(name, x, analytic, fd)``
    mismatches above ``tol``.
    """
    s = summary if summary is not None else MeasureSummary(1.0, t)
    x = np.asarray(sample_points, dtype=float)
    report = {"mismatches": [], "max_error": {}}
    for name, f, df in (("b", coeffs.b, coeffs.db_dx), ("c", coeffs.c, coeffs.dc_dx)):
        fd = (f(t, s, x + step) - f(t, s, x - step)) / (2.0 * step)
        an = df(t, s, x)
        err = np.abs(fd - an)
        report["max_error"][name] = float(err.max()) if len(err) else 0.0
        for xi, a, f_ in zip(x[err > tol], an[err > tol], fd[err > tol]):
            report["mismatches"].append((name, float(xi), float(a), float(f_)))
    report["ok"] = not report["mismatches"]
    return report
