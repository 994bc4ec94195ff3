"""Escalator Boxcar Train: cohort dynamics with three treatments of the boundary cohort.

Internal cohorts move along characteristics and lose mass to mortality. The
boundary cohort collects newborns at ``x_b`` and is turned into an internal
cohort at every internalisation instant ``t_k = k T / K``. Its state is

* ``ORIGINAL`` and ``STAR``: first-moment offset ``pi`` and mass ``m`` (position
  ``x_b + pi / m`` when ``m > 0``),
* ``SIMPLIFIED``: position and mass, transported like any other cohort.

All ODEs are integrated with explicit Euler, ``J`` steps per interval.
"""

from __future__ import annotations

import enum
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .measure import DiscreteMeasure, canonicalize
from .models import CoefficientSet, MeasureSummary
from .validation import check_positive_float, check_positive_int


class EbtVariant(str, enum.Enum):
    ORIGINAL = "original"
    STAR = "star"
    SIMPLIFIED = "simplified"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"ebt": cls.ORIGINAL, "ebt-star": cls.STAR, "ebt*": cls.STAR, "sebt": cls.SIMPLIFIED}
        key = str(value).lower()
        if key in aliases:
            return aliases[key]
        return cls(key)


class Anomaly(str, enum.Enum):
    NEGATIVE_BOUNDARY_MASS = "m^B<0"
    BOUNDARY_OVERTAKES = "x^B>x^1"
    NEGATIVE_OFFSET = "pi^B<0"
    NONFINITE = "nonfinite"


class BlowUpError(FloatingPointError):
    """Raised when a step produces a non-finite value."""

    def __init__(self, t, index, message=None):
        self.t = t
        self.index = index
        super().__init__(message or f"non-finite value in cohort {index} at t={t:.6g}")


class AnomalyError(RuntimeError):
    def __init__(self, anomaly, t, message):
        self.anomaly = anomaly
        self.t = t
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class CohortState:
    """Internal cohorts ``(x, m)`` in creation order plus the boundary cohort.

    ``boundary`` is ``(pi, m)`` for ORIGINAL/STAR and ``(x, m)`` for SIMPLIFIED.
    """

    x: np.ndarray
    m: np.ndarray
    boundary: tuple
    t: float
    variant: EbtVariant
    x_b: float = 0.0

    @classmethod
    def start(cls, initial: DiscreteMeasure, variant, t=0.0):
        variant = EbtVariant.parse(variant)
        x = np.array(initial.points, dtype=float)
        m = np.array(initial.masses, dtype=float)
        return cls(x, m, _empty_boundary(variant, initial.x_b), t, variant, initial.x_b)

    @property
    def n_internal(self):
        return len(self.x)

    def boundary_position(self) -> float:
        b0, mb = self.boundary
        if self.variant is EbtVariant.SIMPLIFIED:
            return b0
        return self.x_b + b0 / mb if mb > 0 else self.x_b

    def boundary_mass(self) -> float:
        return self.boundary[1]

    def all_atoms(self):
        """Positions and masses of every cohort, the boundary one last."""
        return (np.append(self.x, self.boundary_position()), np.append(self.m, self.boundary[1]))

    def to_measure(self, include_boundary=True) -> DiscreteMeasure:
        x, m = self.all_atoms() if include_boundary else (self.x, self.m)
        keep = m != 0
        return DiscreteMeasure(x[keep], m[keep], self.x_b)


def _empty_boundary(variant, x_b):
    return (x_b, 0.0) if variant is EbtVariant.SIMPLIFIED else (0.0, 0.0)


def measure_summary(state: CohortState, coeffs: CoefficientSet) -> MeasureSummary:
    x, m = state.all_atoms()
    return coeffs.summarize(state.t, x, m)


def rhs_internal(t, state: CohortState, coeffs: CoefficientSet, summary=None):
    """``(dx/dt, dm/dt)`` for every internal cohort."""
    s = summary if summary is not None else measure_summary(state, coeffs)
    return coeffs.b(t, s, state.x), -coeffs.c(t, s, state.x) * state.m


def rhs_boundary(t, state: CohortState, coeffs: CoefficientSet, variant=None, summary=None):
    """Time derivative of the boundary unknowns of the given variant.

    The birth term sums ``beta(x_i) m_i`` over the internal cohorts and the
    boundary cohort itself.
    """
    variant = EbtVariant.parse(variant) if variant is not None else state.variant
    s = summary if summary is not None else measure_summary(state, coeffs)
    b0, mb = state.boundary
    xb_pos = state.boundary_position()
    births = float(np.dot(coeffs.beta(t, s, state.x), state.m)) + float(coeffs.beta(t, s, np.array([xb_pos]))[0]) * mb
    if variant is EbtVariant.SIMPLIFIED:
        at = np.array([b0])
        return (float(coeffs.b(t, s, at)[0]), -float(coeffs.c(t, s, at)[0]) * mb + births)
    at = np.array([state.x_b])
    b_ = float(coeffs.b(t, s, at)[0])
    db = float(coeffs.db_dx(t, s, at)[0])
    c_ = float(coeffs.c(t, s, at)[0])
    dc = float(coeffs.dc_dx(t, s, at)[0])
    dpi = b_ * mb + db * b0 - c_ * b0
    if variant is EbtVariant.STAR:
        dpi -= dc * b0 * xb_pos
    dm = -c_ * mb - dc * b0 + births
    return dpi, dm


def euler_step(state: CohortState, coeffs: CoefficientSet, h, variant=None) -> CohortState:
    """One explicit Euler step; coefficients and the summary are taken at the pre-step state."""
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h!r}")
    variant = EbtVariant.parse(variant) if variant is not None else state.variant
    s = measure_summary(state, coeffs)
    dx, dm = rhs_internal(state.t, state, coeffs, s)
    d0, d1 = rhs_boundary(state.t, state, coeffs, variant, s)
    x = state.x + h * dx
    m = state.m + h * dm
    boundary = (state.boundary[0] + h * d0, state.boundary[1] + h * d1)
    t = state.t + h
    if not (math.isfinite(boundary[0]) and math.isfinite(boundary[1])):
        raise BlowUpError(t, -1, f"non-finite boundary cohort at t={t:.6g}")
    if not (np.isfinite(x).all() and np.isfinite(m).all()):
        bad = int(np.flatnonzero(~(np.isfinite(x) & np.isfinite(m)))[0])
        raise BlowUpError(t, bad)
    return replace(state, x=x, m=m, boundary=boundary, t=t, variant=variant)


def internalize(state: CohortState) -> CohortState:
    """Freeze the boundary cohort into an internal one and open a fresh empty boundary cohort.

    A boundary cohort with zero mass is dropped; a negative one raises
    :class:`AnomalyError`.
    """
    mb = state.boundary[1]
    if mb < 0:
        raise AnomalyError(Anomaly.NEGATIVE_BOUNDARY_MASS, state.t,
                           f"boundary cohort has negative mass {mb:.3g} at internalisation t={state.t:.6g}")
    x, m = state.x, state.m
    if mb > 0:
        x = np.append(x, state.boundary_position())
        m = np.append(m, mb)
    return replace(state, x=x, m=m, boundary=_empty_boundary(state.variant, state.x_b))


def detect_anomalies(state: CohortState, tol=0.0):
    """Flags describing an unhealthy boundary cohort."""
    flags = []
    b0, mb = state.boundary
    if not (math.isfinite(b0) and math.isfinite(mb)) or not (np.isfinite(state.x).all() and np.isfinite(state.m).all()):
        return [Anomaly.NONFINITE]
    if mb < -tol:
        flags.append(Anomaly.NEGATIVE_BOUNDARY_MASS)
    if state.variant is not EbtVariant.SIMPLIFIED and b0 < -tol:
        flags.append(Anomaly.NEGATIVE_OFFSET)
    if len(state.x) and mb > 0 and state.boundary_position() > float(np.min(state.x)) + tol:
        flags.append(Anomaly.BOUNDARY_OVERTAKES)
    return flags


@dataclass
class RunReport:
    """Outcome of a run: first occurrence time of each anomaly and abort information."""

    anomalies: dict = field(default_factory=dict)
    aborted: bool = False
    abort_reason: str | None = None
    abort_time: float | None = None
    abort_index: int | None = None
    min_mass: float = math.inf
    mass_history: list = field(default_factory=list)
    runtime_s: float = 0.0

    def note(self, flag, t):
        self.anomalies.setdefault(flag, t)

    @property
    def flags(self):
        return [getattr(f, "value", f) for f in sorted(self.anomalies, key=self.anomalies.get)]

    @property
    def first_anomaly(self):
        return self.flags[0] if self.anomalies else None


def run(initial: DiscreteMeasure, coeffs: CoefficientSet, variant="simplified", n_intervals=1, n_substeps=1,
        t_final=1.0, on_anomaly="record", track_mass=False):
    """Integrate from ``initial`` over ``[0, t_final]`` with ``n_intervals`` internalisations.

    Returns ``(measure, report)``; the measure is ``None`` when the run was
    aborted. With ``on_anomaly="abort"`` the first boundary anomaly ends the
    run; with ``"record"`` only non-finite values and a negative boundary mass
    at internalisation do.

    The loop works on preallocated buffers and performs the same arithmetic as
    repeated :func:`euler_step` / :func:`internalize` calls.
    """
    variant = EbtVariant.parse(variant)
    K = check_positive_int(n_intervals, "n_intervals")
    J = check_positive_int(n_substeps, "n_substeps")
    T = check_positive_float(t_final, "t_final", allow_zero=True)
    if on_anomaly not in ("record", "abort"):
        raise ValueError("on_anomaly must be 'record' or 'abort'")
    report = RunReport()
    start = time.perf_counter()
    x_b = initial.x_b
    n = len(initial)
    X = np.empty(n + K + 1)
    M = np.empty(n + K + 1)
    X[:n] = initial.points
    M[:n] = initial.masses
    report.min_mass = float(M[:n].min()) if n else math.inf
    simplified = variant is EbtVariant.SIMPLIFIED
    star = variant is EbtVariant.STAR
    at_xb = np.array([x_b])
    h = T / (K * J) if T > 0 else 0.0
    pi = mb = 0.0

    def abort(flag, t):
        report.note(flag, t)
        report.aborted, report.abort_reason, report.abort_time = True, getattr(flag, "value", flag), t

    for k in range(K if T > 0 else 0):
        # fresh boundary cohort in slot n
        pi = mb = 0.0
        X[n] = x_b
        M[n] = 0.0
        for j in range(J):
            t = T * (k * J + j) / (K * J)
            t_next = T * (k * J + j + 1) / (K * J)
            xs, ms = X[: n + 1], M[: n + 1]
            if not simplified:
                X[n] = x_b + pi / mb if mb > 0 else x_b
            M[n] = mb
            s = coeffs.summarize(t, xs, ms)
            births = float(np.dot(coeffs.beta(t, s, xs), ms))
            if simplified:
                vel = coeffs.b(t, s, xs)
                death = coeffs.c(t, s, xs)
                xs += h * vel
                ms -= h * death * ms
                ms[n] += h * births
                mb = float(ms[n])
            else:
                xi, mi = X[:n], M[:n]
                vel = coeffs.b(t, s, xi)
                death = coeffs.c(t, s, xi)
                b0 = float(coeffs.b(t, s, at_xb)[0])
                db0 = float(coeffs.db_dx(t, s, at_xb)[0])
                c0 = float(coeffs.c(t, s, at_xb)[0])
                dc0 = float(coeffs.dc_dx(t, s, at_xb)[0])
                dpi = b0 * mb + db0 * pi - c0 * pi
                if star:
                    dpi -= dc0 * pi * X[n]
                dmb = -c0 * mb - dc0 * pi + births
                xi += h * vel
                mi -= h * death * mi
                pi, mb = pi + h * dpi, mb + h * dmb
                X[n] = x_b + pi / mb if mb > 0 else x_b
                M[n] = mb
            if not (math.isfinite(pi) and math.isfinite(mb)):
                abort(Anomaly.NONFINITE, t_next)
                report.abort_index = -1  # the boundary cohort
                break
            if mb < report.min_mass:
                report.min_mass = mb
            # boundary anomalies
            flags = []
            if mb < 0:
                flags.append(Anomaly.NEGATIVE_BOUNDARY_MASS)
            if not simplified and pi < 0:
                flags.append(Anomaly.NEGATIVE_OFFSET)
            if n and mb > 0 and X[n] > X[:n].min():
                flags.append(Anomaly.BOUNDARY_OVERTAKES)
            for f in flags:
                report.note(f, t_next)
            fatal = [f for f in flags if f is not Anomaly.NEGATIVE_OFFSET]
            if fatal and on_anomaly == "abort":
                abort(fatal[0], t_next)
                break
            if track_mass:
                report.mass_history.append((t_next, float(ms.sum())))
        if report.aborted:
            break
        t_k = T * (k + 1) / K
        if not (np.isfinite(X[:n]).all() and np.isfinite(M[:n]).all()):
            bad = int(np.flatnonzero(~(np.isfinite(X[:n]) & np.isfinite(M[:n])))[0])
            abort(Anomaly.NONFINITE, t_k)
            report.abort_index = bad
            break
        if n:
            report.min_mass = min(report.min_mass, float(M[:n].min()))
        report.min_mass = min(report.min_mass, mb)
        # internalisation
        if mb < 0:
            abort(Anomaly.NEGATIVE_BOUNDARY_MASS, t_k)
            break
        if mb > 0:
            M[n] = mb
            n += 1
    report.runtime_s = time.perf_counter() - start
    if not report.aborted and n and M[:n].min() < 0:
        # an Euler factor 1 - h c below zero; the result is not a measure
        abort("m<0", T)
    if report.aborted:
        return None, report
    return canonicalize(DiscreteMeasure(X[:n], M[:n], x_b)), report
