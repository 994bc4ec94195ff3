"""Split-up scheme: per interval, transport with frozen velocity, then growth and birth with frozen rates."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .ebt import Anomaly, RunReport
from .measure import DiscreteMeasure, canonicalize
from .models import CoefficientSet
from .validation import check_positive_float, check_positive_int


@dataclass(frozen=True, eq=False)
class SplitStepRecord:
    """Frozen evaluation context of one interval."""

    k: int
    t_k: float
    summary_start: object  # summary of mu_{t_k}, freezes b
    summary_transported: object  # summary of the transported measure, freezes c and beta
    positions_before: np.ndarray
    positions_after: np.ndarray
    c_values: np.ndarray
    beta_values: np.ndarray


def transport_substep(positions, b_k, h, n_substeps):
    """``n_substeps`` Euler steps of ``dx/dt = b_k(x)`` with step ``h``."""
    x = np.array(positions, dtype=float)
    for _ in range(n_substeps):
        x = x + h * b_k(x)
    if not np.isfinite(x).all():
        raise FloatingPointError("non-finite position in transport step")
    return x


def growth_substep(masses, positions, c_k, beta_k, h, n_substeps, boundary_index=-1):
    """Euler steps of the mass equations at fixed positions.

    ``c_k`` and ``beta_k`` are the frozen rate functions of ``x``; they are
    evaluated once, at the given positions, and reused by every substep. The
    cohort at ``boundary_index`` (the newly created one at ``x_b``) also
    receives the births, which sum ``beta_k(x_j) m_j`` over all cohorts
    including itself.
    """
    m = np.array(masses, dtype=float)
    x = np.asarray(positions, dtype=float)
    c = np.asarray(c_k(x), dtype=float)
    beta = np.asarray(beta_k(x), dtype=float)
    decay = 1.0 - h * c
    for _ in range(n_substeps):
        births = float(np.dot(beta, m))
        m = m * decay
        m[boundary_index] += h * births
    return m


def run(initial: DiscreteMeasure, coeffs: CoefficientSet, n_intervals=1, n_substeps=1, t_final=1.0,
        record_steps=False, track_mass=False):
    """Split-up integration over ``[0, t_final]``; returns ``(measure, report)``.

    With ``record_steps`` the report carries one :class:`SplitStepRecord` per
    interval in ``report.steps``.
    """
    K = check_positive_int(n_intervals, "n_intervals")
    J = check_positive_int(n_substeps, "n_substeps")
    T = check_positive_float(t_final, "t_final", allow_zero=True)
    report = RunReport()
    report.steps = []
    start = time.perf_counter()
    x = np.array(initial.points, dtype=float)
    m = np.array(initial.masses, dtype=float)
    x_b = initial.x_b
    dt = T / K
    h = dt / J
    report.min_mass = float(m.min()) if len(m) else math.inf
    if T > 0:
        for k in range(K):
            t_k = T * k / K
            s0 = coeffs.summarize(t_k, x, m)
            x_before = x
            try:
                x = transport_substep(x, lambda y: coeffs.b(t_k, s0, y), h, J)
            except FloatingPointError:
                report.note(Anomaly.NONFINITE, t_k + dt)
                report.aborted, report.abort_reason, report.abort_time = True, Anomaly.NONFINITE.value, t_k + dt
                break
            # index shift: new empty cohort at x_b; its zero mass leaves the summary unchanged
            x = np.append(x, x_b)
            m = np.append(m, 0.0)
            s1 = coeffs.summarize(t_k, x, m)
            frozen = {}

            def c_k(y, s1=s1, t_k=t_k):
                frozen["c"] = coeffs.c(t_k, s1, y)
                return frozen["c"]

            def beta_k(y, s1=s1, t_k=t_k):
                frozen["beta"] = coeffs.beta(t_k, s1, y)
                return frozen["beta"]

            m = growth_substep(m, x, c_k, beta_k, h, J)
            if record_steps:
                report.steps.append(SplitStepRecord(k, t_k, s0, s1, x_before, x[:-1], frozen["c"], frozen["beta"]))
            if not np.isfinite(m).all():
                report.note(Anomaly.NONFINITE, t_k + dt)
                report.aborted, report.abort_reason, report.abort_time = True, Anomaly.NONFINITE.value, t_k + dt
                break
            mn = float(m.min())
            report.min_mass = min(report.min_mass, mn)
            if mn < 0:
                report.note("m<0", t_k + dt)
            if track_mass:
                report.mass_history.append((T * (k + 1) / K, float(np.sum(m))))
    report.runtime_s = time.perf_counter() - start
    if report.aborted:
        return None, report
    keep = m != 0
    if np.any(m[keep] < 0):
        report.aborted, report.abort_reason, report.abort_time = True, "m<0", T
        return None, report
    return canonicalize(DiscreteMeasure(x[keep], m[keep], x_b)), report
