"""Experiment driver: initial data, error measurement, convergence studies and the boundary-stress sweep."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import ebt, splitup
from .flat import flat_distance
from .measure import (DiscreteMeasure, _cell_quadrature, l1_error, mollify, read_measure_csv,
                      write_measure_csv)
from .models import TestCase, test_case
from .validation import check_positive_float, check_positive_int

SCHEMES = ("sebt", "ebt", "ebt-star", "splitup")
M_CAP = 1 << 20
LONG_RUN_NODES = 1 << 17


@dataclass
class SimulationConfig:
    scheme: str = "sebt"
    test_case: int = 1
    I: int = 16
    K: int = 4
    J: int = 4
    T: float = 1.0
    metric: str = "flat"
    reference_path: Optional[str] = None

    def __post_init__(self):
        self.scheme = normalize_scheme(self.scheme)
        if self.test_case not in (1, 2, 3):
            raise ValueError(f"unknown test case {self.test_case!r}")
        for name in ("I", "K", "J"):
            check_positive_int(getattr(self, name), name)
        check_positive_float(self.T, "T", allow_zero=True)
        if self.metric not in ("flat", "l1", "both", "none"):
            raise ValueError(f"metric must be flat, l1, both or none, got {self.metric!r}")
        if self.test_case == 3 and self.metric != "none" and self.reference_path is None:
            raise ValueError("test case 3 has no exact solution: pass a reference measure file")

    @property
    def dt(self):
        return self.T / self.K

    @property
    def h(self):
        return self.T / (self.K * self.J)


def normalize_scheme(name):
    key = str(name).lower().replace("_", "-")
    aliases = {"simplified": "sebt", "original": "ebt", "star": "ebt-star", "ebt*": "ebt-star",
               "su": "splitup", "split-up": "splitup"}
    key = aliases.get(key, key)
    if key not in SCHEMES:
        raise ValueError(f"unknown scheme {name!r}; choose from {', '.join(SCHEMES)}")
    return key


@dataclass
class ConvergenceRow:
    I: int
    K: int
    J: int
    e_flat: Optional[float] = None
    e_l1: Optional[float] = None
    o_flat: Optional[float] = None
    o_l1: Optional[float] = None
    runtime_ms: float = 0.0
    anomalies: list = field(default_factory=list)
    e_x: Optional[float] = None
    bias_bound: Optional[float] = None
    min_mass: Optional[float] = None

    @property
    def aborted(self):
        return self.e_flat is None and self.e_l1 is None


# -- initial data and exact-solution discretisation -------------------------

def cell_midpoint_measure(density, domain, n_cells, x_b=None):
    """One atom per equal-width cell at its midpoint carrying the cell integral of ``density``.

    Returns ``(measure, e_x)`` where ``e_x = sum_i int_cell |x - x_i| density(x) dx``
    bounds the flat distance between the density and the atoms.
    """
    lo, hi = map(float, domain)
    n = check_positive_int(n_cells, "n_cells")
    edges = np.linspace(lo, hi, n + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    dens = lambda pts: _checked(density, pts)
    masses = _cell_quadrature(dens, edges[:-1], edges[1:])
    spread = _cell_quadrature(lambda pts: np.abs(pts - pts.mean(axis=1, keepdims=True)) * dens(pts),
                              edges[:-1], edges[1:])
    keep = masses > 0
    measure = DiscreteMeasure(mid[keep], masses[keep], lo if x_b is None else x_b)
    return measure, float(np.sum(spread))


def _checked(density, pts):
    vals = np.asarray(density(pts), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("density is not finite on the domain")
    if np.any(vals < 0):
        raise ValueError("density must be nonnegative")
    return vals


def approximate_initial(u0, domain, I):
    """Approximate the initial density by ``I`` cell-midpoint atoms; returns ``(measure, e_x)``."""
    return cell_midpoint_measure(u0, domain, I)


def discretize_exact(case: TestCase, t, M):
    """The exact solution at time ``t`` as ``M`` cell-midpoint atoms, with its flat bias bound.

    The bound ``(x_max - x_b) sup u / (4 M)`` dominates the flat distance between
    the density and its discretisation.
    """
    if not case.exact.known:
        raise LookupError("exact solution unknown for this test case; pass a reference measure instead")
    u = case.exact.at(t)
    measure, _ = cell_midpoint_measure(u, case.domain, M)
    lo, hi = case.domain
    return measure, (hi - lo) * case.exact.sup / (4.0 * M)


def order_of_convergence(e_coarse, e_fine):
    """``log2(e_coarse / e_fine)``: the observed order between two consecutive resolutions."""
    return math.log2(e_coarse / e_fine)


# -- single simulation ------------------------------------------------------

def simulate(config: SimulationConfig, case: Optional[TestCase] = None, on_anomaly="record"):
    """Run one scheme on one test case; returns ``(measure, report, e_x)``."""
    case = case or test_case(config.test_case)
    initial, e_x = approximate_initial(case.initial, case.domain, config.I)
    coeffs = case.coefficients
    if config.scheme == "splitup":
        measure, report = splitup.run(initial, coeffs, config.K, config.J, config.T)
    else:
        measure, report = ebt.run(initial, coeffs, config.scheme, config.K, config.J, config.T,
                                  on_anomaly=on_anomaly)
    return measure, report, e_x


def flat_error_vs_exact(measure, case: TestCase, t, resolution=None, min_resolution=0, cap=M_CAP):
    """Flat distance between ``measure`` (restricted to the model domain) and the exact solution.

    The exact density is discretised with ``M`` atoms, starting at
    ``max(resolution, min_resolution)`` and doubled until the bias bound is at
    most a tenth of the measured error or ``cap`` is reached. Returns
    ``(error, bias_bound, M)``.
    """
    lo, hi = case.domain
    mu = measure.restrict(lo, hi)
    M = max(int(resolution or 0), int(min_resolution), 1)
    M = min(M, cap)
    while True:
        ref, bias = discretize_exact(case, t, M)
        err = flat_distance(mu, ref).distance
        if bias <= err / 10 or M >= cap:
            return err, bias, M
        M = min(cap, 2 * M)


def l1_error_vs_exact(measure, case: TestCase, t):
    density = mollify(measure, case.domain)
    return l1_error(density, case.exact.at(t), case.domain)


def flat_error_vs_reference(measure, reference: DiscreteMeasure, domain=None):
    """Flat distance to a reference measure, both restricted to ``domain`` when given."""
    if domain is not None:
        lo, hi = domain
        measure, reference = measure.restrict(lo, hi), reference.restrict(lo, hi)
    return flat_distance(measure, reference).distance


def load_reference(path, x_b=0.0):
    return read_measure_csv(path, x_b=x_b)


def score(config: SimulationConfig, measure, case: TestCase, reference=None):
    """``(e_flat, e_l1, bias_bound)`` for the metrics selected in ``config``; absent values are ``None``."""
    e_flat = e_l1 = bias = None
    if measure is None or config.metric == "none":
        return e_flat, e_l1, bias
    want_flat = config.metric in ("flat", "both")
    want_l1 = config.metric in ("l1", "both")
    if case.exact.known:
        if want_flat:
            e_flat, bias, _ = flat_error_vs_exact(measure, case, config.T, min_resolution=64 * config.I)
        if want_l1:
            e_l1 = l1_error_vs_exact(measure, case, config.T)
    else:
        if reference is None:
            reference = load_reference(config.reference_path, case.coefficients.x_b)
        if want_flat:
            e_flat = flat_error_vs_reference(measure, reference, case.domain)
        if want_l1:
            e_l1 = l1_error(mollify(measure, case.domain), mollify(reference, case.domain), case.domain)
    return e_flat, e_l1, bias


def run_row(config: SimulationConfig, reference=None, on_anomaly="record") -> ConvergenceRow:
    """Simulate and score one configuration."""
    case = test_case(config.test_case)
    t0 = time.perf_counter()
    measure, report, e_x = simulate(config, case, on_anomaly=on_anomaly)
    runtime_ms = 1000.0 * (time.perf_counter() - t0)
    e_flat, e_l1, bias = score(config, measure, case, reference)
    anomalies = list(report.flags)
    if report.aborted and report.abort_reason not in anomalies:
        anomalies.append(report.abort_reason)
    return ConvergenceRow(config.I, config.K, config.J, e_flat, e_l1, runtime_ms=runtime_ms,
                          anomalies=anomalies, e_x=e_x, bias_bound=bias, min_mass=report.min_mass)


# -- studies ----------------------------------------------------------------

def parse_policy(text):
    """Parse ``"K=I/4,J=4"`` into a function ``I -> (K, J)``.

    Each side accepts an integer, ``I`` or ``I/n`` / ``I*n``.
    """
    rules = {}
    for part in str(text).split(","):
        key, sep, expr = part.partition("=")
        key, expr = key.strip().upper(), expr.strip().replace(" ", "")
        if not sep or key not in ("K", "J"):
            raise ValueError(f"bad policy term {part!r}; expected K=... or J=...")
        rules[key] = expr
    if set(rules) != {"K", "J"}:
        raise ValueError("policy must set both K and J")

    def evaluate(expr, I):
        if expr == "I":
            return I
        if expr.startswith("I/"):
            div = int(expr[2:])
            if I % div:
                raise ValueError(f"policy {expr} needs I divisible by {div}, got I={I}")
            return I // div
        if expr.startswith("I*"):
            return I * int(expr[2:])
        return int(expr)

    return lambda I: (evaluate(rules["K"], I), evaluate(rules["J"], I))


def _run_config(args):
    config, reference = args
    return run_row(config, reference)


def convergence_study(base: SimulationConfig, doublings, policy="K=I/4,J=4", n_jobs=1, reference=None):
    """Run ``base`` at ``I, 2I, ..., 2^doublings I`` with ``K, J`` from ``policy``.

    Orders are filled in between consecutive resolutions; rows whose run aborted
    keep their anomaly tokens and get no order. Rows come back sorted by
    ``(I, K, J)`` whatever order the runs finish in.
    """
    doublings = int(doublings)
    if doublings < 0:
        raise ValueError("doublings must be nonnegative")
    rule = parse_policy(policy) if isinstance(policy, str) else policy
    configs = []
    for n in range(doublings + 1):
        I = base.I << n
        K, J = rule(I)
        configs.append(SimulationConfig(base.scheme, base.test_case, I, K, J, base.T, base.metric,
                                        base.reference_path))
    if reference is None and base.reference_path and base.metric != "none":
        reference = load_reference(base.reference_path)
    jobs = [(c, reference) for c in configs]
    if n_jobs and n_jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            rows = list(pool.map(_run_config, jobs))
    else:
        rows = [_run_config(j) for j in jobs]
    rows.sort(key=lambda r: (r.I, r.K, r.J))
    fill_orders(rows)
    return rows


def fill_orders(rows):
    for prev, row in zip(rows, rows[1:]):
        for name in ("flat", "l1"):
            a, b = getattr(prev, "e_" + name), getattr(row, "e_" + name)
            if a is not None and b is not None and a > 0 and b > 0:
                setattr(row, "o_" + name, order_of_convergence(a, b))
    return rows


CSV_COLUMNS = ("I", "K", "J", "e_flat", "e_l1", "o_flat", "o_l1", "runtime_ms", "anomalies")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else str(value)
    return str(value)


def rows_to_csv(rows, path=None):
    """Serialise rows with the study schema; returns the text and writes it when ``path`` is set."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in sorted(rows, key=lambda r: (r.I, r.K, r.J)):
        writer.writerow([r.I, r.K, r.J, _fmt(r.e_flat), _fmt(r.e_l1), _fmt(r.o_flat), _fmt(r.o_l1),
                         f"{r.runtime_ms:.3f}", ";".join(r.anomalies)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_rows_csv(path):
    rows = []
    with Path(path).open(encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            opt = lambda k: float(rec[k]) if rec[k] else None
            rows.append(ConvergenceRow(int(rec["I"]), int(rec["K"]), int(rec["J"]), opt("e_flat"), opt("e_l1"),
                                       opt("o_flat"), opt("o_l1"), float(rec["runtime_ms"]),
                                       [a for a in rec["anomalies"].split(";") if a]))
    return rows


STABILITY_GRID = tuple((I, J) for I in (32, 128, 1024) for J in (1, 2, 8, 32))


@dataclass
class SweepRow:
    scheme: str
    I: int
    J: int
    error: Optional[float]
    anomalies: list
    aborted: bool

    @property
    def outcome(self):
        """The error as text, or the anomaly that ended the run."""
        if self.aborted:
            return self.anomalies[-1] if self.anomalies else "aborted"
        return f"{self.error:.3g}"


def stability_sweep(reference: DiscreteMeasure, schemes=SCHEMES, grid=STABILITY_GRID, on_anomaly="record"):
    """Boundary-stress sweep on test case 3 with ``I = K``: flat error vs ``reference`` or the anomaly."""
    case = test_case(3)
    rows = []
    for scheme in schemes:
        for I, J in grid:
            config = SimulationConfig(scheme, 3, I, I, J, metric="none")
            measure, report, _ = simulate(config, case, on_anomaly=on_anomaly)
            err = None if measure is None else flat_error_vs_reference(measure, reference, case.domain)
            anomalies = list(report.flags)
            if report.aborted and report.abort_reason not in anomalies:
                anomalies.append(report.abort_reason)
            rows.append(SweepRow(config.scheme, I, J, err, anomalies, report.aborted))
    return rows


def generate_reference(out_path, test_case_id=3, nodes=16384, substeps=16, intervals=None, t_final=1.0,
                       allow_long_run=False):
    """Fine simplified-EBT run written as a measure file with its resolution in the header.

    Runs with ``nodes`` above ``LONG_RUN_NODES`` take hours and must be
    requested explicitly with ``allow_long_run``.
    """
    nodes = check_positive_int(nodes, "nodes")
    intervals = nodes if intervals is None else check_positive_int(intervals, "intervals")
    if max(nodes, intervals) > LONG_RUN_NODES and not allow_long_run:
        raise ValueError(f"{nodes} nodes is a long-running reference; pass allow_long_run to proceed")
    case = test_case(test_case_id)
    config = SimulationConfig("sebt", case.id, nodes, intervals, substeps, t_final, metric="none")
    measure, report, _ = simulate(config, case)
    if measure is None:
        raise RuntimeError(f"reference run aborted: {report.abort_reason}")
    write_measure_csv(measure, out_path, metadata={"I_ref": nodes, "K_ref": intervals, "J_ref": substeps,
                                                   "T": t_final, "test_case": case.id})
    return measure
