"""Discrete nonnegative measures, their mollification and L1 comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .validation import MeasureValidationError, check_positions_masses

N_QUAD = 64


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite sum of Dirac masses ``sum_i masses[i] * delta(points[i])``.

    Instances are treated as immutable values. Positions are not required to be
    sorted; call :meth:`canonical` to get the sorted, merged form.
    """

    points: np.ndarray
    masses: np.ndarray
    x_b: float = 0.0

    def __post_init__(self):
        points, masses = check_positions_masses(self.points, self.masses)
        points.flags.writeable = False
        masses.flags.writeable = False
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "masses", masses)
        object.__setattr__(self, "x_b", float(self.x_b))

    @classmethod
    def empty(cls, x_b=0.0):
        return cls(np.empty(0), np.empty(0), x_b)

    def __len__(self):
        return len(self.points)

    def __repr__(self):
        return f"DiscreteMeasure(n={len(self)}, mass={self.total_mass():.6g}, x_b={self.x_b})"

    def total_mass(self) -> float:
        return total_mass(self)

    def canonical(self) -> "DiscreteMeasure":
        return canonicalize(self)

    def is_canonical(self) -> bool:
        return bool(np.all(np.diff(self.points) > 0) and np.all(self.masses > 0))

    def scaled(self, factor: float) -> "DiscreteMeasure":
        if factor < 0:
            raise MeasureValidationError("scaling factor must be nonnegative")
        return DiscreteMeasure(self.points, self.masses * factor, self.x_b)

    def restrict(self, lo: float, hi: float) -> "DiscreteMeasure":
        """Atoms with ``lo <= x <= hi``."""
        keep = (self.points >= lo) & (self.points <= hi)
        return DiscreteMeasure(self.points[keep], self.masses[keep], self.x_b)

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.points, self.masses])


def as_measure(X, x_b=0.0) -> DiscreteMeasure:
    """Accept a :class:`DiscreteMeasure` or an ``(n, 2)`` array of ``(x, mass)`` rows."""
    if isinstance(X, DiscreteMeasure):
        return X
    arr = np.asarray(X, dtype=float)
    if arr.size == 0:
        return DiscreteMeasure.empty(x_b)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise MeasureValidationError(f"expected an (n, 2) array of (x, mass) rows, got shape {arr.shape}")
    return DiscreteMeasure(arr[:, 0], arr[:, 1], x_b)


def canonicalize(measure: DiscreteMeasure) -> DiscreteMeasure:
    """Sort atoms, merge duplicate positions and drop zero-mass atoms."""
    order = np.argsort(measure.points, kind="stable")
    x = measure.points[order]
    m = measure.masses[order]
    if len(x) > 1:
        starts = np.flatnonzero(np.concatenate(([True], np.diff(x) > 0)))
        if len(starts) < len(x):
            # sequential left-to-right sums inside each group of equal positions
            merged = np.array([math.fsum(m[a:b]) for a, b in zip(starts, np.append(starts[1:], len(x)))])
            x, m = x[starts], merged
    keep = m > 0
    return DiscreteMeasure(x[keep], m[keep], measure.x_b)


def total_mass(measure: DiscreteMeasure) -> float:
    """Correctly rounded sum of the atom masses."""
    return math.fsum(measure.masses)


@dataclass(frozen=True, eq=False)
class PiecewiseConstantDensity:
    """Density equal to ``values[i]`` on ``[breakpoints[i], breakpoints[i+1])``.

    ``clipping_defect`` is the mass lost (positive) or gained (negative) by
    clipping the two end cells to the domain.
    """

    breakpoints: np.ndarray
    values: np.ndarray
    domain: tuple = (0.0, 1.0)
    clipping_defect: float = 0.0
    source_mass: float = field(default=0.0)

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if len(v) != len(bp) - 1:
            raise ValueError("need len(values) == len(breakpoints) - 1")
        if np.any(np.diff(bp) < 0):
            raise ValueError("breakpoints must be nondecreasing")
        if np.any(v < 0):
            raise ValueError("density values must be nonnegative")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", v)

    def __call__(self, x):
        """Evaluate the density; zero outside ``[breakpoints[0], breakpoints[-1])``."""
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breakpoints, x, side="right") - 1
        inside = (idx >= 0) & (idx < len(self.values))
        out = np.zeros_like(x)
        out[inside] = self.values[idx[inside]]
        return out

    def integral(self) -> float:
        return float(np.sum(self.values * np.diff(self.breakpoints)))

    @classmethod
    def constant(cls, value, lo=0.0, hi=1.0):
        return cls(np.array([lo, hi]), np.array([float(value)]), (lo, hi), 0.0, value * (hi - lo))


def mollify(measure: DiscreteMeasure, domain=(0.0, 1.0)) -> PiecewiseConstantDensity:
    """Piecewise-constant density built from a Dirac sum.

    Atom ``i`` is spread over ``[(x[i-1]+x[i])/2, (x[i]+x[i+1])/2)`` with value
    ``2 m[i] / (x[i+1] - x[i-1])``. The missing outer neighbours are reflected,
    ``x[0] = 2 x[1] - x[2]``, and the resulting cell edges are clipped to the
    domain.
    """
    lo, hi = map(float, domain)
    mu = canonicalize(measure).restrict(lo, hi)
    if len(mu) < 2:
        raise ValueError("mollification needs at least 2 atoms inside the domain")
    x, m = mu.points, mu.masses
    ext = np.concatenate(([2 * x[0] - x[1]], x, [2 * x[-1] - x[-2]]))
    values = 2.0 * m / (ext[2:] - ext[:-2])
    edges = 0.5 * (ext[1:] + ext[:-1])
    edges = np.clip(edges, lo, hi)
    defect = float(np.sum(m) - np.sum(values * np.diff(edges)))
    return PiecewiseConstantDensity(edges, values, (lo, hi), defect, total_mass(mu))


def _cell_quadrature(f, lo, hi, n_sub=N_QUAD):
    """Midpoint rule with ``n_sub`` subintervals on each cell ``[lo[i], hi[i]]``.

    Returns ``int_cell f`` per cell. ``f`` must be vectorised.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    w = (hi - lo) / n_sub
    frac = (np.arange(n_sub) + 0.5)
    out = np.empty(len(lo))
    chunk = max(1, (1 << 20) // n_sub)
    for s in range(0, len(lo), chunk):
        sl = slice(s, s + chunk)
        pts = lo[sl, None] + w[sl, None] * frac[None, :]
        out[sl] = np.asarray(f(pts), dtype=float).sum(axis=1) * w[sl]
    return out


def l1_error(density: PiecewiseConstantDensity, exact, domain=None) -> float:
    """``int |density - exact| dx`` over the domain.

    Each density cell is split into 64 midpoint-rule subintervals; the parts of
    the domain not covered by cells are compared against zero density. When
    ``exact`` is itself piecewise constant its breakpoints are added to the
    cells, which makes the result exact and symmetric in the two arguments.
    """
    lo, hi = map(float, domain if domain is not None else density.domain)
    bp = density.breakpoints
    if isinstance(exact, PiecewiseConstantDensity):
        bp = np.concatenate((bp, exact.breakpoints))
    bp = np.clip(bp, lo, hi)
    edges = np.unique(np.concatenate(([lo], bp, [hi])))
    a, b = edges[:-1], edges[1:]
    mid = 0.5 * (a + b)
    vals = density(mid)

    def integrand(pts):
        idx = np.minimum(np.searchsorted(b, pts[:, 0], side="right"), len(vals) - 1)
        return np.abs(vals[idx][:, None] - exact(pts))

    return float(np.sum(_cell_quadrature(integrand, a, b)))


def write_measure_csv(measure: DiscreteMeasure, path, metadata=None):
    """Write ``x,mass`` rows with 17 significant digits. ``metadata`` goes into ``#`` comment lines."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}={val}\n")
        fh.write("x,mass\n")
        for x, m in zip(measure.points, measure.masses):
            fh.write(f"{x:.17g},{m:.17g}\n")
    return path


def read_measure_csv(path, x_b=0.0, with_metadata=False):
    metadata = {}
    xs, ms = [], []
    with Path(path).open(encoding="utf-8") as fh:
        header_seen = False
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                metadata[key.strip()] = val.strip()
                continue
            if not header_seen:
                if line.replace(" ", "") != "x,mass":
                    raise MeasureValidationError(f"{path}: expected header 'x,mass', got {line!r}")
                header_seen = True
                continue
            x, m = line.split(",")
            xs.append(float(x))
            ms.append(float(m))
    measure = DiscreteMeasure(np.array(xs), np.array(ms), x_b)
    return (measure, metadata) if with_metadata else measure
