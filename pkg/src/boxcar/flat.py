"""Flat metric (bounded Lipschitz distance) between discrete measures.

For atomic measures only the values of the test function on the merged support
``z_1 < ... < z_n`` matter, so the supremum reduces to the chain-constrained LP

    maximise  sum_i d_i psi_i
    s.t.      |psi_i| <= 1,   |psi_{i+1} - psi_i| <= z_{i+1} - z_i

with ``d_i`` the signed mass of ``mu - nu`` at ``z_i``. The piecewise-linear
interpolation of any feasible profile is 1-Lipschitz and bounded by 1, and
smoothing it changes the objective by an arbitrarily small amount, so the LP
optimum equals the supremum over C^1 test functions.

The LP is solved exactly by dynamic programming along the chain. The value
function ``V_i(psi) = d_i psi + max_{|psi' - psi| <= gap} V_{i-1}(psi')`` is
concave and piecewise linear on ``[-1, 1]``; it is stored as its slope
breakpoints split into the part left of the maximum (``L``) and right of it
(``R``). Taking the windowed maximum shifts ``L`` left and ``R`` right by the
gap, adding ``d_i psi`` moves the maximum across breakpoints. Both halves stay
sorted, so plain arrays used as stacks suffice and a run costs ``O(n)``
amortised work in practice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .measure import DiscreteMeasure, canonicalize


@dataclass(frozen=True, eq=False)
class TestFunctionProfile:
    """Values of an optimal test function on the merged support."""

    __test__ = False  # not a pytest class

    positions: np.ndarray
    values: np.ndarray

    def violation(self) -> float:
        """Largest violation of ``|psi| <= 1`` and the 1-Lipschitz constraint (0 if feasible)."""
        if len(self.values) == 0:
            return 0.0
        v = max(0.0, float(np.max(np.abs(self.values))) - 1.0)
        if len(self.values) > 1:
            lip = np.abs(np.diff(self.values)) - np.diff(self.positions)
            v = max(v, float(np.max(lip)))
        return v

    def __call__(self, x):
        """Piecewise-linear interpolation, constant outside the support."""
        if len(self.positions) == 0:
            return np.zeros_like(np.asarray(x, dtype=float))
        return np.interp(x, self.positions, self.values)


@dataclass(frozen=True, eq=False)
class FlatDistanceResult:
    distance: float
    optimizer: TestFunctionProfile
    differences: np.ndarray

    def __float__(self):
        return self.distance

    def certificate_value(self) -> float:
        return float(np.dot(self.optimizer.values, self.differences))


def signed_difference(mu: DiscreteMeasure, nu: DiscreteMeasure):
    """Merged sorted support of ``mu`` and ``nu`` and the masses of ``mu - nu`` on it."""
    x = np.concatenate([mu.points, nu.points])
    d = np.concatenate([mu.masses, -nu.masses])
    if len(x) == 0:
        return x, d
    order = np.argsort(x, kind="stable")
    x, d = x[order], d[order]
    starts = np.flatnonzero(np.concatenate(([True], np.diff(x) > 0)))
    return x[starts], np.add.reduceat(d, starts)


@njit(cache=True)
def _chain_dp(z, d):
    n = len(z)
    cap = 2 * n + 4
    l_pos = np.empty(cap)
    l_w = np.empty(cap)
    r_pos = np.empty(cap)
    r_w = np.empty(cap)
    l_lo = 0
    l_hi = 0  # L occupies l_lo..l_hi-1, top (nearest the maximum) at l_hi-1
    r_lo = 0
    r_hi = 0  # R occupies r_lo..r_hi-1, top (smallest position) at r_hi-1
    off_l = 0.0
    off_r = 0.0
    best = 0.0
    top_lo = np.empty(n)
    top_hi = np.empty(n)

    for i in range(n):
        if i > 0:
            gap = z[i] - z[i - 1]
            off_l -= gap
            off_r += gap
            while l_lo < l_hi and l_pos[l_lo] + off_l < -1.0:
                l_lo += 1
            while r_lo < r_hi and r_pos[r_lo] + off_r > 1.0:
                r_lo += 1
            if l_lo == l_hi:
                l_lo = 0
                l_hi = 0
            if r_lo == r_hi:
                r_lo = 0
                r_hi = 0

        a = -1.0
        if l_hi > l_lo:
            a = max(a, l_pos[l_hi - 1] + off_l)
        b = 1.0
        if r_hi > r_lo:
            b = min(b, r_pos[r_hi - 1] + off_r)

        di = d[i]
        if di > 0.0:
            pos = b
            val = best + di * pos
            c = di
            while c > 0.0:
                if r_hi > r_lo and r_pos[r_hi - 1] + off_r < 1.0:
                    p = r_pos[r_hi - 1] + off_r
                    val += c * (p - pos)
                    pos = p
                    w = r_w[r_hi - 1]
                    if w <= c:
                        r_hi -= 1
                        c -= w
                        wl = w
                    else:
                        r_w[r_hi - 1] = w - c
                        wl = c
                        c = 0.0
                    l_pos[l_hi] = p - off_l
                    l_w[l_hi] = wl
                    l_hi += 1
                else:
                    val += c * (1.0 - pos)
                    l_pos[l_hi] = 1.0 - off_l
                    l_w[l_hi] = c
                    l_hi += 1
                    c = 0.0
            best = val
        elif di < 0.0:
            pos = a
            val = best + di * pos
            c = -di
            while c > 0.0:
                if l_hi > l_lo and l_pos[l_hi - 1] + off_l > -1.0:
                    p = l_pos[l_hi - 1] + off_l
                    val += c * (pos - p)
                    pos = p
                    w = l_w[l_hi - 1]
                    if w <= c:
                        l_hi -= 1
                        c -= w
                        wr = w
                    else:
                        l_w[l_hi - 1] = w - c
                        wr = c
                        c = 0.0
                    r_pos[r_hi] = p - off_r
                    r_w[r_hi] = wr
                    r_hi += 1
                else:
                    val += c * (pos + 1.0)
                    r_pos[r_hi] = -1.0 - off_r
                    r_w[r_hi] = c
                    r_hi += 1
                    c = 0.0
            best = val

        # the stacks only grow at their tops; compact when the bottom ran away
        if l_hi >= cap - 1:
            k = l_hi - l_lo
            l_pos[:k] = l_pos[l_lo:l_hi].copy()
            l_w[:k] = l_w[l_lo:l_hi].copy()
            l_lo, l_hi = 0, k
        if r_hi >= cap - 1:
            k = r_hi - r_lo
            r_pos[:k] = r_pos[r_lo:r_hi].copy()
            r_w[:k] = r_w[r_lo:r_hi].copy()
            r_lo, r_hi = 0, k

        a = -1.0
        if l_hi > l_lo:
            a = max(a, min(1.0, l_pos[l_hi - 1] + off_l))
        b = 1.0
        if r_hi > r_lo:
            b = min(b, max(-1.0, r_pos[r_hi - 1] + off_r))
        top_lo[i] = a
        top_hi[i] = max(a, b)

    psi = np.empty(n)
    if n == 0:
        return best, psi
    cur = min(max(0.0, top_lo[n - 1]), top_hi[n - 1])
    psi[n - 1] = cur
    for i in range(n - 2, -1, -1):
        gap = z[i + 1] - z[i]
        v = min(max(cur, top_lo[i]), top_hi[i])
        v = min(max(v, cur - gap), cur + gap)
        v = min(max(v, -1.0), 1.0)
        psi[i] = v
        cur = v
    return best, psi


def flat_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> FlatDistanceResult:
    """Exact flat distance between two discrete measures, with an optimal test profile."""
    z, d = signed_difference(mu, nu)
    if len(z) == 0:
        return FlatDistanceResult(0.0, TestFunctionProfile(z, np.empty(0)), d)
    best, psi = _chain_dp(np.ascontiguousarray(z), np.ascontiguousarray(d))
    return FlatDistanceResult(max(float(best), 0.0), TestFunctionProfile(z, psi), d)


def flat_distance_bruteforce(mu: DiscreteMeasure, nu: DiscreteMeasure, grid_step=0.01, max_support=8,
                             relaxed=False) -> float:
    """Best objective over test profiles with values on the grid ``-1, -1+step, ..., 1``.

    Exhaustive over all grid values at every support point (a windowed maximum
    per chain link). Intended as a test oracle for small supports only.

    By default a grid profile may move ``floor(gap / step)`` grid steps per
    link, so every candidate is feasible and the result is a lower bound on
    the flat distance. With ``relaxed`` the allowance is rounded up instead;
    that problem contains every feasible profile rounded to the grid and its
    value is at least the flat distance minus ``step/2 * sum |d_i|``. When
    the support lies on the grid both rules coincide.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    z, d = signed_difference(mu, nu)
    if len(z) > max_support:
        raise ValueError(f"merged support of size {len(z)} exceeds {max_support}")
    if len(z) == 0:
        return 0.0
    n_grid = int(np.floor(2.0 / grid_step + 1e-9)) + 1
    grid = -1.0 + grid_step * np.arange(n_grid)
    value = d[0] * grid
    for i in range(1, len(z)):
        steps = (z[i] - z[i - 1]) / grid_step
        r = int(np.ceil(steps - 1e-9)) if relaxed else int(np.floor(steps + 1e-9))
        if r >= n_grid:
            windowed = np.full(n_grid, value.max())
        else:
            windowed = _windowed_max(value, r)
        value = windowed + d[i] * grid
    return float(value.max())


def _windowed_max(values, r):
    """``out[j] = max(values[j-r : j+r+1])`` in linear time (block prefix/suffix maxima)."""
    w = 2 * r + 1
    n = len(values)
    n_blocks = -(-(n + 2 * r) // w)
    padded = np.full(n_blocks * w, -np.inf)
    padded[r:r + n] = values
    blocks = padded.reshape(n_blocks, w)
    prefix = np.maximum.accumulate(blocks, axis=1).ravel()
    suffix = np.maximum.accumulate(blocks[:, ::-1], axis=1)[:, ::-1].ravel()
    # window starting at s covers the tail of block s // w and the head of the next one
    s = np.arange(n)
    return np.maximum(suffix[s], prefix[s + w - 1])


def flat_distance_upper_bound(mu: DiscreteMeasure, nu: DiscreteMeasure, pairing=None) -> float:
    """``max(1, sum m_i) * sum_i (|x_i - y_p(i)| + |m_i - n_p(i)|)`` for a pairing of atoms.

    ``pairing[i]`` is the index of the atom of ``nu`` matched to atom ``i`` of
    ``mu`` (identity when omitted). Atoms are taken in storage order.
    """
    if len(mu) != len(nu):
        raise ValueError(f"pairing needs equal atom counts, got {len(mu)} and {len(nu)}")
    pairing = np.arange(len(mu)) if pairing is None else np.asarray(pairing)
    if sorted(pairing.tolist()) != list(range(len(mu))):
        raise ValueError("pairing must be a permutation of the atom indices")
    y, n = nu.points[pairing], nu.masses[pairing]
    spread = np.sum(np.abs(mu.points - y) + np.abs(mu.masses - n))
    return float(max(1.0, np.sum(np.abs(mu.masses))) * spread)


def total_variation(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    _, d = signed_difference(mu, nu)
    return float(np.sum(np.abs(d)))


def wasserstein1(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """1-Wasserstein distance on the line, ``int |F_mu - F_nu| dx``, for equal total masses."""
    z, d = signed_difference(mu, nu)
    if len(z) < 2:
        return 0.0
    cdf = np.cumsum(d)[:-1]
    return float(np.sum(np.abs(cdf) * np.diff(z)))


def flat_distance_between(mu, nu) -> float:
    """Convenience wrapper returning only the distance; accepts non-canonical input."""
    return flat_distance(canonicalize(mu), canonicalize(nu)).distance
