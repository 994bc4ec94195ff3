import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from boxcar.flat import (flat_distance, flat_distance_between, flat_distance_bruteforce,
                         flat_distance_upper_bound, signed_difference, total_variation, wasserstein1)
from boxcar.measure import DiscreteMeasure, canonicalize

from conftest import measures, random_pair_on_pool


def delta(x, m=1.0):
    return DiscreteMeasure([x], [m])


def lp_value(mu, nu):
    """The chain-constrained LP solved by a generic solver."""
    z, d = signed_difference(mu, nu)
    n = len(z)
    if n == 0:
        return 0.0
    rows, rhs = [], []
    for i in range(n - 1):
        r = np.zeros(n)
        r[i + 1], r[i] = 1.0, -1.0
        rows += [r, -r]
        rhs += [z[i + 1] - z[i]] * 2
    res = linprog(-d, A_ub=np.array(rows) if rows else None, b_ub=rhs or None, bounds=[(-1, 1)] * n,
                  method="highs")
    return -res.fun


class TestExamples:
    def test_identity(self):
        mu = DiscreteMeasure([0.1, 0.7], [1.0, 2.0])
        assert flat_distance(mu, mu).distance == 0.0

    def test_single_atom_vs_zero(self):
        r = flat_distance(delta(0.3, 0.5), DiscreteMeasure.empty())
        assert r.distance == pytest.approx(0.5)
        assert r.optimizer.values[0] == pytest.approx(1.0)

    @pytest.mark.parametrize("d, expected", [(0.5, 0.5), (3.0, 2.0), (1.2, 1.2), (2.0, 2.0)])
    def test_two_diracs(self, d, expected):
        assert flat_distance(delta(0.0), delta(d)).distance == pytest.approx(expected, abs=1e-15)

    def test_spread_vs_concentrated(self):
        mu = DiscreteMeasure([0.2, 0.8], [1.0, 1.0])
        nu = delta(0.5, 2.0)
        exact = flat_distance(mu, nu).distance
        oracle = flat_distance_bruteforce(mu, nu, grid_step=0.001)
        assert exact == pytest.approx(0.6, abs=1e-12)
        assert abs(exact - oracle) <= 0.001 * 4
        assert exact <= total_variation(mu, nu)

    def test_empty_vs_empty(self):
        assert flat_distance(DiscreteMeasure.empty(), DiscreteMeasure.empty()).distance == 0.0


class TestOracle:
    def test_examples(self):
        assert flat_distance_bruteforce(delta(0), delta(0.5), 0.01) == pytest.approx(0.5, abs=0.02)
        mu = DiscreteMeasure([0.1, 0.4], [1.0, 2.0])
        assert flat_distance_bruteforce(mu, mu, 0.01) == pytest.approx(0.0, abs=1e-12)
        assert flat_distance_bruteforce(delta(0.3, 0.5), DiscreteMeasure.empty(), 0.01) == pytest.approx(0.5, abs=0.005)

    def test_refuses_large_support(self):
        mu = DiscreteMeasure(np.linspace(0, 1, 9), np.ones(9))
        with pytest.raises(ValueError):
            flat_distance_bruteforce(mu, DiscreteMeasure.empty(), 0.1)

    def test_rejects_bad_step(self):
        with pytest.raises(ValueError):
            flat_distance_bruteforce(delta(0), delta(1), 0.0)

    def test_sandwich_on_unaligned_supports(self):
        # floor allowance: feasible, so a lower bound; ceil allowance: an upper bound up to step/2 * sum|d|
        rng = np.random.default_rng(11)
        step = 1e-3
        for _ in range(200):
            mu, nu = random_pair_on_pool(rng)
            exact = flat_distance(mu, nu)
            mass = np.abs(exact.differences).sum()
            assert flat_distance_bruteforce(mu, nu, step) <= exact.distance + 1e-12
            assert exact.distance <= flat_distance_bruteforce(mu, nu, step, relaxed=True) + 0.5 * step * mass + 1e-12


class TestAgainstLp:
    def test_random(self):
        rng = np.random.default_rng(3)
        for _ in range(150):
            n = rng.integers(0, 15)
            mu = DiscreteMeasure(rng.uniform(0, 4, n), rng.uniform(0, 2, n))
            k = rng.integers(0, 15)
            nu = DiscreteMeasure(rng.uniform(0, 4, k), rng.uniform(0, 2, k))
            assert flat_distance(mu, nu).distance == pytest.approx(max(lp_value(mu, nu), 0.0), abs=1e-9)

    def test_dense_clustered(self):
        # many small gaps make long runs of active Lipschitz constraints
        rng = np.random.default_rng(5)
        for _ in range(20):
            x = np.cumsum(rng.exponential(0.05, 60))
            mu = DiscreteMeasure(x[::2], rng.uniform(0, 1, 30))
            nu = DiscreteMeasure(x[1::2], rng.uniform(0, 1, 30))
            assert flat_distance(mu, nu).distance == pytest.approx(lp_value(mu, nu), abs=1e-9)


class TestCertificate:
    @given(measures(max_atoms=12), measures(max_atoms=12))
    def test_optimizer_is_feasible_and_attains_value(self, mu, nu):
        r = flat_distance(canonicalize(mu), canonicalize(nu))
        assert r.optimizer.violation() <= 1e-12
        if r.distance > 0:
            assert r.certificate_value() == pytest.approx(r.distance, abs=1e-9)

    def test_profile_interpolates(self):
        r = flat_distance(delta(0.0), delta(0.5))
        assert r.optimizer(0.25) == pytest.approx(0.5 * (r.optimizer.values[0] + r.optimizer.values[1]))


class TestMetricProperties:
    @given(measures(), measures(), measures())
    def test_axioms(self, a, b, c):
        a, b, c = canonicalize(a), canonicalize(b), canonicalize(c)
        ab = flat_distance(a, b).distance
        assert flat_distance(a, a).distance == 0.0
        assert ab == pytest.approx(flat_distance(b, a).distance, abs=1e-9)
        assert ab <= flat_distance(a, c).distance + flat_distance(c, b).distance + 1e-9

    @given(measures(), measures())
    def test_bounded_by_total_variation(self, a, b):
        assert flat_distance_between(a, b) <= total_variation(canonicalize(a), canonicalize(b)) + 1e-9

    @given(measures(min_atoms=1), st.lists(st.floats(0, 3), min_size=1, max_size=6))
    def test_bounded_by_w1_for_equal_mass(self, a, xs):
        a = canonicalize(a)
        if a.total_mass() == 0:
            return
        b = canonicalize(DiscreteMeasure(xs, np.full(len(xs), a.total_mass() / len(xs))))
        assert flat_distance(a, b).distance <= wasserstein1(a, b) + 1e-9

    @given(measures(), measures(), st.floats(0, 10))
    def test_scaling(self, a, b, c):
        a, b = canonicalize(a), canonicalize(b)
        scaled = flat_distance_between(a.scaled(c), b.scaled(c))
        assert scaled == pytest.approx(c * flat_distance(a, b).distance, abs=1e-9)


class TestUpperBound:
    def test_identical(self):
        mu = DiscreteMeasure([0.2, 0.5], [2.0, 1.0])
        assert flat_distance_upper_bound(mu, mu) == 0.0

    def test_single_atoms(self):
        assert flat_distance_upper_bound(delta(0), delta(0.5)) == pytest.approx(0.5)

    def test_two_atoms(self):
        mu = DiscreteMeasure([0.2, 0.5], [2.0, 1.0])
        nu = DiscreteMeasure([0.25, 0.5], [2.0, 0.5])
        bound = flat_distance_upper_bound(mu, nu)
        assert bound == pytest.approx(1.65)
        assert bound >= flat_distance(mu, nu).distance

    def test_mismatch(self):
        with pytest.raises(ValueError):
            flat_distance_upper_bound(delta(0), DiscreteMeasure([0, 1], [1, 1]))
        with pytest.raises(ValueError):
            flat_distance_upper_bound(delta(0), delta(1), pairing=[1])

    @settings(max_examples=60)
    @given(st.integers(1, 6), st.integers(0, 2**32 - 1))
    def test_never_violated(self, n, seed):
        rng = np.random.default_rng(seed)
        mu = DiscreteMeasure(rng.uniform(0, 3, n), rng.uniform(0, 2, n))
        nu = DiscreteMeasure(rng.uniform(0, 3, n), rng.uniform(0, 2, n))
        exact = flat_distance(canonicalize(mu), canonicalize(nu)).distance
        for _ in range(5):
            assert flat_distance_upper_bound(mu, nu, rng.permutation(n)) >= exact - 1e-12


def test_large_instance_is_fast():
    import time
    x = (np.arange(1 << 20) + 0.5) / (1 << 20)
    fine = DiscreteMeasure(x, np.full(len(x), 1.0 / len(x)))
    y = (np.arange(8192) + 0.5) / 8192
    coarse = DiscreteMeasure(y, np.full(len(y), 1.0 / 8192))
    t = time.perf_counter()
    d = flat_distance(fine, coarse).distance
    assert time.perf_counter() - t < 5.0
    # each coarse atom against a uniform cell: the optimal profile has slope +-1 inside each cell
    assert d == pytest.approx(1.0 / (4 * 8192), rel=1e-6)
