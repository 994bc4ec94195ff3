import dataclasses

import numpy as np
import pytest

from boxcar import splitup
from boxcar.harness import approximate_initial
from boxcar.measure import DiscreteMeasure
from boxcar.models import MeasureSummary, test_case

TC1 = test_case(1).coefficients
S = MeasureSummary(1.0)


def frozen_zero(x):
    return np.zeros_like(x)


class TestTransport:
    def test_one_step(self):
        x = splitup.transport_substep([0.5], lambda y: TC1.b(0, S, y), 0.25, 1)
        assert x[0] == pytest.approx(0.525)

    def test_zero_velocity(self):
        x0 = np.array([0.1, 0.4])
        np.testing.assert_array_equal(splitup.transport_substep(x0, frozen_zero, 0.3, 5), x0)

    def test_four_steps_from_boundary(self):
        x = splitup.transport_substep([0.0], lambda y: TC1.b(0, S, y), 0.0625, 4)
        # each step multiplies the distance to 1 by 1 - 0.0625 * 0.2
        assert x[0] == pytest.approx(1.0 - 0.9875 ** 4, abs=1e-15)

    def test_nonfinite(self):
        with pytest.raises(FloatingPointError):
            splitup.transport_substep([0.5], lambda y: np.full_like(y, np.inf), 0.1, 1)


class TestGrowth:
    def test_one_step(self):
        m = splitup.growth_substep([1.0, 0.0], [0.525, 0.0], lambda y: TC1.c(0, S, y),
                                   lambda y: TC1.beta(0, S, y), 0.25, 1)
        assert m[0] == pytest.approx(0.95)
        assert m[1] == pytest.approx(0.25 * TC1.beta(0, S, np.array([0.525]))[0])

    def test_no_rates(self):
        m0 = np.array([0.3, 0.7, 0.0])
        np.testing.assert_array_equal(splitup.growth_substep(m0, [0.1, 0.5, 0.0], frozen_zero, frozen_zero, 0.1, 7),
                                      m0)

    def test_rates_evaluated_once(self):
        calls = {"c": 0, "beta": 0}

        def c(y):
            calls["c"] += 1
            return np.full_like(y, 0.1)

        def beta(y):
            calls["beta"] += 1
            return np.full_like(y, 0.2)

        splitup.growth_substep([1.0, 0.0], [0.5, 0.0], c, beta, 0.01, 10)
        assert calls == {"c": 1, "beta": 1}


class TestRun:
    def test_conservation_without_rates(self):
        co = dataclasses.replace(TC1, c=lambda t, s, x: np.zeros_like(x), beta=lambda t, s, x: np.zeros_like(x))
        initial, _ = approximate_initial(lambda x: np.ones_like(x), (0, 1), 32)
        for K, J in [(1, 1), (8, 4)]:
            mu, _ = splitup.run(initial, co, K, J)
            assert mu.total_mass() == initial.total_mass()

    def test_single_step_is_pure_transport(self):
        co = dataclasses.replace(TC1, c=lambda t, s, x: np.zeros_like(x), beta=lambda t, s, x: np.zeros_like(x))
        initial = DiscreteMeasure([0.5], [1.0])
        mu, _ = splitup.run(initial, co, 1, 1)
        assert mu.points.tolist() == [0.5 + 0.1]
        assert mu.masses.tolist() == [1.0]

    def test_freezing_records(self):
        case = test_case(2)
        initial, _ = approximate_initial(case.initial, case.domain, 16)
        _, rep = splitup.run(initial, case.coefficients, 4, 4, record_steps=True)
        assert len(rep.steps) == 4
        for k, step in enumerate(rep.steps):
            assert step.t_k == k / 4
            # c and beta frozen against the transported measure, evaluated at the post-transport positions
            positions = np.append(step.positions_after, 0.0)
            np.testing.assert_array_equal(step.c_values, case.coefficients.c(step.t_k, step.summary_transported,
                                                                              positions))
            np.testing.assert_array_equal(step.beta_values,
                                          case.coefficients.beta(step.t_k, step.summary_transported, positions))

    def test_new_cohort_not_transported_in_its_interval(self):
        initial = DiscreteMeasure([0.5], [1.0])
        mu, _ = splitup.run(initial, TC1, 1, 4)
        assert 0.0 in mu.points.tolist()

    def test_cohort_count(self):
        initial, _ = approximate_initial(lambda x: np.ones_like(x), (0, 1), 16)
        mu, _ = splitup.run(initial, TC1, 4, 4)
        assert len(mu) == 20

    @pytest.mark.parametrize("cid", [1, 2])
    def test_masses_nonnegative(self, cid):
        case = test_case(cid)
        initial, _ = approximate_initial(case.initial, case.domain, 64)
        _, rep = splitup.run(initial, case.coefficients, 16, 4)
        assert rep.min_mass >= 0

    def test_negative_mass_is_recorded(self):
        # h * c > 1 flips the Euler factor
        co = dataclasses.replace(TC1, c=lambda t, s, x: np.full_like(x, 50.0))
        initial, _ = approximate_initial(lambda x: np.ones_like(x), (0, 1), 8)
        mu, rep = splitup.run(initial, co, 1, 1)
        assert mu is None and rep.aborted and "m<0" in rep.anomalies
