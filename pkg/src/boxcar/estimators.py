"""Estimator-style wrappers around the particle solvers.

``fit`` takes the initial measure (a :class:`DiscreteMeasure` or an ``(n, 2)``
array of ``(x, mass)`` rows) and integrates it to ``t_final``; ``predict``
evaluates the mollified density of the result. ``score`` returns the negated
flat distance to a target measure, so larger is better.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from . import ebt, splitup
from .flat import flat_distance
from .measure import DiscreteMeasure, as_measure, canonicalize, mollify
from .models import CoefficientSet, test_case
from .validation import check_is_fitted, check_positive_float, check_positive_int


def _resolve_model(model):
    if isinstance(model, CoefficientSet):
        return model, (0.0, 1.0)
    case = test_case(model)
    return case.coefficients, case.domain


class _ParticleSolver(BaseEstimator):
    def _validated(self):
        check_positive_int(self.n_boundary_cohorts, "n_boundary_cohorts")
        check_positive_int(self.n_substeps, "n_substeps")
        check_positive_float(self.t_final, "t_final", allow_zero=True)
        coeffs, domain = _resolve_model(self.model)
        return coeffs, tuple(self.domain) if self.domain is not None else domain

    def fit(self, X, y=None):
        coeffs, domain = self._validated()
        initial = canonicalize(as_measure(X, coeffs.x_b))
        self.measure_, self.report_ = self._integrate(initial, coeffs)
        self.domain_ = domain
        self.n_atoms_ = 0 if self.measure_ is None else len(self.measure_)
        return self

    @property
    def aborted_(self):
        check_is_fitted(self)
        return self.report_.aborted

    def density(self):
        """Mollified piecewise-constant density of the fitted measure."""
        check_is_fitted(self)
        if self.measure_ is None:
            raise RuntimeError(f"run aborted: {self.report_.abort_reason}")
        return mollify(self.measure_, self.domain_)

    def predict(self, X):
        x = np.asarray(X, dtype=float)
        return self.density()(x.ravel()).reshape(x.shape)

    def score(self, X, y=None):
        """Negated flat distance between the fitted measure and ``X``."""
        check_is_fitted(self)
        if self.measure_ is None:
            return -np.inf
        target = canonicalize(as_measure(X, self.measure_.x_b))
        return -flat_distance(self.measure_, target).distance


class EscalatorBoxcarTrain(_ParticleSolver):
    """Cohort solver with a boundary cohort internalised ``n_boundary_cohorts`` times.

    Parameters
    ----------
    model : int or CoefficientSet
        Benchmark problem id (1, 2, 3) or custom coefficients.
    variant : {"simplified", "original", "star"}
    n_boundary_cohorts : int
        Number of internalisation intervals K.
    n_substeps : int
        Euler steps J per interval.
    t_final : float
    on_anomaly : {"record", "abort"}
    domain : tuple or None
        Support of the mollified density; defaults to the model domain.
    """

    def __init__(self, model=1, variant="simplified", n_boundary_cohorts=4, n_substeps=4, t_final=1.0,
                 on_anomaly="record", domain=None):
        self.model = model
        self.variant = variant
        self.n_boundary_cohorts = n_boundary_cohorts
        self.n_substeps = n_substeps
        self.t_final = t_final
        self.on_anomaly = on_anomaly
        self.domain = domain

    def _integrate(self, initial, coeffs):
        return ebt.run(initial, coeffs, self.variant, self.n_boundary_cohorts, self.n_substeps,
                       self.t_final, on_anomaly=self.on_anomaly)


class SplitUp(_ParticleSolver):
    """Split-up solver: frozen-velocity transport then frozen-rate growth on each interval."""

    def __init__(self, model=1, n_boundary_cohorts=4, n_substeps=4, t_final=1.0, domain=None):
        self.model = model
        self.n_boundary_cohorts = n_boundary_cohorts
        self.n_substeps = n_substeps
        self.t_final = t_final
        self.domain = domain

    def _integrate(self, initial, coeffs):
        return splitup.run(initial, coeffs, self.n_boundary_cohorts, self.n_substeps, self.t_final)
