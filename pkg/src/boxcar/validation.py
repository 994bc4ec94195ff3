"""Input validation helpers shared by the estimators and functions."""

import numbers

import numpy as np


class MeasureValidationError(ValueError):
    pass


class NotFittedError(ValueError, AttributeError):
    pass


def check_positions_masses(points, masses):
    points = np.array(points, dtype=float, copy=True).reshape(-1)
    masses = np.array(masses, dtype=float, copy=True).reshape(-1)
    if points.shape != masses.shape:
        raise MeasureValidationError(
            f"points and masses differ in length ({len(points)} != {len(masses)})")
    if not (np.all(np.isfinite(points)) and np.all(np.isfinite(masses))):
        raise MeasureValidationError("measure contains non-finite values")
    if np.any(masses < 0):
        raise MeasureValidationError("negative mass in a nonnegative measure")
    return points, masses


def check_positive_int(value, name):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < 1:
        raise ValueError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_positive_float(value, name, allow_zero=False):
    value = float(value)
    if not np.isfinite(value) or value < 0 or (value == 0 and not allow_zero):
        raise ValueError(f"{name} must be {'nonnegative' if allow_zero else 'positive'}, got {value!r}")
    return value


def check_is_fitted(estimator, attributes=("measure_",)):
    if not all(hasattr(estimator, a) for a in attributes):
        raise NotFittedError(
            f"This {type(estimator).__name__} instance is not fitted yet; call 'fit' first.")
