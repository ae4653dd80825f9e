"""Finite-difference order fitting shared by the moment-map identity checks."""

from __future__ import annotations

import numpy as np

DEFAULT_STEPS = (1e-2, 1e-3, 1e-4)
EXACT_FLOOR = 1e-12


def fit_slope(steps, errors) -> tuple[float, bool]:
    """Log-log slope of errors vs steps.

    Returns (slope, exact) where exact means every error sits below the
    round-off floor, in which case the slope is reported as +inf (the
    identity holds to machine precision and no order can be measured).
    """
    steps = np.asarray(steps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if steps.shape != errors.shape or steps.size < 2:
        raise ValueError("need matching step/error arrays of length >= 2")
    if np.all(errors < EXACT_FLOOR):
        return float("inf"), True
    # guard the log against exact zeros in a mixed case
    errs = np.maximum(errors, 1e-300)
    slope = np.polyfit(np.log(steps), np.log(errs), 1)[0]
    return float(slope), False
