"""Angle convention helpers.

Every angle handled by this package is wrapped to the half-open interval
(-pi, pi]; keeping a single convention avoids off-by-2pi bugs between the
attack model, the alternative measurements, and the estimators.
"""

from __future__ import annotations

import numpy as np


def wrap_angle(theta):
    """Wrap an angle (scalar or array, radians) to (-pi, pi].

    Angles already inside the interval are returned bit-exactly, so the
    function is idempotent; re-wrapping never perturbs a value by a few ulps
    the way an unconditional modulo would.
    """
    theta = np.asarray(theta, dtype=float)
    outside = (theta > np.pi) | (theta <= -np.pi)
    wrapped = np.where(outside, np.pi - np.mod(np.pi - theta, 2.0 * np.pi), theta)
    if wrapped.ndim == 0:
        return float(wrapped)
    return wrapped
