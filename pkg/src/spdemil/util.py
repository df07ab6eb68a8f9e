"""Small shared numerics helpers."""

from __future__ import annotations

import math

import numpy as np

__all__ = ["fit_loglog", "ceil_snapped", "power_snapped"]


def fit_loglog(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    if x.size < 2:
        raise ValueError("need at least two points for a slope")
    if np.ptp(x) == 0.0:
        raise ValueError("degenerate fit: all abscissae equal")
    return float(np.polyfit(x, y, 1)[0])


def ceil_snapped(x: float, tol: float = 1e-9) -> int:
    """Ceiling that forgives upward floating-point noise within ``tol``."""
    return max(1, math.ceil(x - tol))


def power_snapped(base: int, expo: float) -> int:
    """``round(base ** expo)`` with integer exponents evaluated exactly."""
    if abs(expo - round(expo)) < 1e-9:
        return base ** int(round(expo))
    return int(round(float(base) ** expo))
