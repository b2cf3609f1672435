"""Smooth cutoff and bump profiles shared across modules.

Everything here is built from the classic exp(-1/x) mollifier, so all
profiles are C-infinity with exactly flat plateaus.  The functions accept
and return numpy arrays (scalars broadcast).
"""

from __future__ import annotations

import numpy as np


def _mollifier(x):
    """exp(-1/x) for x > 0, identically 0 for x <= 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    with np.errstate(over="ignore", divide="ignore"):
        out[pos] = np.exp(-1.0 / x[pos])
    return out


def smoothstep(x):
    """C-infinity monotone step: 0 for x <= 0, 1 for x >= 1.

    smoothstep'(x) >= 0 everywhere; the transition is exp(-1/x)-flat at
    both ends.
    """
    f = _mollifier(x)
    g = _mollifier(1.0 - x)
    return f / (f + g)


def smoothstep_d(x):
    """Derivative of :func:`smoothstep` (closed form)."""
    x = np.asarray(x, dtype=float)
    f = _mollifier(x)
    g = _mollifier(1.0 - x)
    s = f + g
    # f' = f/x^2 on x>0, g' = -g/(1-x)^2 on x<1
    fp = np.zeros_like(x)
    gp = np.zeros_like(x)
    pos = x > 0
    fp[pos] = f[pos] / x[pos] ** 2
    neg = x < 1
    gp[neg] = -g[neg] / (1.0 - x[neg]) ** 2
    return (fp * g - f * gp) / s**2


def descending_step(tau):
    """C-infinity step with value 1 for tau <= 1, 0 for tau >= 2, derivative <= 0."""
    return 1.0 - smoothstep(np.asarray(tau, dtype=float) - 1.0)


def descending_step_d(tau):
    """Derivative of :func:`descending_step`; nonpositive everywhere."""
    return -smoothstep_d(np.asarray(tau, dtype=float) - 1.0)


def plateau_bump(x, center, inner, outer):
    """Bump equal to 1 on |x-center| <= inner, 0 for |x-center| >= outer."""
    if not outer > inner > 0:
        raise ValueError("need outer > inner > 0")
    t = (np.abs(np.asarray(x, dtype=float) - center) - inner) / (outer - inner)
    return 1.0 - smoothstep(t)


def rising_plateau(x, lo, hi):
    """0 for x <= lo, 1 for x >= hi, smooth monotone in between."""
    if not hi > lo:
        raise ValueError("need hi > lo")
    return smoothstep((np.asarray(x, dtype=float) - lo) / (hi - lo))
