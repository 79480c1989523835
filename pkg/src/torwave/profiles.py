"""Smooth bumps, the fixed library of radial test profiles and the reference datum."""
from __future__ import annotations

import math

import numpy as np

from .geometry import TorusGeometry


def _glue(s):
    """exp(-1/s) for s > 0, zero otherwise (C-infinity at 0)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smooth_step(s):
    """C-infinity step: 0 for s <= 0, 1 for s >= 1."""
    a = _glue(s)
    b = _glue(1.0 - np.asarray(s, dtype=float))
    return a / (a + b)


def bump(x, lo: float, hi: float):
    """exp(-1/(s(1-s))) on (lo, hi) with s the rescaled position; 0 outside."""
    s = (np.asarray(x, dtype=float) - lo) / (hi - lo)
    out = np.zeros_like(s)
    inside = (s > 0) & (s < 1)
    out[inside] = np.exp(-1.0 / (s[inside] * (1.0 - s[inside])))
    return out


def plateau(x, outer_lo: float, inner_lo: float, inner_hi: float, outer_hi: float):
    """Smooth cutoff equal to 1 on [inner_lo, inner_hi], supported in (outer_lo, outer_hi)."""
    x = np.asarray(x, dtype=float)
    rise = smooth_step((x - outer_lo) / (inner_lo - outer_lo)) if inner_lo > outer_lo else (x >= inner_lo) * 1.0
    fall = smooth_step((outer_hi - x) / (outer_hi - inner_hi)) if outer_hi > inner_hi else (x <= inner_hi) * 1.0
    return rise * fall


def angular_bump(phi, center: float, half_width: float):
    """Bump in the wrapped angular distance from ``center``; peak value 1."""
    d = np.angle(np.exp(1j * (np.asarray(phi, dtype=float) - center)))
    return bump(d, -half_width, half_width) / math.exp(-4.0)


# ---------------------------------------------------------------------------
# radial test profiles: all vanish to fourth order at 0 and decay faster than e^{-tau}

def _sinh4_exp_cosh(x):
    return np.sinh(x) ** 4 * np.exp(-2.0 * np.cosh(x))


def _tanh4_exp(x):
    return np.tanh(x) ** 4 * np.exp(-2.0 * x)


def _bump_profile(x):
    return bump(x, 0.5, 4.0)


def _shifted_gaussian(x):
    return np.exp(-(x - 2.0) ** 2) * (-np.expm1(-x)) ** 4


def _poly_exp(x):
    return x ** 5 * np.exp(-3.0 * x)


TEST_PROFILES = {
    "sinh4_exp_cosh": (_sinh4_exp_cosh, None),
    "tanh4_exp": (_tanh4_exp, 2.0),
    "bump": (_bump_profile, None),
    "shifted_gaussian": (_shifted_gaussian, None),
    "poly_exp": (_poly_exp, 3.0),
}


def reference_profile(x):
    """sinh(x) exp(-2 cosh x): the single-profile reference for transform checks."""
    return np.sinh(x) * np.exp(-2.0 * np.cosh(x))


def tanh_power_profile(x):
    """tanh(x)^{5/2} exp(-3x)."""
    return np.tanh(x) ** 2.5 * np.exp(-3.0 * x)


# ---------------------------------------------------------------------------
# reference initial datum for the wave problem

REFERENCE_EPS0 = 0.3
REFERENCE_OUTER_FRACTION = 0.9
REFERENCE_PHI1_CENTER = 0.0
REFERENCE_PHI2_CENTER = math.pi
REFERENCE_HALF_WIDTH = math.pi / 2


def reference_datum(geom: TorusGeometry):
    """Tensor bump q(phi1, phi2, tau) with max 1 and tau-support (0.3, 0.9 tau1).

    Returns (callable, eps0, support_tau_max).
    """
    lo = REFERENCE_EPS0
    hi = REFERENCE_OUTER_FRACTION * geom.tau1
    if not hi > lo:
        raise ValueError(f"torus too thin: 0.9 tau1 = {hi:.4g} does not exceed eps0 = {lo}")
    radial_peak = math.exp(-4.0)

    def q(phi1, phi2, tau):
        return (bump(tau, lo, hi) / radial_peak
                * angular_bump(phi1, REFERENCE_PHI1_CENTER, REFERENCE_HALF_WIDTH)
                * angular_bump(phi2, REFERENCE_PHI2_CENTER, REFERENCE_HALF_WIDTH))

    return q, lo, hi
