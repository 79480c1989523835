"""Complex Gamma function.

Right half-plane: upward recurrence to |z| >= 15 followed by the Stirling
series with 12 Bernoulli terms.  Left half-plane: reflection, with a
log-sine that stays finite for large imaginary parts.
"""
from __future__ import annotations

import numpy as np

from ..errors import PoleError
from .types import ComplexVal, EvalResult, Regime

_EPS = np.finfo(float).eps
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)
_STIRLING_RADIUS = 15.0

# B_{2n} / (2n (2n-1)), n = 1..12
_STIRLING_COEF = np.array([
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
    43867.0 / 244188.0,
    -174611.0 / 125400.0,
    77683.0 / 5796.0,
    -236364091.0 / 1506960.0,
])


def _stirling(z):
    zinv = 1.0 / z
    zinv2 = zinv * zinv
    acc = np.zeros_like(z)
    for c in _STIRLING_COEF[::-1]:
        acc = acc * zinv2 + c
    return (z - 0.5) * np.log(z) - z + _HALF_LOG_2PI + acc * zinv


def _loggamma_right(z):
    """log Gamma for Re z >= 1/2 (continuous branch)."""
    z = np.asarray(z, dtype=complex)
    shift = np.where(np.abs(z) < _STIRLING_RADIUS,
                     np.ceil(_STIRLING_RADIUS - z.real), 0.0).astype(int)
    shift = np.maximum(shift, 0)
    nmax = int(shift.max()) if shift.size else 0
    corr = np.zeros_like(z)
    for j in range(nmax):
        active = shift > j
        corr = corr + np.where(active, np.log(z + j), 0.0)
    return _stirling(z + shift) - corr


def log_sin_pi(z):
    """log(sin(pi z)) on some branch; finite for large |Im z|."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z.imag) <= 5.0
    out[small] = np.log(np.sin(np.pi * z[small]))
    up = (~small) & (z.imag > 0)
    if up.any():
        w = z[up]
        out[up] = -1j * np.pi * w + np.log(0.5j) + np.log1p(-np.exp(2j * np.pi * w))
    dn = (~small) & (z.imag < 0)
    if dn.any():
        w = z[dn]
        out[dn] = 1j * np.pi * w + np.log(-0.5j) + np.log1p(-np.exp(-2j * np.pi * w))
    return out


def loggamma(z):
    """Vectorised complex log Gamma (branch not necessarily principal)."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)
    right = z.real >= 0.5
    if right.any():
        out[right] = _loggamma_right(z[right])
    left = ~right
    if left.any():
        w = z[left]
        out[left] = np.log(np.pi) - log_sin_pi(w) - _loggamma_right(1.0 - w)
    return out[0] if scalar else out


def rgamma(z):
    """1/Gamma(z), exactly zero at the poles."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    pole = (z.real <= 0) & (np.abs(z.imag) < 1e-300) & (z.real == np.round(z.real))
    out = np.zeros_like(z)
    ok = ~pole
    out[ok] = np.exp(-loggamma(z[ok]))
    return out[0] if scalar else out


def gamma_rel_err(z):
    """Heuristic relative error of exp(loggamma(z))."""
    z = np.asarray(z, dtype=complex)
    az = np.abs(z) + 1.0
    return 4.0 * _EPS * (1.0 + az * (1.0 + np.log(az)))


def _nearest_pole_distance(z: complex) -> float:
    if z.real > 0.5:
        return np.inf
    n = round(z.real)
    if n > 0:
        return np.inf
    return abs(z - n)


def gamma_complex(z, tol: float = 1e-12) -> EvalResult:
    """Gamma(z) with an absolute error estimate."""
    zc = complex(ComplexVal.of(z))
    if _nearest_pole_distance(zc) < tol:
        raise PoleError(f"z = {zc} lies within {tol:g} of a pole of Gamma")
    val = complex(np.exp(loggamma(zc)))
    err = float(abs(val) * gamma_rel_err(zc))
    return EvalResult(ComplexVal.of(val), err, Regime.SERIES)


def gamma_half_abs_sq(n: int, y, sign: int = 1):
    """|Gamma(1/2 + sign*n + iy)|^2 in closed form (vectorised in y)."""
    if int(n) != n or n < 0:
        raise ValueError("n must be a non-negative integer")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    y = np.asarray(y, dtype=float)
    ay = np.abs(y)
    e = np.exp(-2.0 * np.pi * ay)
    base = 2.0 * np.pi * np.exp(-np.pi * ay) / (1.0 + e)
    prod = np.ones_like(y)
    for ell in range(1, int(n) + 1):
        prod = prod * ((ell - 0.5) ** 2 + y * y)
    out = base * prod if sign == 1 else base / prod
    return float(out) if out.ndim == 0 else out
