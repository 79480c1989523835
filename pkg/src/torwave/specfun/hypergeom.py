"""Olver's regularized hypergeometric function F(a,b;c;z)/Gamma(c) for 0 <= z < 1."""
from __future__ import annotations

import warnings

import numpy as np
from scipy import integrate

from ..errors import ConvergenceError, DomainError
from .gamma import gamma_rel_err, loggamma, rgamma
from .types import ComplexVal, EvalResult, Regime

_EPS = np.finfo(float).eps


def _series(a: complex, b: complex, c: complex, z: float, max_terms: int = 20000):
    """Power series of the regularized function; returns (value, abs_err)."""
    # first index with a finite, nonzero 1/Gamma(c+n)
    n0 = 0
    if abs(c.imag) < 1e-14 and c.real <= 0 and abs(c.real - round(c.real)) < 1e-14:
        n0 = int(round(-c.real)) + 1
    term = complex(rgamma(c + n0))
    for j in range(n0):
        term *= (a + j) * (b + j) * z / (j + 1)
    if z == 0.0:
        return (term if n0 == 0 else 0j), abs(term) * 4 * _EPS
    total = term
    abs_sum = abs(term)
    n = n0
    tail = np.inf
    while n < max_terms:
        ratio = (a + n) * (b + n) / ((c + n) * (n + 1)) * z
        term = term * ratio
        total += term
        abs_sum += abs(term)
        n += 1
        if term == 0:
            tail = 0.0
            break
        # once the ratio bound is below one the tail is geometric
        rho = max(abs((a + n) * (b + n) / ((c + n) * (n + 1))) * z, z)
        if rho < 1.0 and n > n0 + 2:
            tail = abs(term) * rho / (1.0 - rho)
            if tail <= _EPS * abs(total) or tail < 1e-300:
                break
    err = tail + 4 * _EPS * abs_sum * (1.0 + 1e-3 * (n - n0))
    err += abs(total) * float(gamma_rel_err(c + n0))
    return total, err


def _integral(a: complex, b: complex, c: complex, z: float, tol: float):
    """Euler integral with algebraic endpoint weights (requires Re c > Re b > 0)."""
    if not (c.real > b.real > 0):
        raise DomainError("integral route needs Re c > Re b > 0")
    alpha = b.real - 1.0
    beta = (c - b).real - 1.0
    ib = b.imag
    icb = (c - b).imag

    def f(t):
        # QAWS may sample the endpoints; the weights vanish there anyway
        t = min(max(t, 1e-300), 1.0 - 1e-16)
        phase = 0.0
        if ib:
            phase += ib * np.log(t)
        if icb:
            phase += icb * np.log1p(-t)
        return np.exp(1j * phase - a * np.log1p(-z * t))

    opts = dict(weight="alg", wvar=(alpha, beta), epsabs=0.0, epsrel=max(tol, 1e-14), limit=400)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        re, re_err = integrate.quad(lambda t: f(t).real, 0.0, 1.0, **opts)
        im, im_err = integrate.quad(lambda t: f(t).imag, 0.0, 1.0, **opts)
    pref = np.exp(-loggamma(b) - loggamma(c - b))
    val = complex(pref * complex(re, im))
    err = abs(pref) * (re_err + im_err) + abs(val) * float(gamma_rel_err(b) + gamma_rel_err(c - b))
    return val, float(err)


def olver_F(a, b, c, z: float, tol: float = 1e-12, route: str = "auto") -> EvalResult:
    """Regularized hypergeometric function 2F1(a,b;c;z)/Gamma(c) for z in [0, 1).

    route is "auto", "series" or "integral".  In auto mode the power series
    is tried first and the Euler integral is used when the series misses
    ``tol`` (relative).
    """
    a, b, c = (complex(ComplexVal.of(v)) for v in (a, b, c))
    z = float(z)
    if not (0.0 <= z < 1.0):
        raise DomainError(f"z must lie in [0, 1), got {z}")
    if route not in ("auto", "series", "integral"):
        raise ValueError(f"unknown route {route!r}")

    candidates = []
    if route in ("auto", "series"):
        val, err = _series(a, b, c, z)
        candidates.append((val, err, Regime.SERIES))
        if route == "auto" and err <= tol * max(abs(val), 1e-300):
            return EvalResult(ComplexVal.of(val), float(err), Regime.SERIES)
    if route in ("auto", "integral"):
        try:
            val, err = _integral(a, b, c, z, tol)
            candidates.append((val, err, Regime.INTEGRAL_REP))
        except DomainError:
            if route == "integral":
                raise
    if not candidates:
        raise ConvergenceError("no route available for these parameters")
    val, err, reg = min(candidates, key=lambda t: t[1])
    if not np.isfinite(val) or (route == "auto" and err > tol * max(abs(val), 1e-300)):
        raise ConvergenceError(
            f"hypergeometric evaluation reached only abs_err={err:.3g} for value {val:.6g}")
    return EvalResult(ComplexVal.of(val), float(err), reg)
