"""Hankel asymptotics with certified remainder, and the Bessel-uniform kernel form."""
from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError
from .types import ComplexVal, EvalResult, Regime


def hankel_coeff(k: int, nu: float) -> float:
    """a_k(nu) = prod_{j=1..k} (4 nu^2 - (2j-1)^2) / (k! 8^k)."""
    if k < 0:
        raise ValueError("k must be non-negative")
    four_nu2 = 4.0 * nu * nu
    out = 1.0
    for j in range(1, k + 1):
        out *= (four_nu2 - (2 * j - 1) ** 2) / (8.0 * j)
    return out


def hankel1_asym(nu: float, z: float, ell: int) -> EvalResult:
    """H^(1)_nu(z) from the first ``ell`` terms of its large-argument expansion.

    abs_err is the rigorous remainder bound
    2 |a_ell| z^-ell exp(|nu^2 - 1/4| / z), times the modulus of the prefactor,
    valid for real z > 0 and ell >= nu - 1/2.
    """
    nu = abs(float(nu))
    z = float(z)
    if int(ell) != ell or ell < 1:
        raise DomainError(f"ell must be a positive integer, got {ell}")
    ell = int(ell)
    if not z >= max(1.0, nu):
        raise DomainError(f"need z >= max(1, |nu|); got z={z}, nu={nu}")
    if ell < nu - 0.5:
        raise DomainError(f"remainder bound needs ell >= nu - 1/2; got ell={ell}, nu={nu}")
    total = 0j
    zpow = 1.0
    for k in range(ell):
        total += (1j ** k) * hankel_coeff(k, nu) / zpow
        zpow *= z
    omega = z - 0.5 * nu * math.pi - 0.25 * math.pi
    amp = math.sqrt(2.0 / (math.pi * z))
    val = amp * np.exp(1j * omega) * total
    bound = 2.0 * abs(hankel_coeff(ell, nu)) * z ** (-ell) * math.exp(abs(nu * nu - 0.25) / z)
    err = amp * bound + np.finfo(float).eps * amp * abs(total) * (4.0 + z)
    return EvalResult(ComplexVal.of(complex(val)), float(err), Regime.BESSEL_UNIFORM)
