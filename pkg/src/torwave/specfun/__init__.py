"""Special functions: complex Gamma, Olver's hypergeometric function,
Hankel asymptotics, conical Legendre functions and the Mehler-Fock kernel."""
from .bessel import hankel1_asym, hankel_coeff
from .conical import (
    c_norm,
    conical_p,
    conical_p_minus,
    kernel_K,
    kernel_table,
    log_order_product,
    weighted_minus,
)
from .gamma import gamma_complex, gamma_half_abs_sq, loggamma, rgamma
from .hypergeom import olver_F
from .types import ComplexVal, ConicalParams, EvalResult, Regime

__all__ = [
    "ComplexVal", "ConicalParams", "EvalResult", "Regime",
    "gamma_complex", "gamma_half_abs_sq", "loggamma", "rgamma",
    "olver_F", "hankel1_asym", "hankel_coeff",
    "c_norm", "conical_p", "conical_p_minus", "kernel_K", "kernel_table",
    "log_order_product", "weighted_minus",
]
