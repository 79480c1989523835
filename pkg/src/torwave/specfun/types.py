from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

import numpy as np

from ..errors import DomainError


@dataclass(frozen=True)
class ComplexVal:
    re: float
    im: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.re) and np.isfinite(self.im)):
            raise DomainError(f"non-finite complex value ({self.re}, {self.im})")

    @classmethod
    def of(cls, z) -> "ComplexVal":
        if isinstance(z, ComplexVal):
            return z
        z = complex(z)
        return cls(z.real, z.imag)

    def __complex__(self):
        return complex(self.re, self.im)

    def __abs__(self):
        return abs(complex(self))


class Regime(enum.Enum):
    SERIES = "Series"
    INTEGRAL_REP = "IntegralRep"
    LARGE_K = "LargeK"
    LARGE_MU = "LargeMu"
    BESSEL_UNIFORM = "BesselUniform"


# integer codes used by the vectorised routes
REGIME_CODES = {
    0: Regime.SERIES,
    1: Regime.INTEGRAL_REP,
    2: Regime.LARGE_K,
    3: Regime.LARGE_MU,
    4: Regime.BESSEL_UNIFORM,
}


@dataclass(frozen=True)
class EvalResult:
    value: Union[float, ComplexVal]
    abs_err: float
    regime: Regime

    def __post_init__(self):
        if not self.abs_err >= 0.0:
            raise ValueError("abs_err must be non-negative")

    def as_complex(self) -> complex:
        return complex(self.value)

    def __float__(self):
        if isinstance(self.value, ComplexVal):
            return self.value.re
        return float(self.value)


@dataclass(frozen=True)
class ConicalParams:
    mu: int
    k: float
    x: float

    def __post_init__(self):
        if int(self.mu) != self.mu or self.mu < 0:
            raise DomainError(f"mu must be a non-negative integer, got {self.mu}")
        if not (np.isfinite(self.k) and self.k > 0):
            raise DomainError(f"k must be positive, got {self.k}")
        if not (np.isfinite(self.x) and self.x >= 0):
            raise DomainError(f"x must be non-negative, got {self.x}")
        object.__setattr__(self, "mu", int(self.mu))
        object.__setattr__(self, "k", float(self.k))
        object.__setattr__(self, "x", float(self.x))
