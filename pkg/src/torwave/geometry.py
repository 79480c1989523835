"""Toroidal coordinates, torus construction and finite-difference operators.

Point convention: (phi1, phi2, tau) with phi1 the poloidal angle in (-pi, pi],
phi2 the toroidal angle in [0, 2 pi) and tau >= 0.  tau = 0 is the z-axis
together with spatial infinity; tau -> infinity is the focal ring of radius a.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DomainError, GeometryError, GridError, NonConvergence, SingularityError

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class TorusGeometry:
    r: float
    R: float
    a: float
    tau1: float

    def __post_init__(self):
        if not (0.0 < self.r < self.R):
            raise GeometryError(f"need 0 < r < R, got r={self.r}, R={self.R}")
        if not (self.a > 0 and self.tau1 > 0):
            raise GeometryError("focal parameter and boundary value must be positive")

    @classmethod
    def from_radii(cls, r: float, R: float) -> "TorusGeometry":
        return torus_from_radii(r, R)

    def to_dict(self) -> dict:
        return {"r": self.r, "R": self.R, "a": self.a, "tau1": self.tau1}


def torus_from_radii(r: float, R: float) -> TorusGeometry:
    """Torus of tube radius r around a centre circle of radius R."""
    r = float(r)
    R = float(R)
    if not (r > 0 and R > r):
        raise GeometryError(f"need 0 < r < R, got r={r}, R={R}")
    a = math.sqrt((R - r) * (R + r))
    tau1 = math.log((R + a) / r)
    return TorusGeometry(r, R, a, tau1)


@dataclass(frozen=True)
class ToroidalPoint:
    phi1: float
    phi2: float
    tau: float

    def __post_init__(self):
        if not (-math.pi < self.phi1 <= math.pi):
            raise DomainError(f"phi1 must lie in (-pi, pi], got {self.phi1}")
        if not (0.0 <= self.phi2 < TWO_PI):
            raise DomainError(f"phi2 must lie in [0, 2pi), got {self.phi2}")
        if not self.tau >= 0.0:
            raise DomainError(f"tau must be non-negative, got {self.tau}")

    def inside(self, geom: TorusGeometry) -> bool:
        """True when the point belongs to the closed exterior domain tau <= tau1."""
        return self.tau <= geom.tau1


def toroidal_to_cartesian(phi1, phi2, tau, a):
    """Vectorised toroidal -> Cartesian map; no singularity check."""
    phi1, phi2, tau = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (phi1, phi2, tau)))
    d = np.cosh(tau) - np.cos(phi1)
    rho = a * np.sinh(tau) / d
    return rho * np.cos(phi2), rho * np.sin(phi2), a * np.sin(phi1) / d


def to_cartesian(p: ToroidalPoint, geom: TorusGeometry) -> tuple:
    if p.tau == 0.0 and p.phi1 == 0.0:
        raise SingularityError("(tau, phi1) = (0, 0) is the point at infinity")
    x, y, z = toroidal_to_cartesian(p.phi1, p.phi2, p.tau, geom.a)
    return float(x), float(y), float(z)


def _meridian_residual(tau, phi1, rho, z, a):
    d = math.cosh(tau) - math.cos(phi1)
    return a * math.sinh(tau) / d - rho, a * math.sin(phi1) / d - z


def from_cartesian(x: float, y: float, z: float, geom: TorusGeometry,
                   tol: float = 1e-10, max_iter: int = 50) -> ToroidalPoint:
    """Inverse map by damped Newton iteration in the meridian half-plane.

    phi2 is read off directly; (tau, phi1) solve rho = a sinh(tau)/d and
    z = a sin(phi1)/d.  The start value comes from the bipolar distance ratio.
    """
    a = geom.a
    rho = math.hypot(x, y)
    phi2 = math.atan2(y, x) % TWO_PI
    if phi2 >= TWO_PI:
        phi2 = 0.0
    d1 = math.hypot(rho + a, z)
    d2 = math.hypot(rho - a, z)
    if d2 == 0.0:
        raise SingularityError("point lies on the focal ring (tau = infinity)")
    tau = max(math.log(d1 / d2), 1e-8)
    phi1 = math.atan2(2.0 * a * z, rho * rho + z * z - a * a)

    scale = max(1.0, rho, abs(z))
    for _ in range(max_iter):
        f1, f2 = _meridian_residual(tau, phi1, rho, z, a)
        res = math.hypot(f1, f2)
        if res <= tol * scale:
            break
        d = math.cosh(tau) - math.cos(phi1)
        sh, ch = math.sinh(tau), math.cosh(tau)
        sp, cp = math.sin(phi1), math.cos(phi1)
        # Jacobian of (rho, z) with respect to (tau, phi1)
        j11 = a * (ch * d - sh * sh) / (d * d)
        j12 = -a * sh * sp / (d * d)
        j21 = -a * sp * sh / (d * d)
        j22 = a * (cp * d - sp * sp) / (d * d)
        det = j11 * j22 - j12 * j21
        if det == 0.0:
            raise NonConvergence("singular Jacobian in the inverse coordinate map")
        dt = (j22 * f1 - j12 * f2) / det
        dp = (-j21 * f1 + j11 * f2) / det
        lam = 1.0
        while lam > 1e-6:
            t_new = tau - lam * dt
            if t_new > 0:
                g1, g2 = _meridian_residual(t_new, phi1 - lam * dp, rho, z, a)
                if math.hypot(g1, g2) < res:
                    break
            lam *= 0.5
        tau -= lam * dt
        phi1 -= lam * dp
    else:
        f1, f2 = _meridian_residual(tau, phi1, rho, z, a)
        if math.hypot(f1, f2) > tol * scale:
            raise NonConvergence("inverse coordinate map did not converge in 50 iterations")
    phi1 = math.atan2(math.sin(phi1), math.cos(phi1))
    if phi1 <= -math.pi:
        phi1 = math.pi
    return ToroidalPoint(phi1, phi2, tau)


def prefactor_N(tau, phi1, geom: TorusGeometry):
    """N(tau, phi1) = (cosh tau - cos phi1) / a."""
    out = (np.cosh(tau) - np.cos(phi1)) / geom.a
    return float(out) if np.ndim(out) == 0 else out


def eta_lower_bound(eps1: float, geom: TorusGeometry) -> float:
    """eta(eps1) = (1 - cos eps1)/a, the minimum of N off {tau < eps1, |phi1| < eps1}."""
    if not (0.0 < eps1 < geom.tau1):
        raise DomainError(f"need 0 < eps1 < tau1 = {geom.tau1:.6g}, got {eps1}")
    return (1.0 - math.cos(eps1)) / geom.a


def eta_grid_min(eps1: float, geom: TorusGeometry, n: int = 2000) -> float:
    """Minimum of N over an n x n grid of the complement region inside tau <= tau1."""
    if not (0.0 < eps1 < geom.tau1):
        raise DomainError(f"need 0 < eps1 < tau1 = {geom.tau1:.6g}, got {eps1}")
    tau = np.linspace(0.0, geom.tau1, n)
    phi = np.linspace(-math.pi, math.pi, n)
    ch = np.cosh(tau)[:, None]
    cp = np.cos(phi)[None, :]
    outside = (tau[:, None] >= eps1) | (np.abs(phi)[None, :] >= eps1)
    vals = np.where(outside, (ch - cp) / geom.a, np.inf)
    return float(vals.min())


# ---------------------------------------------------------------------------
# sampled fields

def _check_uniform(nodes, name):
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size < 4:
        raise GridError(f"{name} grid needs at least 4 nodes")
    steps = np.diff(nodes)
    if np.any(steps <= 0):
        raise GridError(f"{name} grid must be strictly increasing")
    if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
        raise GridError(f"{name} grid must be uniform")
    return nodes


def periodic_nodes(n: int, start: float = 0.0) -> np.ndarray:
    return start + TWO_PI * np.arange(n) / n


@dataclass
class FieldGrid:
    """u(t, phi1, phi2, tau) sampled on a uniform product grid.

    values has shape (len(phi1), len(phi2), len(tau)).  The angle grids are
    periodic: they hold n nodes with spacing 2 pi / n.
    """
    values: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    tau: np.ndarray
    time_stamp: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.phi1 = _check_uniform(self.phi1, "phi1")
        self.phi2 = _check_uniform(self.phi2, "phi2")
        self.tau = _check_uniform(self.tau, "tau")
        for name, g in (("phi1", self.phi1), ("phi2", self.phi2)):
            h = g[1] - g[0]
            if abs(h * g.size - TWO_PI) > 1e-9:
                raise GridError(f"{name} grid must be periodic with spacing 2pi/n")
        if self.tau[0] < 0:
            raise GridError("tau grid must be non-negative")
        self.values = np.asarray(self.values)
        want = (self.phi1.size, self.phi2.size, self.tau.size)
        if self.values.shape != want:
            raise GridError(f"values shape {self.values.shape} does not match grids {want}")
        if not np.all(np.isfinite(self.values)):
            raise GridError("field contains non-finite values")
        if self.time_stamp < 0:
            raise GridError("time_stamp must be non-negative")

    @classmethod
    def from_function(cls, func: Callable, n_phi1: int, n_phi2: int, tau_nodes,
                      time_stamp: float = 0.0, phi1_start: float = -math.pi) -> "FieldGrid":
        phi1 = periodic_nodes(n_phi1, phi1_start)
        phi2 = periodic_nodes(n_phi2)
        tau = np.asarray(tau_nodes, dtype=float)
        P1, P2, T = np.meshgrid(phi1, phi2, tau, indexing="ij")
        return cls(np.asarray(func(P1, P2, T), dtype=float), phi1, phi2, tau, time_stamp)

    def mesh(self):
        return np.meshgrid(self.phi1, self.phi2, self.tau, indexing="ij")

    @property
    def spacing(self) -> tuple:
        return (self.phi1[1] - self.phi1[0], self.phi2[1] - self.phi2[0], self.tau[1] - self.tau[0])

    def with_values(self, values, tau=None, time_stamp=None) -> "FieldGrid":
        return FieldGrid(values, self.phi1, self.phi2, self.tau if tau is None else tau,
                         self.time_stamp if time_stamp is None else time_stamp, dict(self.meta))


def _prepare(field_: FieldGrid, geom: TorusGeometry):
    if field_.tau[0] <= 0.0:
        raise GridError("tau grid must exclude tau = 0; start at tau >= one grid spacing")
    if field_.tau[-1] > geom.tau1 * (1 + 1e-12):
        raise GridError(f"tau grid leaves the exterior domain tau <= tau1 = {geom.tau1:.6g}")
    if field_.tau.size < 3:
        raise GridError("need at least 3 tau nodes")
    P1, _, T = np.meshgrid(field_.phi1, field_.phi2, field_.tau[1:-1], indexing="ij")
    return P1, T


def _angle_second(u, axis, h):
    return (np.roll(u, -1, axis=axis) - 2.0 * u + np.roll(u, 1, axis=axis)) / (h * h)


def apply_laplacian(field_: FieldGrid, geom: TorusGeometry) -> FieldGrid:
    """Second-order flux-form finite differences of the toroidal Laplacian.

    Returns the result on the interior tau nodes (first and last dropped).
    """
    P1, T = _prepare(field_, geom)
    h1, h2, ht = field_.spacing
    u = field_.values
    a = geom.a
    tau = field_.tau
    inner = u[:, :, 1:-1]

    def coef(tau_v, phi_v):
        return np.sinh(tau_v) / (np.cosh(tau_v) - np.cos(phi_v))

    # phi1 fluxes at half nodes
    phi = field_.phi1[:, None, None]
    tau_in = tau[None, None, 1:-1]
    c_plus = coef(tau_in, phi + 0.5 * h1)
    c_minus = coef(tau_in, phi - 0.5 * h1)
    up = np.roll(inner, -1, axis=0)
    dn = np.roll(inner, 1, axis=0)
    term1 = (c_plus * (up - inner) - c_minus * (inner - dn)) / (h1 * h1)

    # tau fluxes at half nodes
    t_plus = tau[None, None, 1:-1] + 0.5 * ht
    t_minus = tau[None, None, 1:-1] - 0.5 * ht
    ct_plus = coef(t_plus, phi)
    ct_minus = coef(t_minus, phi)
    term3 = (ct_plus * (u[:, :, 2:] - inner) - ct_minus * (inner - u[:, :, :-2])) / (ht * ht)

    d = np.cosh(T) - np.cos(P1)
    term2 = _angle_second(inner, 1, h2) / (np.sinh(T) * d)
    out = d ** 3 / (a * a * np.sinh(T)) * (term1 + term2 + term3)
    return FieldGrid(out, field_.phi1, field_.phi2, tau[1:-1], field_.time_stamp)


def poschl_teller_symbol_terms(field_: FieldGrid, geom: TorusGeometry):
    """N^2 and the csch^2 factor on interior nodes (shared by the FD operators)."""
    P1, T = _prepare(field_, geom)
    n2 = ((np.cosh(T) - np.cos(P1)) / geom.a) ** 2
    return n2, 1.0 / np.sinh(T) ** 2


def apply_poschl_teller(field_: FieldGrid, geom: TorusGeometry) -> FieldGrid:
    """Centred differences of N^2 [u_{phi1 phi1} + u_{tau tau} + csch^2(tau)(u_{phi2 phi2} + u/4)].

    The sign of the zero-order term makes the radial part -d^2 + (mu^2 - 1/4) csch^2
    on the mu-th angular mode, the operator the conical functions diagonalize.
    """
    n2, csch2 = poschl_teller_symbol_terms(field_, geom)
    h1, h2, ht = field_.spacing
    u = field_.values
    inner = u[:, :, 1:-1]
    lap = (_angle_second(inner, 0, h1)
           + (u[:, :, 2:] - 2.0 * inner + u[:, :, :-2]) / (ht * ht)
           + csch2 * (_angle_second(inner, 1, h2) + 0.25 * inner))
    return FieldGrid(n2 * lap, field_.phi1, field_.phi2, field_.tau[1:-1], field_.time_stamp)
