"""Independent references: adaptive quadrature, eigenfunction residuals,
a leapfrog finite-difference solver and transform roundtrip errors."""
from __future__ import annotations

import heapq
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BlowupError, CFLError, GridError, NonConvergence
from .geometry import FieldGrid, TorusGeometry, periodic_nodes
from .mehler_fock import RadialProfile, SpectralDensity, forward, inverse, k_grid, k_tail_estimate, kernel_matrix
from .specfun.conical import kernel_table
from .wave_kernel import InitialData

# ---------------------------------------------------------------------------
# adaptive Gauss-Kronrod (7/15)

_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])

_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])             # 15 nodes, ascending
_KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS_W = np.zeros(15)
_GAUSS_W[[1, 3, 5]] = _WG[:3]
_GAUSS_W[7] = _WG[3]
_GAUSS_W[[9, 11, 13]] = _WG[2::-1]


@dataclass(frozen=True)
class QuadResult:
    value: complex
    abs_err: float
    n_intervals: int
    n_evals: int


def _map_domain(func, a: float, b: float):
    """Map an infinite interval to a finite one; returns (g, lo, hi)."""
    if np.isfinite(a) and np.isfinite(b):
        return func, a, b
    if np.isfinite(a) and b == np.inf:
        def g(s):
            return func(a + s / (1.0 - s)) / (1.0 - s) ** 2
        return g, 0.0, 1.0
    if a == -np.inf and np.isfinite(b):
        def g(s):
            return func(b - (1.0 - s) / s) / s ** 2
        return g, 0.0, 1.0
    if a == -np.inf and b == np.inf:
        def g(s):
            return func(s / (1.0 - s * s)) * (1.0 + s * s) / (1.0 - s * s) ** 2
        return g, -1.0, 1.0
    raise ValueError("invalid integration domain")


def quad_oracle(integrand: Callable, domain: Sequence[float], tol: float = 1e-10,
                max_subdivisions: int = 5000, vectorized: bool = True) -> QuadResult:
    """Globally adaptive 7/15-point Gauss-Kronrod integration.

    The interval with the largest local estimate |K15 - G7| is bisected
    until the summed estimates fall below ``tol`` (absolute).  Complex
    integrands are supported.  Infinite endpoints are mapped to (0, 1).
    """
    a, b = float(domain[0]), float(domain[1])
    func = integrand if vectorized else np.vectorize(integrand, otypes=[complex])
    g, lo, hi = _map_domain(func, a, b)
    n_evals = 0

    def rule(left, right):
        nonlocal n_evals
        half = 0.5 * (right - left)
        mid = 0.5 * (right + left)
        fx = np.asarray(g(mid + half * _NODES))
        n_evals += 15
        if not np.all(np.isfinite(fx)):
            raise NonConvergence(f"integrand not finite on [{left}, {right}]")
        kron = half * np.dot(_KRONROD_W, fx)
        gauss = half * np.dot(_GAUSS_W, fx)
        return kron, abs(kron - gauss)

    val, err = rule(lo, hi)
    heap = [(-err, lo, hi, val)]
    total, total_err = val, err
    count = 1
    while total_err > tol:
        if count >= max_subdivisions:
            raise NonConvergence(f"no convergence after {count} subintervals (error {total_err:.3g})")
        neg_err, left, right, v = heapq.heappop(heap)
        mid = 0.5 * (left + right)
        if not (left < mid < right):
            raise NonConvergence("interval cannot be bisected further")
        v1, e1 = rule(left, mid)
        v2, e2 = rule(mid, right)
        total = total - v + v1 + v2
        total_err = total_err + neg_err + e1 + e2
        heapq.heappush(heap, (-e1, left, mid, v1))
        heapq.heappush(heap, (-e2, mid, right, v2))
        count += 1
    # recompute sums to avoid drift from the running updates
    total = sum(item[3] for item in heap)
    total_err = sum(-item[0] for item in heap)
    return QuadResult(complex(total), float(total_err), count, n_evals)


# ---------------------------------------------------------------------------
# eigenfunction residual

def eigen_residual(mu: int, k: float, tau_nodes, scale: float = 1.0) -> float:
    """max |-e'' + (mu^2 - 1/4) csch^2 e - k^2 e| / max|e| over interior nodes.

    e is the Mehler-Fock kernel on the uniform grid (times ``scale``) and
    e'' the centred second difference.
    """
    tau = np.asarray(tau_nodes, dtype=float)
    if tau.ndim != 1 or tau.size < 5:
        raise GridError("need at least 5 tau nodes")
    h = np.diff(tau)
    if np.any(h <= 0) or np.max(np.abs(h - h[0])) > 1e-9 * h[0]:
        raise GridError("tau nodes must be uniform and increasing")
    if tau[0] <= 0:
        raise GridError("tau nodes must be positive")
    e, _, _ = kernel_table(int(mu), float(k), tau)
    e = scale * e
    second = (e[2:] - 2.0 * e[1:-1] + e[:-2]) / h[0] ** 2
    inner = tau[1:-1]
    res = -second + (mu * mu - 0.25) / np.sinh(inner) ** 2 * e[1:-1] - k * k * e[1:-1]
    peak = np.max(np.abs(e))
    return float(np.max(np.abs(res)) / peak) if peak > 0 else 0.0


# ---------------------------------------------------------------------------
# finite-difference time-domain solver

@dataclass(frozen=True)
class FDTDConfig:
    """Grid and time-step settings for the leapfrog solver.

    The tau grid is uniform on [tau_min, tau1] with Dirichlet values at both
    ends.  ``dt`` defaults to ``cfl`` times the leapfrog stability limit.
    """
    n_phi1: int = 64
    n_phi2: int = 64
    n_tau: int = 129
    tau_min: float = 0.05
    cfl: float = 0.9
    dt: Optional[float] = None
    buffer_nodes: int = 5

    def to_dict(self) -> dict:
        return asdict(self)

    def axes(self, geom: TorusGeometry):
        if self.n_phi1 < 4 or self.n_phi2 < 4 or self.n_tau < 5:
            raise GridError("FDTD grid too small")
        if not (0 < self.tau_min < geom.tau1):
            raise GridError("need 0 < tau_min < tau1")
        return (periodic_nodes(self.n_phi1, -math.pi), periodic_nodes(self.n_phi2),
                np.linspace(self.tau_min, geom.tau1, self.n_tau))

    def stable_dt(self, geom: TorusGeometry) -> float:
        """Leapfrog limit 1 / max_nodes N sqrt(1/dphi1^2 + 1/dtau^2 + csch^2 tau / dphi2^2)."""
        phi1, phi2, tau = self.axes(geom)
        d1, d2, dt_ = phi1[1] - phi1[0], phi2[1] - phi2[0], tau[1] - tau[0]
        n = (np.cosh(tau)[None, :] - np.cos(phi1)[:, None]) / geom.a
        speed = n * np.sqrt(1 / d1 ** 2 + 1 / dt_ ** 2 + 1 / (np.sinh(tau)[None, :] ** 2 * d2 ** 2))
        return float(1.0 / speed.max())

    def time_step(self, geom: TorusGeometry) -> float:
        limit = self.stable_dt(geom)
        if self.dt is None:
            return self.cfl * limit
        if self.dt > self.cfl * limit:
            raise CFLError(f"dt={self.dt:.4g} exceeds cfl*limit={self.cfl * limit:.4g}")
        return float(self.dt)


def _operator_parts(phi1, tau, geom):
    n2 = ((np.cosh(tau)[None, None, :] - np.cos(phi1)[:, None, None]) / geom.a) ** 2
    csch2 = 1.0 / np.sinh(tau)[None, None, :] ** 2
    return n2, csch2


def _reduced_operator(u, csch2, d1, d2, dt_):
    """L u = u_11 + u_tt + csch^2 (u_22 + u/4) with zero Dirichlet tau ends (interior returned full)."""
    out = np.zeros_like(u)
    inner = u[:, :, 1:-1]
    out[:, :, 1:-1] = ((np.roll(inner, -1, 0) - 2 * inner + np.roll(inner, 1, 0)) / d1 ** 2
                       + (u[:, :, 2:] - 2 * inner + u[:, :, :-2]) / dt_ ** 2
                       + csch2[:, :, 1:-1] * ((np.roll(inner, -1, 1) - 2 * inner + np.roll(inner, 1, 1)) / d2 ** 2
                                              + 0.25 * inner))
    return out


def energy(u_prev, u_next, dt: float, n2, csch2, spacing) -> float:
    """Conserved leapfrog energy between two consecutive levels.

    E = 1/2 <v, v/N^2> + 1/2 <u_next, -L u_prev>, with v the difference
    quotient; the reduced operator L is symmetric, so E is exactly conserved
    by the scheme up to rounding.
    """
    d1, d2, dt_ = spacing
    v = (u_next - u_prev) / dt
    kinetic = 0.5 * np.sum(v * v / n2)
    potential = -0.5 * np.sum(u_next * _reduced_operator(u_prev, csch2, d1, d2, dt_))
    return float((kinetic + potential) * d1 * d2 * dt_)


def _sample_data(data: InitialData, phi1, phi2, tau):
    if isinstance(data.q, FieldGrid):
        grid = data.q
        if not (np.allclose(grid.phi1, phi1) and np.allclose(grid.phi2, phi2) and np.allclose(grid.tau, tau)):
            raise GridError("FieldGrid data must live on the FDTD grid")
        return np.array(grid.values, dtype=float)
    P1, P2, T = np.meshgrid(phi1, phi2, tau, indexing="ij")
    return np.asarray(data.q(P1, P2, T), dtype=float)


def fdtd_solve(data: InitialData, T: float, config: FDTDConfig, geom: TorusGeometry,
               save_times: Sequence[float] = ()) -> list:
    """Leapfrog integration of u_tt = Delta_P u with u_t(0) = 0.

    Returns FieldGrid snapshots at the requested times (rounded to the time
    step grid, which is adjusted so that T is hit exactly) and at T.  The
    last snapshot's meta carries the energy history and the step size.
    """
    phi1, phi2, tau = config.axes(geom)
    d1, d2, dtau = phi1[1] - phi1[0], phi2[1] - phi2[0], tau[1] - tau[0]
    dt_max = config.time_step(geom)
    n_steps = max(1, int(math.ceil(T / dt_max - 1e-12))) if T > 0 else 0
    dt = T / n_steps if n_steps else dt_max
    n2, csch2 = _operator_parts(phi1, tau, geom)

    u0 = _sample_data(data, phi1, phi2, tau)
    u0[:, :, 0] = 0.0
    u0[:, :, -1] = 0.0
    peak0 = float(np.max(np.abs(u0)))
    want = sorted({int(round(s / dt)) for s in save_times if 0 <= s <= T} | {n_steps})
    snaps = []

    def snap(u, step, extra=None):
        meta = {"t": step * dt, "dt": dt, "solver": "leapfrog", "config": config.to_dict()}
        if extra:
            meta.update(extra)
        snaps.append(FieldGrid(u.copy(), phi1, phi2, tau, step * dt, meta))

    if 0 in want:
        snap(u0, 0)
    if n_steps == 0:
        return snaps
    u_prev = u0
    u_cur = u0 + 0.5 * dt * dt * n2 * _reduced_operator(u0, csch2, d1, d2, dtau)
    energies = [energy(u_prev, u_cur, dt, n2, csch2, (d1, d2, dtau))]
    for step in range(1, n_steps + 1):
        if step in want and step != n_steps:
            snap(u_cur, step)
        if step == n_steps:
            break
        u_next = 2 * u_cur - u_prev + dt * dt * n2 * _reduced_operator(u_cur, csch2, d1, d2, dtau)
        u_prev, u_cur = u_cur, u_next
        energies.append(energy(u_prev, u_cur, dt, n2, csch2, (d1, d2, dtau)))
        if peak0 > 0 and np.max(np.abs(u_cur)) > 10 * peak0:
            raise BlowupError(f"solution grew beyond 10x its initial size at step {step}")
    e0 = energies[0]
    drift = float(max(abs(e - e0) for e in energies) / abs(e0)) if e0 != 0 else 0.0
    snap(u_cur, n_steps, {"energy_first": e0, "energy_last": energies[-1], "energy_drift": drift,
                          "n_steps": n_steps})
    return snaps


# ---------------------------------------------------------------------------
# roundtrip error

def _norms(diff, ref, weights):
    linf = float(np.max(np.abs(diff)) / np.max(np.abs(ref))) if np.any(ref) else float(np.max(np.abs(diff)))
    l1_ref = float(np.sum(weights * np.abs(ref)))
    l1 = float(np.sum(weights * np.abs(diff)))
    return linf, (l1 / l1_ref if l1_ref > 0 else l1)


def roundtrip_error(profile: RadialProfile, mu: int, policy=None) -> tuple:
    """(L-infinity, L1) relative errors of inverse(forward(profile)) on its nodes.

    ``policy`` supplies ``k_max`` and ``k_nodes_per_unit`` (defaults 60, 64).
    """
    k_max = getattr(policy, "k_max", 60.0)
    per_unit = getattr(policy, "k_nodes_per_unit", 64)
    if not np.any(profile.values):
        return 0.0, 0.0
    kn, kw = k_grid(k_max, per_unit)
    dens = forward(profile, mu, kn, kw)
    back = inverse(dens, profile.tau_nodes, profile.weights, rtol=np.inf)
    return _norms(back.values - profile.values, profile.values, profile.weights)


def roundtrip_sweep(profile: RadialProfile, mu: int, k_max_list=(30.0, 60.0, 120.0),
                    nodes_per_unit: int = 64) -> dict:
    """Roundtrip errors for several k_max sharing one forward transform.

    The composite rule on (0, K] restricted to (0, k] is the composite rule
    on (0, k] when k is an integer, so one density on the largest grid
    serves every k_max.
    """
    top = max(k_max_list)
    kn, kw = k_grid(top, nodes_per_unit)
    dens = forward(profile, mu, kn, kw)
    # the forward pass used the same (k, tau) matrix, so the inverses are row slices of it
    mat = kernel_matrix(mu, kn, profile.tau_nodes)
    out = {}
    for km in k_max_list:
        part: SpectralDensity = dens.truncate(km)
        rows = part.k_nodes.size
        values = (part.weights * part.values) @ mat[:rows]
        linf, l1 = _norms(values - profile.values, profile.values, profile.weights)
        out[float(km)] = {"linf": linf, "l1": l1, "k_tail_estimate": k_tail_estimate(part)}
    return out
