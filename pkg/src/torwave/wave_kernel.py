"""Mode-synthesized solution operator for the Poschl-Teller wave problem.

With complex Fourier coefficients

    f_{m,mu}(tau') = int int q(phi1', phi2', tau') e^{-i m phi1'} e^{-i mu phi2'} dphi1' dphi2'

the synthesized solution is

    u(t, phi1, phi2, tau) = 1/(4 pi^2) sum_{m, mu} e^{i m phi1 + i mu phi2}
        int_0^inf cos(N(tau, phi1) sigma_{k,m} t) K_mu(k, tau) H_mu[f_{m,mu}](k) dk,

with sigma_{k,m} = sqrt(k^2 + m^2) and H_mu the Mehler-Fock forward transform.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import GridError, ResolutionError, SupportError
from .geometry import FieldGrid, TorusGeometry, apply_poschl_teller, periodic_nodes, prefactor_N
from .mehler_fock import RadialProfile, composite_gauss_legendre, kernel_matrix

TWO_PI = 2.0 * math.pi
# nodes per oscillation period demanded of the k quadrature
NODES_PER_PERIOD = 10.0


@dataclass(frozen=True)
class ModeIndex:
    m: int
    mu: int

    def __post_init__(self):
        for name in ("m", "mu"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer, got {v}")
            object.__setattr__(self, name, int(v))


@dataclass(frozen=True)
class TruncationPolicy:
    """Mode and quadrature truncation.

    ``mu_rule`` is either "explicit" (keep |mu| <= mu_max) or "mu2_lt_k"
    (keep the mu-mode at quadrature node k only when mu^2 < k, with |mu|
    additionally capped by mu_max).
    """
    m_max: int = 32
    mu_max: int = 32
    mu_rule: str = "explicit"
    k_max: float = 60.0
    k_nodes_per_unit: int = 64
    max_nodes_per_unit: int = 4096
    tau_max: float = 12.0

    def __post_init__(self):
        if self.m_max < 0 or self.mu_max < 0:
            raise ValueError("m_max and mu_max must be non-negative")
        if self.mu_rule not in ("explicit", "mu2_lt_k"):
            raise ValueError(f"unknown mu_rule {self.mu_rule!r}")
        if not (self.k_max > 0 and self.k_nodes_per_unit > 0 and self.tau_max > 0):
            raise ValueError("k_max, k_nodes_per_unit and tau_max must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class InitialData:
    """Initial displacement q (zero initial velocity).

    ``q`` is either a callable q(phi1, phi2, tau) or a FieldGrid.  It must
    vanish for tau < eps0 and tau > support_tau_max.
    """
    q: Union[Callable, FieldGrid]
    eps0: float
    support_tau_max: float
    n_angle: int = 128
    tau_nodes_per_unit: int = 64
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0 < self.eps0 < self.support_tau_max):
            raise SupportError("need 0 < eps0 < support_tau_max")
        if self.n_angle < 4:
            raise GridError("n_angle must be at least 4")

    def scaled(self, factor: float) -> "InitialData":
        if isinstance(self.q, FieldGrid):
            q = self.q.with_values(factor * self.q.values)
        else:
            base = self.q
            q = lambda p1, p2, t: factor * base(p1, p2, t)
        return InitialData(q, self.eps0, self.support_tau_max, self.n_angle,
                           self.tau_nodes_per_unit, dict(self.meta))


@dataclass(frozen=True)
class GridSpec:
    n_phi1: int
    n_phi2: int
    tau_nodes: tuple
    phi1_start: float = -math.pi

    @classmethod
    def uniform(cls, n_phi1: int, n_phi2: int, tau_lo: float, tau_hi: float, n_tau: int) -> "GridSpec":
        return cls(n_phi1, n_phi2, tuple(np.linspace(tau_lo, tau_hi, n_tau)))

    def axes(self):
        return (periodic_nodes(self.n_phi1, self.phi1_start), periodic_nodes(self.n_phi2),
                np.asarray(self.tau_nodes, dtype=float))


# ---------------------------------------------------------------------------
# Fourier coefficients of the data

@dataclass
class ModeCoefficients:
    """All f_{m,mu}(tau') for |m| <= m_max, |mu| <= mu_max on quadrature nodes."""
    values: np.ndarray          # shape (2 m_max + 1, 2 mu_max + 1, n_tau), index m + m_max
    tau_nodes: np.ndarray
    tau_weights: np.ndarray
    m_max: int
    mu_max: int

    def profile(self, m: int, mu: int) -> RadialProfile:
        if abs(m) > self.m_max or abs(mu) > self.mu_max:
            raise IndexError("mode outside the computed range")
        vals = self.values[m + self.m_max, mu + self.mu_max]
        return RadialProfile(self.tau_nodes, vals, None, self.tau_weights, meta={"m": m, "mu": mu})


def _data_samples(data: InitialData, geom: Optional[TorusGeometry]):
    """Samples of q on (phi1, phi2, tau') with tau' quadrature weights."""
    if isinstance(data.q, FieldGrid):
        grid = data.q
        tau = grid.tau
        w = np.zeros_like(tau)
        d = np.diff(tau)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
        outside = (tau < data.eps0) | (tau > data.support_tau_max)
        scale = float(np.max(np.abs(grid.values))) if grid.values.size else 0.0
        if outside.any() and np.max(np.abs(grid.values[:, :, outside])) > 1e-12 * max(scale, 1e-300):
            raise SupportError("data does not vanish outside [eps0, support_tau_max]")
        keep = ~outside
        return grid.values[:, :, keep], grid.phi1, grid.phi2, tau[keep], w[keep]
    n = data.n_angle
    phi1 = periodic_nodes(n, -math.pi)
    phi2 = periodic_nodes(n)
    tau, w = composite_gauss_legendre(data.support_tau_max, data.tau_nodes_per_unit, lower=data.eps0)
    P1, P2, T = np.meshgrid(phi1, phi2, tau, indexing="ij")
    vals = np.asarray(data.q(P1, P2, T), dtype=float)
    # probe the support condition just outside the declared interval
    upper = data.support_tau_max + np.linspace(0.0, 0.25, 6)[1:] * data.support_tau_max
    if geom is not None:
        upper = upper[upper <= geom.tau1]
    probe_tau = np.concatenate([np.linspace(0.0, data.eps0, 8)[1:-1], upper])
    Q1, Q2, QT = np.meshgrid(phi1[::4], phi2[::4], probe_tau, indexing="ij")
    probe = np.asarray(data.q(Q1, Q2, QT), dtype=float)
    scale = float(np.max(np.abs(vals))) if vals.size else 0.0
    if probe.size and np.max(np.abs(probe)) > 1e-12 * max(scale, 1e-300):
        raise SupportError("data does not vanish outside [eps0, support_tau_max]")
    return vals, phi1, phi2, tau, w


def all_mode_coefficients(data: InitialData, m_max: int, mu_max: int,
                          geom: Optional[TorusGeometry] = None) -> ModeCoefficients:
    """f_{m,mu} for all |m| <= m_max, |mu| <= mu_max by the periodic trapezoidal rule."""
    vals, phi1, phi2, tau, w = _data_samples(data, geom)
    n1, n2 = phi1.size, phi2.size
    if 2 * m_max + 1 > n1 or 2 * mu_max + 1 > n2:
        raise GridError(f"angular sampling ({n1}, {n2}) too coarse for m_max={m_max}, mu_max={mu_max}")
    spec = np.fft.fft2(vals, axes=(0, 1)) * (TWO_PI / n1) * (TWO_PI / n2)
    ms = np.arange(-m_max, m_max + 1)
    mus = np.arange(-mu_max, mu_max + 1)
    # shift by the grid origin: e^{-i m phi1_0}
    phase1 = np.exp(-1j * ms * phi1[0])
    phase2 = np.exp(-1j * mus * phi2[0])
    coef = spec[np.ix_(ms % n1, mus % n2)] * phase1[:, None, None] * phase2[None, :, None]
    return ModeCoefficients(coef, tau, w, int(m_max), int(mu_max))


def mode_coefficients(data: InitialData, idx: ModeIndex, geom: Optional[TorusGeometry] = None
                      ) -> RadialProfile:
    """f_{m,mu}(tau') for one mode, tagged with its decay evidence (m^2 + mu^2) max|f|."""
    n_need = max(idx.m, idx.mu)
    coeffs = all_mode_coefficients(data, n_need, n_need, geom)
    prof = coeffs.profile(idx.m, idx.mu)
    peak = float(np.max(np.abs(prof.values))) if prof.values.size else 0.0
    prof.meta["weighted_peak"] = (idx.m ** 2 + idx.mu ** 2) * peak
    return prof


# ---------------------------------------------------------------------------
# propagation

def k_quadrature(policy: TruncationPolicy, t: float, n_max: float, tau_max: float):
    """Composite Gauss-Legendre k nodes with density scaled to the phase frequency.

    The k-derivative of the phase N sigma t + k(tau + tau') is bounded by
    n_max |t| + tau_max; the node density grows linearly with that bound.
    """
    # k_nodes_per_unit is calibrated for a phase frequency of policy.tau_max
    freq = n_max * abs(t) + tau_max
    per_unit = int(math.ceil(policy.k_nodes_per_unit * (1.0 + freq) / (1.0 + policy.tau_max)))
    if per_unit > policy.max_nodes_per_unit:
        raise ResolutionError(f"k quadrature needs {per_unit} nodes per unit, cap is {policy.max_nodes_per_unit}")
    if per_unit * TWO_PI / max(freq, 1e-12) < NODES_PER_PERIOD:
        raise ResolutionError("k quadrature would have fewer than 10 nodes per oscillation period")
    nodes, weights = composite_gauss_legendre(policy.k_max, per_unit)
    return nodes, weights


def mode_propagate(coeff: RadialProfile, idx: ModeIndex, t: float, tau: float, phi1: float,
                   geom: TorusGeometry, policy: TruncationPolicy):
    """int_0^inf cos(N sigma_{k,m} t) K_mu(k, tau) H_mu[coeff](k) dk for one point."""
    n_val = float(prefactor_N(tau, phi1, geom))
    tau_reach = max(float(tau), float(coeff.tau_nodes[-1]))
    k, kw = k_quadrature(policy, t, n_val, 2.0 * tau_reach)
    dens = kernel_matrix(idx.mu, k, coeff.tau_nodes) @ (coeff.weights * coeff.values)
    kern = kernel_matrix(idx.mu, k, np.array([float(tau)]))[:, 0]
    factor = np.cos(n_val * np.hypot(k, idx.m) * t)
    if policy.mu_rule == "mu2_lt_k":
        factor = factor * (idx.mu ** 2 < k)
    val = np.sum(kw * factor * kern * dens)
    return float(val.real) if np.isrealobj(coeff.values) else complex(val)


def _check_output_grid(tau_out, geom: TorusGeometry, eps_margin: Optional[float]):
    margin = 0.05 * geom.tau1 if eps_margin is None else eps_margin
    if tau_out[0] < margin:
        raise GridError(f"output grid starts at tau={tau_out[0]:.4g} below the margin {margin:.4g}")
    if tau_out[-1] > geom.tau1 * (1 + 1e-12):
        raise GridError("output grid leaves the exterior domain")


def synthesize(data: InitialData, t: float, grid: GridSpec, geom: TorusGeometry,
               policy: TruncationPolicy = TruncationPolicy(),
               eps_margin: Optional[float] = None,
               coeffs: Optional[ModeCoefficients] = None) -> FieldGrid:
    """u(t) on the product grid by summing all retained (m, mu) modes.

    ``meta`` of the returned grid holds the signed time, the policy, and
    the truncation-tail estimate (sup of the outermost m-shell plus the
    outermost mu-shell contributions).
    """
    phi1, phi2, tau_out = grid.axes()
    _check_output_grid(tau_out, geom, eps_margin)
    if coeffs is None:
        coeffs = all_mode_coefficients(data, policy.m_max, policy.mu_max, geom)
    m_max, mu_max = coeffs.m_max, coeffs.mu_max
    if m_max < policy.m_max or mu_max < policy.mu_max:
        raise GridError("supplied coefficients do not cover the policy's mode range")
    m_max, mu_max = policy.m_max, policy.mu_max
    cvals = coeffs.values[coeffs.m_max - m_max: coeffs.m_max + m_max + 1,
                          coeffs.mu_max - mu_max: coeffs.mu_max + mu_max + 1]

    n_grid = (np.cosh(tau_out)[None, :] - np.cos(phi1)[:, None]) / geom.a  # (n1, n_tau)
    tau_reach = float(max(tau_out[-1], coeffs.tau_nodes[-1]))
    k, kw = k_quadrature(policy, t, float(n_grid.max()), 2.0 * tau_reach)

    data_kernels = [kernel_matrix(mu, k, coeffs.tau_nodes) for mu in range(mu_max + 1)]
    out_kernels = np.stack([kernel_matrix(mu, k, tau_out) for mu in range(mu_max + 1)])  # (mu, k, tau)
    mus = np.arange(-mu_max, mu_max + 1)
    abs_mus = np.abs(mus)
    if policy.mu_rule == "mu2_lt_k":
        mu_mask = (abs_mus[:, None] ** 2 < k[None, :]).astype(float)
    else:
        mu_mask = np.ones((mus.size, k.size))

    # real data: the (-m, -mu) mode is the conjugate of (m, mu), so only m >= 0 is summed
    u = np.zeros((phi1.size, phi2.size, tau_out.size))
    m_shell = np.zeros_like(u)
    mu_shell_bound = 0.0
    e2 = np.exp(1j * np.outer(mus, phi2))  # (mu, n2)
    weighted = cvals * coeffs.tau_weights  # (m, mu, tau')
    out_by_mu = out_kernels[abs_mus]  # (mu, k, tau)
    out_peak = np.max(np.abs(out_kernels), axis=2)  # (mu_abs, k)
    edge = abs_mus == mu_max
    for m_abs in range(m_max + 1):
        mult = 1.0 if m_abs == 0 else 2.0
        dens = np.empty((mus.size, k.size), dtype=complex)
        for j in range(mus.size):
            dens[j] = data_kernels[abs_mus[j]] @ weighted[m_abs + m_max, j]
        dens *= mu_mask
        sigma = np.hypot(k, m_abs)
        # W[k, tau, phi2] = sum_mu e^{i mu phi2} H_{m,mu}(k) K_mu(k, tau)
        e1 = np.exp(1j * m_abs * phi1)
        contrib = np.empty_like(u)
        for o in range(tau_out.size):
            w_mat = (dens * out_by_mu[:, :, o]).T @ e2  # (k, n2)
            w_real = np.concatenate([w_mat.real, w_mat.imag], axis=1)
            cos_mat = np.cos(np.outer(n_grid[:, o], sigma) * t) * kw[None, :]
            s_real = cos_mat @ w_real  # (n1, 2 n2)
            s_mat = s_real[:, :phi2.size] + 1j * s_real[:, phi2.size:]
            contrib[:, :, o] = (e1[:, None] * s_mat).real
        contrib *= mult / (4 * math.pi ** 2)
        u += contrib
        if m_abs == m_max:
            m_shell += contrib
        else:
            # |cos| <= 1 bound on the outermost mu modes
            mu_shell_bound += mult / (4 * math.pi ** 2) * float(
                np.sum(kw * np.abs(dens[edge]) * out_peak[mu_max][None, :]))

    tail = float(np.max(np.abs(m_shell)) + mu_shell_bound)
    meta = {"t": float(t), "tail_estimate": tail, "policy": policy.to_dict(),
            "k_nodes": int(k.size), "geometry": geom.to_dict()}
    return FieldGrid(u, phi1, phi2, tau_out, abs(float(t)), meta)


def pde_residual(states, geom: TorusGeometry, delta: Optional[float] = None,
                 operator: Optional[Callable] = None) -> float:
    """Normalized sup of (u(t+d) - 2u(t) + u(t-d))/d^2 - Delta_P u(t) over interior nodes.

    ``states`` are FieldGrids at t - d, t, t + d.  The signed times are read
    from ``meta["t"]`` when present; ``delta`` overrides them.  ``operator``
    replaces Delta_P (it must return a FieldGrid on the interior tau nodes).
    """
    if len(states) != 3:
        raise GridError("need exactly three states")
    before, now, after = states
    for s in (before, after):
        if (s.values.shape != now.values.shape or not np.array_equal(s.tau, now.tau)
                or not np.array_equal(s.phi1, now.phi1) or not np.array_equal(s.phi2, now.phi2)):
            raise GridError("states must share a common grid")
    if delta is None:
        times = [s.meta.get("t", s.time_stamp) for s in states]
        d1, d2 = times[1] - times[0], times[2] - times[1]
        if not (d1 > 0 and abs(d1 - d2) <= 1e-12 * max(abs(d1), 1.0)):
            raise GridError("time stamps are not uniformly spaced")
        delta = d1
    op = apply_poschl_teller if operator is None else operator
    lap = op(now, geom).values
    second = (after.values - 2.0 * now.values + before.values)[:, :, 1:-1] / (delta * delta)
    scale = float(np.max(np.abs(now.values)))
    if scale == 0.0:
        return 0.0
    return float(np.max(np.abs(second - lap)) / scale)
