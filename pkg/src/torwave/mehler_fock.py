"""Mehler-Fock transform pair with kernel K_mu(k, tau).

    forward:  H(k)   = int_0^inf G(tau) K_mu(k, tau) dtau
    inverse:  G(tau) = int_0^inf H(k)   K_mu(k, tau) dk

Both integrals use composite Gauss-Legendre rules.  Kernel matrices are
cached per (mu, k nodes, tau nodes) behind a lock, since building one is
the expensive step.
"""
from __future__ import annotations

import csv
import hashlib
import json
import threading
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import ClassError, DomainError, QuadratureError
from .specfun.conical import kernel_table

# sup_k,tau |K_mu(k, tau)| stays below this for the orders used here
KERNEL_BOUND = 1.5
DEFAULT_TAU_MAX = 12.0
DEFAULT_K_MAX = 60.0
DEFAULT_NODES_PER_UNIT = 64


def composite_gauss_legendre(upper: float, nodes_per_unit: int = DEFAULT_NODES_PER_UNIT,
                             lower: float = 0.0):
    """Nodes and weights of a composite Gauss-Legendre rule on (lower, upper].

    The interval is split into panels of length at most one, each carrying
    ``nodes_per_unit`` points.
    """
    if not upper > lower:
        raise DomainError("upper must exceed lower")
    n_panels = int(np.ceil(upper - lower - 1e-12))
    edges = np.linspace(lower, upper, n_panels + 1)
    x, w = np.polynomial.legendre.leggauss(int(nodes_per_unit))
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _trapezoid_weights(nodes):
    nodes = np.asarray(nodes, dtype=float)
    w = np.zeros_like(nodes)
    if nodes.size > 1:
        d = np.diff(nodes)
        w[:-1] += 0.5 * d
        w[1:] += 0.5 * d
    return w


def _check_nodes(nodes, name):
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1 or nodes.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-D array")
    if not np.all(np.isfinite(nodes)) or nodes[0] <= 0 or np.any(np.diff(nodes) <= 0):
        raise DomainError(f"{name} must be finite, positive and strictly increasing")
    return nodes


@dataclass
class RadialProfile:
    """A sampled function of tau, optionally with quadrature weights."""
    tau_nodes: np.ndarray
    values: np.ndarray
    decay_rate: Optional[float] = None
    weights: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tau_nodes = _check_nodes(self.tau_nodes, "tau_nodes")
        self.values = np.asarray(self.values)
        if self.values.shape != self.tau_nodes.shape:
            raise DomainError("values and tau_nodes differ in shape")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("profile values must be finite")
        if self.decay_rate is not None and not self.decay_rate > 0:
            raise DomainError("decay_rate must be positive")
        if self.weights is None:
            self.weights = _trapezoid_weights(self.tau_nodes)
        self.weights = np.asarray(self.weights, dtype=float)

    @classmethod
    def from_function(cls, func, tau_max: float = DEFAULT_TAU_MAX,
                      nodes_per_unit: int = DEFAULT_NODES_PER_UNIT,
                      decay_rate: Optional[float] = None) -> "RadialProfile":
        nodes, weights = composite_gauss_legendre(tau_max, nodes_per_unit)
        return cls(nodes, np.asarray(func(nodes), dtype=float), decay_rate, weights)

    def with_values(self, values) -> "RadialProfile":
        return RadialProfile(self.tau_nodes, values, self.decay_rate, self.weights, dict(self.meta))


@dataclass
class SpectralDensity:
    """A sampled function of k for a fixed order mu."""
    k_nodes: np.ndarray
    values: np.ndarray
    mu: int
    weights: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.k_nodes = _check_nodes(self.k_nodes, "k_nodes")
        self.values = np.asarray(self.values)
        if self.values.shape != self.k_nodes.shape:
            raise DomainError("values and k_nodes differ in shape")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("density values must be finite")
        if int(self.mu) != self.mu or self.mu < 0:
            raise DomainError("mu must be a non-negative integer")
        self.mu = int(self.mu)
        if self.weights is None:
            self.weights = _trapezoid_weights(self.k_nodes)
        self.weights = np.asarray(self.weights, dtype=float)

    def truncate(self, k_max: float) -> "SpectralDensity":
        keep = self.k_nodes <= k_max * (1 + 1e-12)
        return SpectralDensity(self.k_nodes[keep], self.values[keep], self.mu,
                               self.weights[keep], dict(self.meta))


# ---------------------------------------------------------------------------
# kernel matrix cache

_CACHE_SIZE = 6
_cache: "OrderedDict[tuple, np.ndarray]" = OrderedDict()
_cache_lock = threading.Lock()


def _digest(arr) -> str:
    return hashlib.sha1(np.ascontiguousarray(arr, dtype=float).tobytes()).hexdigest()


def kernel_matrix(mu: int, k_nodes, tau_nodes) -> np.ndarray:
    """K_mu(k_i, tau_j) as a (len(k_nodes), len(tau_nodes)) array (cached)."""
    k_nodes = np.asarray(k_nodes, dtype=float)
    tau_nodes = np.asarray(tau_nodes, dtype=float)
    key = (int(mu), _digest(k_nodes), _digest(tau_nodes))
    with _cache_lock:
        hit = _cache.get(key)
        if hit is not None:
            _cache.move_to_end(key)
            return hit
    mat, _, _ = kernel_table(int(mu), k_nodes[:, None], tau_nodes[None, :])
    mat.setflags(write=False)
    with _cache_lock:
        _cache[key] = mat
        while len(_cache) > _CACHE_SIZE:
            _cache.popitem(last=False)
    return mat


def clear_kernel_cache() -> None:
    with _cache_lock:
        _cache.clear()


# ---------------------------------------------------------------------------
# class A

@dataclass
class ClassAReport:
    passed: bool
    integrable: bool
    tail_decays: bool
    bounded_at_zero: bool
    tail_slope: float
    zero_exponent: float
    l1_norm: float
    messages: list

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _log_slope(x, y):
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def class_a_check(profile: RadialProfile, min_tail_samples: int = 16) -> ClassAReport:
    """Sampled test of class membership: L^1, tail o(e^{-tau}), bounded at 0.

    The tail slope is a least-squares fit of log|G| against tau on the upper
    half of the sampled range; the behaviour at zero is a fit of log|G|
    against log tau on the smallest nodes.
    """
    tau = profile.tau_nodes
    g = np.abs(np.asarray(profile.values))
    msgs = []
    l1 = float(np.sum(profile.weights * g))
    integrable = bool(np.isfinite(l1))
    if not integrable:
        msgs.append("L1 norm on the sampled range is not finite")

    upper = tau >= 0.5 * (tau[0] + tau[-1])
    if int(upper.sum()) < min_tail_samples:
        raise DomainError(f"need at least {min_tail_samples} tail samples, got {int(upper.sum())}")
    live = upper & (g > 1e-300)
    if live.sum() < 2:
        tail_slope = -np.inf
    else:
        tail_slope = _log_slope(tau[live], np.log(g[live]))
    tail_decays = bool(tail_slope < -1.0)
    if not tail_decays:
        msgs.append(f"tail slope {tail_slope:.3f} of log|G| is not below -1")

    near = (tau <= min(0.2, 0.1 * tau[-1])) & (g > 1e-300)
    idx = np.nonzero(near)[0][:12]
    if idx.size >= 3:
        zero_exponent = _log_slope(np.log(tau[idx]), np.log(g[idx]))
    else:
        zero_exponent = 0.0
    bounded = bool(zero_exponent > -0.1 and integrable)
    if not bounded:
        msgs.append(f"|G| grows like tau^{zero_exponent:.2f} near 0")
    passed = integrable and tail_decays and bounded
    return ClassAReport(passed, integrable, tail_decays, bounded, float(tail_slope),
                        float(zero_exponent), l1, msgs)


# ---------------------------------------------------------------------------
# transforms

def _tail_bound_tau(profile: RadialProfile, report: ClassAReport) -> float:
    """Bound on int_{tau_max}^inf |G| |K| from an exponential fit of the tail."""
    rate = profile.decay_rate if profile.decay_rate is not None else -report.tail_slope
    if not np.isfinite(rate):
        return 0.0
    tau = profile.tau_nodes
    g = np.abs(profile.values)
    upper = tau >= 0.5 * (tau[0] + tau[-1])
    live = upper & (g > 0)
    if not live.any():
        return 0.0
    log_const = float(np.max(np.log(g[live]) + rate * tau[live]))
    return float(KERNEL_BOUND * np.exp(log_const - rate * tau[-1]) / rate)


def forward(profile: RadialProfile, mu: int, k_nodes, k_weights=None, tol: float = 1e-8,
            ) -> SpectralDensity:
    """H_mu(G, k) on the given k nodes.

    Raises ClassError when the profile fails ``class_a_check`` and
    QuadratureError when the truncated tau-tail may exceed ``tol`` times
    the L^1 norm of the profile.
    """
    report = class_a_check(profile)
    if not report.passed:
        raise ClassError("profile is not in class A: " + "; ".join(report.messages))
    k_nodes = _check_nodes(k_nodes, "k_nodes")
    tail = _tail_bound_tau(profile, report)
    if tail > tol * max(report.l1_norm, 1e-300):
        raise QuadratureError(f"tau-tail beyond {profile.tau_nodes[-1]:g} estimated at {tail:.3g}")
    mat = kernel_matrix(mu, k_nodes, profile.tau_nodes)
    values = mat @ (profile.weights * profile.values)
    return SpectralDensity(k_nodes, values, mu, k_weights,
                           meta={"tau_tail_bound": tail, "l1_norm": report.l1_norm})


def k_tail_estimate(density: SpectralDensity) -> float:
    """Estimate of int_{k_max}^inf |F(k)| |K| dk from the sampled envelope.

    The envelope is the running maximum of |F| over the last third of the
    nodes, fitted by a power law; a non-integrable fit gives infinity.
    """
    k = density.k_nodes
    f = np.abs(density.values)
    scale = float(np.max(f)) if f.size else 0.0
    if scale == 0.0:
        return 0.0
    start = int(2 * k.size / 3)
    kk = k[start:]
    env = np.maximum.accumulate(f[start:][::-1])[::-1]
    if kk.size < 4:
        return np.inf
    floor = 1e-13 * scale
    if env[-1] <= floor:
        return float(floor * k[-1])
    live = env > floor
    slope = _log_slope(np.log(kk[live]), np.log(env[live]))
    if slope >= -1.05:
        return np.inf
    return float(KERNEL_BOUND * env[-1] * k[-1] / (-slope - 1.0))


def inverse(density: SpectralDensity, tau_nodes, tau_weights=None, rtol: float = 0.05,
            decay_rate: Optional[float] = None) -> RadialProfile:
    """G_mu(F, tau) on the given tau nodes.

    The k-tail beyond the last node is estimated by ``k_tail_estimate`` and
    stored in ``meta["k_tail_estimate"]``; QuadratureError is raised when it
    exceeds ``rtol`` times the largest reconstructed value.
    """
    tau_nodes = _check_nodes(tau_nodes, "tau_nodes")
    mat = kernel_matrix(density.mu, density.k_nodes, tau_nodes)
    values = (density.weights * density.values) @ mat
    tail = k_tail_estimate(density)
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    if tail > rtol * max(peak, 1e-300) and peak > 0:
        raise QuadratureError(f"k-tail beyond {density.k_nodes[-1]:g} unresolved (estimate {tail:.3g})")
    return RadialProfile(tau_nodes, values, decay_rate, tau_weights,
                         meta={"k_tail_estimate": tail, "mu": density.mu})


def k_grid(k_max: float = DEFAULT_K_MAX, nodes_per_unit: int = DEFAULT_NODES_PER_UNIT):
    return composite_gauss_legendre(k_max, nodes_per_unit)


def tau_grid(tau_max: float = DEFAULT_TAU_MAX, nodes_per_unit: int = DEFAULT_NODES_PER_UNIT):
    return composite_gauss_legendre(tau_max, nodes_per_unit)


# ---------------------------------------------------------------------------
# serialization

def save_profile(profile, path) -> None:
    """CSV of (node, value, weight) plus a JSON sidecar with the metadata."""
    path = Path(path)
    if isinstance(profile, RadialProfile):
        nodes, head = profile.tau_nodes, "tau"
        side = {"kind": "radial_profile", "decay_rate": profile.decay_rate}
    elif isinstance(profile, SpectralDensity):
        nodes, head = profile.k_nodes, "k"
        side = {"kind": "spectral_density", "mu": profile.mu}
    else:
        raise TypeError("expected RadialProfile or SpectralDensity")
    side["n_nodes"] = int(nodes.size)
    side["meta"] = {k: v for k, v in profile.meta.items() if isinstance(v, (int, float, str))}
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([head, "value", "weight"])
        for row in zip(nodes, profile.values, profile.weights):
            writer.writerow([repr(float(v)) for v in row])
    Path(str(path) + ".json").write_text(json.dumps(side, indent=2, sort_keys=True))


def load_profile(path):
    path = Path(path)
    side = json.loads(Path(str(path) + ".json").read_text())
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if side["kind"] == "radial_profile":
        return RadialProfile(data[:, 0], data[:, 1], side.get("decay_rate"), data[:, 2])
    return SpectralDensity(data[:, 0], data[:, 1], side["mu"], data[:, 2])


# ---------------------------------------------------------------------------
# scikit-learn estimator

class MehlerFockTransform(TransformerMixin, BaseEstimator):
    """Row-wise Mehler-Fock transform of profiles sampled on a fixed tau grid.

    ``fit`` builds the quadrature grids and the kernel matrix; ``transform``
    maps rows of profile samples on ``tau_nodes_`` to densities on
    ``k_nodes_``; ``inverse_transform`` maps densities back.
    """

    def __init__(self, mu: int = 0, k_max: float = DEFAULT_K_MAX,
                 tau_max: float = DEFAULT_TAU_MAX, nodes_per_unit: int = DEFAULT_NODES_PER_UNIT):
        self.mu = mu
        self.k_max = k_max
        self.tau_max = tau_max
        self.nodes_per_unit = nodes_per_unit

    def fit(self, X=None, y=None):
        if int(self.mu) != self.mu or self.mu < 0:
            raise DomainError("mu must be a non-negative integer")
        self.tau_nodes_, self.tau_weights_ = tau_grid(self.tau_max, self.nodes_per_unit)
        self.k_nodes_, self.k_weights_ = k_grid(self.k_max, self.nodes_per_unit)
        if X is not None:
            X = check_array(X)
            if X.shape[1] != self.tau_nodes_.size:
                raise ValueError(f"X has {X.shape[1]} columns, expected {self.tau_nodes_.size}")
        self.n_features_in_ = self.tau_nodes_.size
        self.kernel_ = kernel_matrix(int(self.mu), self.k_nodes_, self.tau_nodes_)
        return self

    def transform(self, X):
        check_is_fitted(self, "kernel_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return (X * self.tau_weights_) @ self.kernel_.T

    def inverse_transform(self, X):
        check_is_fitted(self, "kernel_")
        X = check_array(X)
        if X.shape[1] != self.k_nodes_.size:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.k_nodes_.size}")
        return (X * self.k_weights_) @ self.kernel_

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "kernel_")
        return np.array([f"k{i}" for i in range(self.k_nodes_.size)], dtype=object)
