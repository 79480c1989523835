"""Conical Legendre functions P^mu_{ik-1/2}(cosh x) and the Mehler-Fock kernel.

All convergent routes compute the weighted negative-order function

    w(mu, k, x) = sqrt(sinh x) * P^{-mu}_{ik-1/2}(cosh x),

which is bounded and real.  Positive order and the normalised kernel follow
from the order switch

    P^{mu} = (-1)^mu * prod_{l=1}^{mu} ((l-1/2)^2 + k^2) * P^{-mu},
    K_mu(k, x) = c_{k,mu} sqrt(sinh x) P^{mu} = (-1)^mu sqrt(k tanh(pi k) prod) * w.

Routes (integer code -> Regime tag):
  sinh series   -- hypergeometric series in -sinh^2 x (Series)
  jost series   -- two conjugate Jost solutions, series in e^{-2x} (Series)
  tanh series   -- hypergeometric series in tanh^2 x (Series)
  integral      -- Mehler-Dirichlet integral with Gauss-Jacobi nodes (IntegralRep)
  large k       -- leading large-k cosine (LargeK)
  bessel        -- sqrt(k tau) J_{-mu}(k tau) (BesselUniform)
  large mu      -- Bessel-K form for large order (LargeMu)
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special

from .. import _trace
from ..errors import DomainError, RegimeGapError
from .gamma import gamma_rel_err, loggamma
from .types import ConicalParams, EvalResult, Regime

_EPS = np.finfo(float).eps
_SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

R_SINH, R_JOST, R_TANH, R_INTEGRAL, R_LARGE_K, R_BESSEL, R_LARGE_MU = range(7)
ROUTE_NAMES = {
    R_SINH: "sinh_series",
    R_JOST: "jost_series",
    R_TANH: "tanh_series",
    R_INTEGRAL: "integral",
    R_LARGE_K: "large_k",
    R_BESSEL: "bessel_uniform",
    R_LARGE_MU: "large_mu",
}
ROUTE_REGIME = {
    R_SINH: Regime.SERIES,
    R_JOST: Regime.SERIES,
    R_TANH: Regime.SERIES,
    R_INTEGRAL: Regime.INTEGRAL_REP,
    R_LARGE_K: Regime.LARGE_K,
    R_BESSEL: Regime.BESSEL_UNIFORM,
    R_LARGE_MU: Regime.LARGE_MU,
}
_BY_NAME = {v: k for k, v in ROUTE_NAMES.items()}


# ---------------------------------------------------------------------------
# normalisation

def log_order_product(mu, k):
    """log prod_{l=1}^{mu} ((l - 1/2)^2 + k^2), vectorised."""
    mu = np.asarray(mu, dtype=int)
    k = np.asarray(k, dtype=float)
    mu_b, k_b = np.broadcast_arrays(mu, k)
    out = np.zeros(mu_b.shape)
    top = int(mu_b.max()) if mu_b.size else 0
    k2 = k_b * k_b
    for ell in range(1, top + 1):
        out += np.where(mu_b >= ell, np.log((ell - 0.5) ** 2 + k2), 0.0)
    return out


def _log_k_tanh(k):
    k = np.asarray(k, dtype=float)
    return np.log(k) + np.log(np.tanh(np.pi * k))


def c_norm(k, mu):
    """c_{k,mu} = sqrt(k tanh(pi k) / prod_{l<=mu}((l-1/2)^2 + k^2))."""
    k = np.asarray(k, dtype=float)
    if np.any(~(k > 0)):
        raise DomainError("c_norm needs k > 0")
    if np.any(np.asarray(mu) < 0):
        raise DomainError("c_norm needs mu >= 0")
    out = np.exp(0.5 * (_log_k_tanh(k) - log_order_product(mu, k)))
    return float(out) if out.ndim == 0 else out


def _log_kernel_scale(mu, k):
    """log of sqrt(k tanh(pi k) prod); K = (-1)^mu exp(.) * w."""
    return 0.5 * (_log_k_tanh(k) + log_order_product(mu, k))


def _sign(mu):
    return np.where(np.asarray(mu) % 2 == 0, 1.0, -1.0)


# ---------------------------------------------------------------------------
# convergent routes, vectorised over 1-D arrays of equal length

def _series_loop(step, init, rho_floor, params, max_terms):
    """Shared summation driver for sum_n term_n with term_{n+1} = term_n * ratio_n.

    step(n, p) -> ratio_n for the parameter arrays in dict ``p`` (already
    restricted to the active points).  Returns (sum, sum of (n+4)|term|,
    tail bound).
    """
    total = init.copy()
    weight = 4.0 * np.abs(init)
    tail = np.full(init.shape, np.inf)
    active = np.arange(init.size)
    p = dict(params)
    floor = rho_floor
    term = init.copy()
    ratio = step(0, p)
    n = 0
    while active.size and n < max_terms:
        term = term * ratio
        n += 1
        total[active] += term
        at = np.abs(term)
        weight[active] += (n + 4) * at
        ratio = step(n, p)
        rho = np.maximum(np.abs(ratio), floor)
        with np.errstate(over="ignore", invalid="ignore"):
            est = np.where(rho < 1.0, at * rho / np.maximum(1.0 - rho, 1e-300), np.inf)
        done = (est <= _EPS * np.abs(total[active])) | (at == 0.0) | (est < 1e-300)
        if done.any():
            tail[active[done]] = est[done]
            keep = ~done
            active = active[keep]
            term = term[keep]
            ratio = ratio[keep]
            floor = floor[keep]
            p = {key: val[keep] for key, val in p.items()}
    return total, weight, tail


def _route_sinh(mu, k, x, max_terms=4000):
    s = np.sinh(x)
    s2 = s * s
    init = np.exp(-special.gammaln(mu + 1.0)).astype(float)
    params = dict(alpha=0.5 * (mu + 0.5), kq=0.25 * k * k, mu1=mu + 1.0, s2=s2)

    def step(n, p):
        return -((n + p["alpha"]) ** 2 + p["kq"]) / ((p["mu1"] + n) * (n + 1.0)) * p["s2"]

    total, weight, tail = _series_loop(step, init, s2, params, max_terms)
    log_pref = (mu + 0.5) * np.log(s) - mu * math.log(2.0)
    pref = np.exp(log_pref)
    w = pref * total
    err = pref * (tail + 2 * _EPS * weight) + np.abs(w) * _EPS * (np.abs(log_pref) + 8.0)
    return w, err


def _jost_log_amplitude(mu, k):
    """log of Gamma(ik) / (sqrt(2 pi) Gamma(1/2 + mu + ik)), evaluated once per distinct (mu, k)."""
    log_a = np.empty(k.shape, dtype=complex)
    rel = np.empty(k.shape)
    for m in np.unique(mu):
        sel = np.nonzero(mu == m)[0]
        ku, inv = np.unique(k[sel], return_inverse=True)
        iku = 1j * ku
        la = (loggamma(1.0 + iku) - np.log(iku) - 0.5 * math.log(2.0 * math.pi)
              - loggamma(m + 0.5 + iku))
        ra = gamma_rel_err(1.0 + iku) + gamma_rel_err(m + 0.5 + iku)
        log_a[sel] = la[inv]
        rel[sel] = ra[inv]
    return log_a, rel


def _route_jost(mu, k, x, max_terms=6000):
    y = np.exp(-2.0 * x)
    muh = mu + 0.5
    ik = 1j * k
    params = dict(a=muh.astype(float), b=muh - ik, c=1.0 - ik, y=y)

    def step(n, p):
        return (n + p["a"]) * (n + p["b"]) / ((n + p["c"]) * (n + 1.0)) * p["y"]

    init = np.ones(x.shape, dtype=complex)
    total, weight, tail = _series_loop(step, init, y, params, max_terms)
    log_a, rel_a = _jost_log_amplitude(mu, k)
    log_pref = log_a + ik * x + muh * np.log1p(-y)
    pref = np.exp(log_pref)
    w = 2.0 * np.real(pref * total)
    big = 2.0 * np.abs(pref)
    rel = rel_a + _EPS * (k * x + np.abs(log_pref.real) + 8.0)
    err = big * (tail + _EPS * weight) + big * np.abs(total) * rel
    return w, err


def _route_tanh(mu, k, x, max_terms=6000):
    t = np.tanh(x)
    t2 = t * t
    a = 0.5 * (mu + 0.5 + 1j * k)
    init = np.exp(-special.gammaln(mu + 1.0)).astype(complex)
    params = dict(a=a, a2=a + 0.5, mu1=mu + 1.0, t2=t2)

    def step(n, p):
        return (p["a"] + n) * (p["a2"] + n) / ((p["mu1"] + n) * (n + 1.0)) * p["t2"]

    total, weight, tail = _series_loop(step, init, t2, params, max_terms)
    lc = np.log(np.cosh(x))
    log_pref = (mu + 0.5) * np.log(t) - mu * math.log(2.0)
    pref = np.exp(log_pref)
    w = pref * np.real(np.exp(-1j * k * lc) * total)
    err = (pref * (tail + 2 * _EPS * weight)
           + pref * np.abs(total) * _EPS * (k * lc + np.abs(log_pref) + 8.0))
    return w, err


_JACOBI_CACHE: dict = {}


def _jacobi_nodes(n: int, beta: float):
    # lru-style cache is per-process and read-only after insertion
    key = (n, beta)
    hit = _JACOBI_CACHE.get(key)
    if hit is None:
        u, wts = special.roots_jacobi(n, 0.0, beta)
        hit = (0.5 * (1.0 + u), wts * 2.0 ** (-beta - 1.0))
        if len(_JACOBI_CACHE) < 512:
            _JACOBI_CACHE[key] = hit
    return hit


def _md_sum(mu_val, k, x, n):
    s, wts = _jacobi_nodes(n, mu_val - 0.5)
    xs = x[:, None] * s[None, :]
    bracket = 2.0 * np.sinh(x[:, None] - 0.5 * xs) * np.sinh(0.5 * xs)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(xs > 0, bracket / xs, x[:, None])
    logsmooth = (mu_val - 0.5) * np.log(ratio)
    log_pref = (0.5 * math.log(2.0 / math.pi) + (0.5 - mu_val) * np.log(np.sinh(x))
                + (mu_val + 0.5) * np.log(x) - special.gammaln(mu_val + 0.5))
    expo = logsmooth + log_pref[:, None]
    mag = np.exp(expo)
    g = np.cos(k[:, None] * x[:, None] * (1.0 - s[None, :])) * mag
    val = g @ wts
    absval = (mag * (np.abs(expo) + 8.0)) @ wts
    return val, absval


_MD_BINS = (32, 48, 72, 108, 162, 243, 365, 548, 822, 1233, 1850, 2775)


def _route_integral(mu, k, x):
    w = np.zeros(x.shape)
    err = np.full(x.shape, np.inf)
    need = np.ceil(0.55 * k * x + 24.0 + 1.5 * np.sqrt(mu))
    bins = np.searchsorted(_MD_BINS, need)
    bins = np.minimum(bins, len(_MD_BINS) - 2)
    for mu_val in np.unique(mu):
        for b in np.unique(bins[mu == mu_val]):
            sel = np.nonzero((mu == mu_val) & (bins == b))[0]
            lo = _MD_BINS[b]
            hi = _MD_BINS[b + 1]
            v_lo, _ = _md_sum(float(mu_val), k[sel], x[sel], lo)
            v_hi, absval = _md_sum(float(mu_val), k[sel], x[sel], hi)
            w[sel] = v_hi
            err[sel] = (np.abs(v_hi - v_lo) + 2 * _EPS * absval * (1.0 + k[sel] * x[sel])
                        + 4 * _EPS * np.abs(v_hi))
    return w, err


# ---------------------------------------------------------------------------
# asymptotic routes; each returns (w, err) in the same weighted units

def _route_large_k(mu, k, x):
    # P^mu ~ k^{mu-1/2} sqrt(2/(pi sinh x)) cos(kx + (2mu-1)pi/4)
    phase = k * x + (2.0 * mu - 1.0) * math.pi / 4.0
    log_amp_p = (mu - 0.5) * np.log(k) + 0.5 * np.log(2.0 / (math.pi * np.sinh(x)))
    p_val = np.exp(log_amp_p) * np.cos(phase)
    coth = 1.0 / np.tanh(x)
    q = np.abs(mu * mu - 0.25)
    sum_sq = mu * (4.0 * mu * mu - 1.0) / 12.0  # sum_{l<=mu} (l-1/2)^2
    rel = (q * coth / (2.0 * k)
           + 2.0 * (q * q * coth * coth / (8.0 * k * k) + sum_sq / (k * k))
           + _EPS * (k * x + 8.0))
    p_err = np.exp(log_amp_p) * rel
    # w = (-1)^mu sqrt(sinh x) P^mu / prod
    conv = np.exp(0.5 * np.log(np.sinh(x)) - log_order_product(mu, k))
    return _sign(mu) * conv * p_val, conv * p_err


def _route_bessel(mu, k, x):
    z = k * x
    kval = _sign(mu) * np.sqrt(z) * special.jv(mu, z)
    q = np.abs(mu * mu - 0.25)
    with np.errstate(divide="ignore", invalid="ignore"):
        dv = np.where(x > 1e-4, np.abs(1.0 / np.tanh(x) - 1.0 / x), x / 3.0)
    # oscillatory zone: Bessel envelope; monotone zone: the value itself
    env = np.where(z > mu + 1.0, _SQRT_2_OVER_PI, 2.0 * np.abs(kval) + 1e-300)
    k_err = env * (1.5 * q * dv / (2.0 * k) + (q * q + 1.0) / (8.0 * k * k)) + _EPS * (z + 8.0)
    scale = np.exp(-_log_kernel_scale(mu, k))
    return _sign(mu) * kval * scale, k_err * scale


def _route_large_mu(mu, k, x):
    import mpmath as mp

    w = np.empty(x.shape)
    err = np.empty(x.shape)
    for i in range(x.size):
        m = int(mu[i])
        xi = math.log(1.0 / math.tanh(0.5 * x[i]))
        arg = m * xi
        bk = complex(mp.besselk(1j * float(k[i]), arg))
        log_p = 0.5 * math.log(2.0 * m * xi / math.pi) - math.lgamma(m + 1.0)
        val = math.exp(log_p + 0.5 * math.log(math.sinh(x[i]))) * bk.real
        w[i] = val
        err[i] = abs(val) * (k[i] * k[i] + 1.25) / (2.0 * m)
    return w, err


_ROUTE_FUNCS = {
    R_SINH: _route_sinh,
    R_JOST: _route_jost,
    R_TANH: _route_tanh,
    R_INTEGRAL: _route_integral,
    R_LARGE_K: _route_large_k,
    R_BESSEL: _route_bessel,
    R_LARGE_MU: _route_large_mu,
}


def _applicable(route, mu, k, x):
    """Mask of points where a convergent route can be attempted at all."""
    if route == R_SINH:
        return np.sinh(x) < 0.95
    if route == R_JOST:
        return x >= 0.012
    if route == R_TANH:
        return np.tanh(x) ** 2 <= 0.95
    if route == R_INTEGRAL:
        return np.ones(x.shape, dtype=bool)
    if route in (R_LARGE_K, R_BESSEL):
        return (x > 0) & (mu <= np.sqrt(k))
    if route == R_LARGE_MU:
        return (x > 0) & (mu >= 1)
    raise ValueError(route)


def _primary_route(mu, k, x):
    s = np.sinh(x)
    t = np.tanh(x)
    code = np.full(x.shape, R_INTEGRAL, dtype=int)
    jost_ok = (k * s >= mu + 4.0) & (x >= 0.012)
    tanh_ok = (t * t <= 0.85) & (k * t <= 10.0)
    sinh_ok = (s <= 0.9) & (k * s <= 10.0)
    code = np.where(tanh_ok, R_TANH, code)
    code = np.where(jost_ok, R_JOST, code)
    code = np.where(sinh_ok, R_SINH, code)
    return code


_FALLBACK_ORDER = (R_SINH, R_JOST, R_TANH, R_INTEGRAL)


def weighted_minus(mu, k, x, rtol: float = 1e-10, atol: float = 1e-11, strict: bool = True):
    """Vectorised w = sqrt(sinh x) P^{-mu}_{ik-1/2}(cosh x) by convergent routes.

    Accuracy target per point: err <= rtol*|w| + atol*env, where env is the
    large-x amplitude of w (so atol is measured in kernel units).
    Returns (w, err, route_code) arrays with the broadcast shape.
    """
    mu = np.asarray(mu)
    if np.any(mu < 0) or np.any(mu != np.round(mu)):
        raise DomainError("mu must be non-negative integers")
    k = np.asarray(k, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(~(k > 0)):
        raise DomainError("k must be positive")
    if np.any(~(x >= 0)):
        raise DomainError("x must be non-negative")
    mu_b, k_b, x_b = np.broadcast_arrays(mu.astype(int), k, x)
    shape = x_b.shape
    mu_f = mu_b.ravel().copy()
    k_f = k_b.ravel().copy()
    x_f = x_b.ravel().copy()

    w = np.zeros(x_f.shape)
    err = np.zeros(x_f.shape)
    code = np.full(x_f.shape, R_SINH, dtype=int)
    live = x_f > 0
    env = _SQRT_2_OVER_PI * np.exp(-_log_kernel_scale(mu_f, k_f))
    goal = lambda vals, idx: rtol * np.abs(vals) + atol * env[idx]

    pending = np.nonzero(live)[0]
    primary = _primary_route(mu_f[pending], k_f[pending], x_f[pending])
    err[pending] = np.inf
    for r in np.unique(primary):
        idx = pending[primary == r]
        wv, ev = _ROUTE_FUNCS[r](mu_f[idx], k_f[idx], x_f[idx])
        w[idx], err[idx], code[idx] = wv, ev, r
    tried = {int(r): pending[primary == r] for r in np.unique(primary)}

    bad = pending[~(err[pending] <= goal(w[pending], pending))]
    for r in _FALLBACK_ORDER:
        if not bad.size:
            break
        already = tried.get(r)
        cand = bad if already is None else np.setdiff1d(bad, already)
        cand = cand[_applicable(r, mu_f[cand], k_f[cand], x_f[cand])]
        if not cand.size:
            continue
        wv, ev = _ROUTE_FUNCS[r](mu_f[cand], k_f[cand], x_f[cand])
        better = ev < err[cand]
        sel = cand[better]
        w[sel], err[sel], code[sel] = wv[better], ev[better], r
        bad = bad[~(err[bad] <= goal(w[bad], bad))]

    if _trace.enabled():
        counts = {ROUTE_NAMES[int(r)]: int(np.sum(code[live] == r)) for r in np.unique(code[live])}
        _trace.emit("conical_dispatch", n_points=int(x_f.size), routes=counts,
                    unresolved=int(bad.size), rtol=rtol, atol=atol)
    if strict and bad.size:
        i = bad[0]
        raise RegimeGapError(
            f"{bad.size} point(s) missed the tolerance; first at mu={mu_f[i]}, k={k_f[i]:.6g}, "
            f"x={x_f[i]:.6g}: abs_err={err[i]:.3g}")
    return w.reshape(shape), err.reshape(shape), code.reshape(shape)


def kernel_table(mu, k, tau, rtol: float = 1e-10, atol: float = 1e-11, strict: bool = True):
    """Vectorised K_mu(k, tau) with absolute errors (convergent routes only)."""
    w, err, code = weighted_minus(mu, k, tau, rtol=rtol, atol=atol, strict=strict)
    mu_b = np.broadcast_to(np.asarray(mu, dtype=int), w.shape)
    k_b = np.broadcast_to(np.asarray(k, dtype=float), w.shape)
    scale = np.exp(_log_kernel_scale(mu_b, k_b))
    return _sign(mu_b) * scale * w, scale * err + 2 * _EPS * scale * np.abs(w), code


# ---------------------------------------------------------------------------
# scalar API

def _single(route, mu, k, x):
    arr = lambda v, t: np.array([v], dtype=t)
    wv, ev = _ROUTE_FUNCS[route](arr(mu, int), arr(k, float), arr(x, float))
    return float(wv[0]), float(ev[0])


def _weighted_scalar(mu, k, x, route, rtol, atol):
    """(w, err, route_code) for one point, honouring a forced route."""
    if x == 0.0:
        return 0.0, 0.0, R_SINH
    if route == "auto":
        w, e, c = weighted_minus(mu, k, x, rtol=rtol, atol=atol, strict=True)
        return float(w), float(e), int(c)
    code = _BY_NAME.get(route)
    if code is None:
        raise ValueError(f"unknown route {route!r}; choose from {sorted(_BY_NAME)} or 'auto'")
    if code in (R_LARGE_K, R_BESSEL) and mu > math.sqrt(k):
        # large-k expansions are only valid for mu <= sqrt(k)
        _trace.emit("stirling_guard", mu=mu, k=k, x=x, requested=route)
        w, e, c = weighted_minus(mu, k, x, rtol=rtol, atol=atol, strict=True)
        return float(w), float(e), int(c)
    if not _applicable(code, np.array([mu]), np.array([k]), np.array([x]))[0]:
        raise RegimeGapError(f"route {route} does not cover mu={mu}, k={k}, x={x}")
    w, e = _single(code, mu, k, x)
    _trace.emit("conical_route", mu=mu, k=k, x=x, route=route, abs_err=e)
    return w, e, code


def conical_p(p: ConicalParams | None = None, *, mu=None, k=None, x=None, weighted: bool = False,
              route: str = "auto", rtol: float = 1e-10, atol: float = 1e-11) -> EvalResult:
    """P^mu_{ik-1/2}(cosh x) for integer mu >= 0 and k > 0.

    With weighted=True the value is sqrt(sinh x) * P^mu instead.  Forced
    asymptotic routes ("large_k", "bessel_uniform") fall back to the
    convergent routes when mu > sqrt(k).
    """
    if p is None:
        p = ConicalParams(mu, k, x)
    mu, k, x = p.mu, p.k, p.x
    if x == 0.0:
        val = 0.0 if (weighted or mu > 0) else 1.0
        return EvalResult(val, 0.0, Regime.SERIES)
    w, e, code = _weighted_scalar(mu, k, x, route, rtol, atol)
    log_conv = float(log_order_product(mu, k))
    if not weighted:
        log_conv -= 0.5 * math.log(math.sinh(x))
    conv = math.exp(log_conv)
    sgn = -1.0 if mu % 2 else 1.0
    val = sgn * conv * w
    err = conv * e + 4 * _EPS * abs(val)
    if not math.isfinite(val):
        raise RegimeGapError(f"non-finite conical value at mu={mu}, k={k}, x={x}")
    return EvalResult(val, err, ROUTE_REGIME[code])


def conical_p_minus(p: ConicalParams, weighted: bool = False, **kw) -> EvalResult:
    """Negative order P^{-mu}, obtained from positive order through the order switch."""
    pos = conical_p(p, weighted=weighted, **kw)
    log_prod = float(log_order_product(p.mu, p.k))
    f = (-1.0 if p.mu % 2 else 1.0) * math.exp(-log_prod)
    return EvalResult(f * float(pos.value), abs(f) * pos.abs_err, pos.regime)


def _kernel_scalar_route(mu, k, tau, code):
    w, e = _single(code, mu, k, tau)
    scale = math.exp(float(_log_kernel_scale(mu, k)))
    sgn = -1.0 if mu % 2 else 1.0
    return sgn * scale * w, scale * e


def kernel_K(mu: int, k: float, tau: float, route: str = "auto", rtol: float = 1e-10,
             atol: float = 1e-11) -> EvalResult:
    """Mehler-Fock kernel K_mu(k, tau) = c_{k,mu} sqrt(sinh tau) P^mu_{ik-1/2}(cosh tau).

    Negative mu is mapped through K_{-mu} = (-1)^mu K_mu.  In auto mode the
    asymptotic regime matching the (k, tau) quadrant is tried first
    (large-k cosine for k >= 1, tau >= 1; Bessel-uniform for k >= 1, tau < 1);
    inside the +-10% band around tau = 1 both are evaluated and cross-checked.
    Whenever the asymptotic error misses the tolerance, or mu > sqrt(k), the
    convergent routes take over.
    """
    if int(mu) != mu:
        raise DomainError("mu must be an integer")
    mu = int(mu)
    if mu < 0:
        r = kernel_K(-mu, k, tau, route=route, rtol=rtol, atol=atol)
        f = -1.0 if mu % 2 else 1.0
        return EvalResult(f * float(r.value), r.abs_err, r.regime)
    p = ConicalParams(mu, k, tau)
    k, tau = p.k, p.x
    if tau == 0.0:
        return EvalResult(0.0, 0.0, Regime.SERIES)
    goal = lambda v: rtol * abs(v) + atol * _SQRT_2_OVER_PI

    if route == "auto":
        if k >= 1.0 and mu <= math.sqrt(k):
            cands = []
            if tau >= 0.9:
                cands.append(R_LARGE_K)
            if tau <= 1.1:
                cands.append(R_BESSEL)
            results = {c: _kernel_scalar_route(mu, k, tau, c) for c in cands}
            if len(results) == 2:
                (v1, e1), (v2, e2) = results[R_LARGE_K], results[R_BESSEL]
                _trace.emit("overlap_check", mu=mu, k=k, tau=tau, large_k=v1, bessel=v2,
                            agree=bool(abs(v1 - v2) <= e1 + e2))
            best = min(results.items(), key=lambda kv: kv[1][1]) if results else None
            if best is not None and best[1][1] <= goal(best[1][0]):
                return EvalResult(best[1][0], best[1][1], ROUTE_REGIME[best[0]])
        elif k >= 1.0:
            _trace.emit("stirling_guard", mu=mu, k=k, x=tau, requested="asymptotic")
        w, e, code = _weighted_scalar(mu, k, tau, "auto", rtol, atol)
    else:
        w, e, code = _weighted_scalar(mu, k, tau, route, rtol, atol)
    scale = math.exp(float(_log_kernel_scale(mu, k)))
    sgn = -1.0 if mu % 2 else 1.0
    return EvalResult(sgn * scale * w, scale * e + 4 * _EPS * scale * abs(w), ROUTE_REGIME[code])
