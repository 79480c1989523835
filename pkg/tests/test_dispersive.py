import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torwave.dispersive import (Phase, ScanPolicy, ScanRegion, _mu_count, build_cutoffs, filtered_kernel,
                                fit_decay, kernel_from_modes, mode_integrals, stationary_phase,
                                stationary_points, supnorm_scan, w11_norm)
from torwave.errors import DegenerateError, NoStationaryPoint, ParamError
from torwave.geometry import torus_from_radii
from torwave.mehler_fock import composite_gauss_legendre

GEOM = torus_from_radii(1.0, 2.0)
QUADRATIC = Phase(lambda x: 0.5 * x * x, lambda x: x, lambda x: 1.0 + 0 * x)


# ---------------------------------------------------------------------------
# cutoffs

def test_phi_examples():
    c = build_cutoffs(6.0, 0.05)
    assert c.phi(np.array([6.0]))[0] == 1.0
    assert c.phi(np.array([12.0]))[0] == 0.0
    s = np.linspace(0, 20, 2001)
    vals = c.phi(s)
    assert np.all((vals >= 0) & (vals <= 1))
    assert np.all(vals[(s <= 3.0) | (s >= 9.0)] == 0)
    assert np.all(vals[(s >= 0.8 * 6) & (s <= 1.2 * 6)] == 1)


def test_psi_m_band_for_b6_m3():
    c = build_cutoffs(6.0, 0.05)
    lo, hi = c.psi_m_band(3.0)
    assert (lo, hi) == (0.0, 72.0)
    k = np.array([0.0, 4.0, math.sqrt(72.0)])
    assert np.all(c.psi_m(k, 3.0) == 1)
    assert c.psi_m(np.array([math.sqrt(72 + 7.2) + 1e-9]), 3.0)[0] == 0
    assert c.psi_m(np.array([1.0]), 10.0)[0] == 0


def test_psi_mu_truncation():
    c = build_cutoffs(6.0, 0.1)
    assert list(c.psi_mu(np.arange(5), 10.0, 1.0)) == [1, 1, 1, 1, 0]


@pytest.mark.parametrize("b,h", [(4.9, 0.1), (6.0, 0.0), (6.0, 1.0), (float("nan"), 0.1)])
def test_build_cutoffs_rejects(b, h):
    with pytest.raises(ParamError):
        build_cutoffs(b, h)


def test_retained_mu_count_bound():
    for sig in np.linspace(1.0, 500.0, 200):
        # mu = 0 plus the positive orders with mu^2 < sigma
        assert _mu_count(sig) - 1 <= math.sqrt(sig)
        assert (_mu_count(sig) - 1) ** 2 < sig


# ---------------------------------------------------------------------------
# stationary points

def test_stationary_point_example():
    pts = stationary_points(1.0, 2.0, 1.0, 0.6, 0.4)
    plus = [p for p in pts if p.branch == (1, 1)]
    assert len(plus) == 1
    assert plus[0].k0 == pytest.approx(1 / math.sqrt(3), rel=1e-14)


def test_diagonal_difference_branch_is_rejected():
    pts = stationary_points(1.0, 3.0, 1.0, 0.7, 0.7)
    assert all(p.branch[1] == 1 for p in pts)


@settings(max_examples=60, deadline=None)
@given(st.floats(0.5, 20), st.floats(0.5, 10), st.floats(0.3, 2.0), st.floats(0.3, 2.0))
def test_stationary_points_are_critical(m, tn, tau, tau_p):
    try:
        pts = stationary_points(m, tn, 1.0, tau, tau_p)
    except NoStationaryPoint:
        return
    for p in pts:
        s, q = p.branch
        d = tau + q * tau_p
        deriv = tn * p.k0 / math.hypot(p.k0, m) - s * d
        assert abs(deriv) < 1e-10 * max(1.0, tn)
        assert p.f_second == pytest.approx(tn * m * m / math.hypot(p.k0, m) ** 3, rel=1e-12)
        # 1 / f'' <= (k0^2 + m^2)^{3/2} / (m^2 tN) stays O(m / tN) on the stationary set
        assert 1 / p.f_second <= (1 + (p.k0 / m) ** 2) ** 1.5 * m / tn * (1 + 1e-12)


def test_stationary_points_errors():
    with pytest.raises(NoStationaryPoint):
        stationary_points(1.0, 0.5, 1.0, 1.0, 1.0)
    with pytest.raises(ParamError):
        stationary_points(0.0, 1.0, 1.0, 1.0, 1.0)


# ---------------------------------------------------------------------------
# stationary phase

def _direct(rho, f, h, a=-6.0, b=6.0):
    x, w = composite_gauss_legendre(b, 256, lower=a)
    return complex(np.sum(w * rho(x) * np.exp(1j * f.value(x) / h)))


def test_stationary_phase_zero_amplitude():
    x = np.linspace(-3, 3, 101)
    approx, bound = stationary_phase((x, np.zeros_like(x)), QUADRATIC, 0.1, 0.0)
    assert approx == 0 and bound == 0


@pytest.mark.parametrize("h", [0.1, 0.05, 0.01])
def test_stationary_phase_gaussian(h):
    def rho(x):
        return np.exp(-x * x)

    x = np.linspace(-6, 6, 4001)
    approx, bound = stationary_phase((x, rho(x)), QUADRATIC, h, 0.0)
    exact = _direct(rho, QUADRATIC, h)
    # closed form: int e^{-x^2 + i x^2 / (2h)} dx = sqrt(pi / (1 - i/(2h)))
    assert exact == pytest.approx(np.sqrt(math.pi / (1 - 1j / (2 * h))), abs=1e-10)
    assert abs(exact - approx) <= bound
    # w11 of the Gaussian: sqrt(pi) + 2
    assert bound == pytest.approx((math.sqrt(math.pi) + 2) * math.sqrt(h), rel=1e-4)


def test_stationary_phase_scales_with_root_h():
    x = np.linspace(-3, 3, 601)
    vals = [abs(stationary_phase((x, np.exp(-x * x)), QUADRATIC, h, 0.0)[0]) for h in (0.2, 0.02)]
    assert vals[0] / vals[1] == pytest.approx(math.sqrt(10), rel=1e-12)


def test_stationary_phase_errors():
    flat = Phase(lambda x: 0 * x, lambda x: 0 * x, lambda x: 0 * x)
    x = np.linspace(-1, 1, 11)
    with pytest.raises(DegenerateError):
        stationary_phase((x, np.ones_like(x)), flat, 0.1, 0.0)
    with pytest.raises(ParamError):
        stationary_phase((x, np.ones_like(x)), QUADRATIC, 0.1, 0.5)
    with pytest.raises(ParamError):
        stationary_phase((x, np.ones_like(x)), QUADRATIC, 0.6, 0.0)
    with pytest.raises(ParamError):
        stationary_phase(lambda y: 1.0, QUADRATIC, 0.1, 0.0)


def test_w11_norm_of_tent():
    x = np.linspace(-1, 1, 2001)
    assert w11_norm(x, 1 - np.abs(x)) == pytest.approx(1.0 + 2.0, rel=1e-6)


# ---------------------------------------------------------------------------
# filtered kernel

PROBE = ((2.0, 0.0, 1.2), (1.7, 0.4, 1.2))


@pytest.fixture(scope="module")
def cutoffs():
    return build_cutoffs(6.0, 0.05)


def test_filtered_kernel_even_in_time(cutoffs):
    a = filtered_kernel(2.0, PROBE, cutoffs, GEOM)
    b = filtered_kernel(-2.0, PROBE, cutoffs, GEOM)
    assert a == b


def test_filtered_kernel_at_time_zero_is_finite(cutoffs):
    same = (PROBE[0], PROBE[0])
    val = filtered_kernel(0.0, same, cutoffs, GEOM)
    assert np.isfinite(val) and val > 0


def test_filtered_kernel_routes_agree_within_bound(cutoffs):
    direct = filtered_kernel(2.0, PROBE, cutoffs, GEOM)
    approx, bound = filtered_kernel(2.0, PROBE, cutoffs, GEOM, method="stationary", return_bound=True)
    assert abs(direct - approx) <= bound


def test_filtered_kernel_errors(cutoffs):
    with pytest.raises(ParamError):
        filtered_kernel(1.0, ((0.5, 0.0, 0.1), PROBE[1]), cutoffs, GEOM)
    with pytest.raises(ParamError):
        filtered_kernel(1.0, PROBE, cutoffs, GEOM, method="other")


def test_kernel_sup_bounds_pairing_with_data():
    rng = np.random.default_rng(4)
    modes = rng.normal(size=(12, 5))
    d1 = np.linspace(-math.pi, math.pi, 64, endpoint=False)
    d2 = np.linspace(0, 2 * math.pi, 32, endpoint=False)
    grid = kernel_from_modes(modes, d1, d2)
    cell = (d1[1] - d1[0]) * (d2[1] - d2[0])
    sup = np.max(np.abs(grid))
    for _ in range(10):
        q = rng.normal(size=grid.shape)
        assert abs(np.sum(grid * q) * cell) <= sup * np.sum(np.abs(q)) * cell


def test_mode_integrals_batch_matches_single(cutoffs):
    k, w = composite_gauss_legendre(40.0, 24)
    kt = np.cos(np.outer(np.arange(3), k) * 0.1 + k[None, :] * 1.2)
    ktp = np.cos(np.outer(np.arange(3), k) * 0.2 + k[None, :] * 0.9)
    many = mode_integrals(0.0, 1.2, 0.9, 3.0, cutoffs, k, w, kt, ktp, t_list=[0.5, 1.0])
    one = mode_integrals(1.0, 1.2, 0.9, 3.0, cutoffs, k, w, kt, ktp)
    assert np.array_equal(many[1], one)


# ---------------------------------------------------------------------------
# decay fit and scan

def test_fit_decay_on_exact_law():
    h = 0.05
    ts = [0.25 * h, 0.5 * h, h] + list(np.geomspace(10 * h, 100 * h, 10))
    table = [{"t": t, "sup_estimate": 7.0 * h ** -3 * min(1.0, h / t)} for t in ts]
    fit = fit_decay(table, h, (10 * h, 100 * h))
    assert fit["slope"] == pytest.approx(-1.0, abs=1e-12)
    assert fit["passed"] and fit["envelope_pass"]
    assert fit["C_eps0_eta"] == pytest.approx(7.0)
    assert fit["C_eps"] == pytest.approx(0.0, abs=1e-9)


def test_fit_decay_flags_wrong_slope():
    h = 0.05
    ts = np.geomspace(10 * h, 100 * h, 8)
    table = [{"t": t, "sup_estimate": t ** -0.5} for t in ts]
    fit = fit_decay(table, h, (10 * h, 100 * h))
    assert fit["slope"] == pytest.approx(-0.5)
    assert not fit["slope_pass"] and not fit["passed"]


def test_fit_decay_needs_three_points():
    fit = fit_decay([{"t": 1.0, "sup_estimate": 1.0}], 0.05, (0.5, 5.0))
    assert fit["passed"] is False and fit["slope"] is None


TINY = ScanPolicy(n_tau_levels=6, n_samples=4, n_diagonal=2, n_dphi2=16, refine_iterations=1)


@pytest.fixture(scope="module")
def tiny_scan():
    cut = build_cutoffs(6.0, 0.1)
    return supnorm_scan([0.05, 1.0, 2.0, 4.0], 0.1, ScanRegion(0.3), cut, GEOM, TINY, seed=3,
                        fit_window=(1.0, 4.0))


def test_scan_table_shape(tiny_scan):
    assert [r["t"] for r in tiny_scan.table] == [0.05, 1.0, 2.0, 4.0]
    for row in tiny_scan.table:
        assert row["sup_estimate"] > 0
        assert row["n_triples"] == 6
        assert {"n_samples", "refined", "sup_mixed"} <= set(row)
    assert tiny_scan.meta["eta"] == pytest.approx((1 - math.cos(1.2)) / GEOM.a)
    assert {"slope", "slope_ci", "C_eps0_eta", "C_eps", "passed"} <= set(tiny_scan.fit)


def test_scan_is_deterministic(tiny_scan):
    cut = build_cutoffs(6.0, 0.1)
    again = supnorm_scan([0.05, 1.0, 2.0, 4.0], 0.1, ScanRegion(0.3), cut, GEOM, TINY, seed=3,
                         fit_window=(1.0, 4.0))
    assert again.table == tiny_scan.table
    assert again.fit == tiny_scan.fit


def test_scan_region_validation():
    with pytest.raises(ParamError):
        ScanRegion(eps0=1.3).bounds(GEOM, ScanPolicy())
