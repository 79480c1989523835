import math

import numpy as np
import pytest

from torwave.errors import GridError, ResolutionError, SupportError
from torwave.geometry import FieldGrid, periodic_nodes, prefactor_N, torus_from_radii
from torwave.mehler_fock import RadialProfile
from torwave.profiles import bump, reference_datum
from torwave.wave_kernel import (GridSpec, InitialData, ModeIndex, TruncationPolicy, all_mode_coefficients,
                                 k_quadrature, mode_coefficients, mode_propagate, pde_residual, synthesize)

GEOM = torus_from_radii(1.0, 2.0)
LO, HI = 0.3, 1.25
SMALL = TruncationPolicy(m_max=2, mu_max=2, k_max=60.0, k_nodes_per_unit=32)


def radial(tau):
    return bump(tau, LO, HI) / math.exp(-4.0)


def band_limited(p1, p2, tau):
    return radial(tau) * (1 + 0.5 * np.cos(p1)) * (1 + 0.3 * np.cos(p2) + 0.2 * np.sin(2 * p2))


def _data(func=band_limited, n_angle=16):
    return InitialData(func, LO, HI, n_angle=n_angle, tau_nodes_per_unit=32)


def test_mode_index_and_policy_validation():
    with pytest.raises(ValueError):
        ModeIndex(-1, 0)
    with pytest.raises(ValueError):
        ModeIndex(1, 0.5)
    with pytest.raises(ValueError):
        TruncationPolicy(mu_rule="something")
    with pytest.raises(SupportError):
        InitialData(band_limited, 0.5, 0.4)


# ---------------------------------------------------------------------------
# Fourier coefficients

def test_angle_independent_data_has_only_the_zero_mode():
    coeffs = all_mode_coefficients(_data(lambda p1, p2, t: radial(t) + 0 * p1), 3, 3, GEOM)
    f00 = coeffs.values[3, 3]
    assert np.allclose(f00, 4 * math.pi ** 2 * radial(coeffs.tau_nodes), rtol=1e-13, atol=1e-13)
    rest = np.abs(coeffs.values).copy()
    rest[3, 3] = 0
    assert rest.max() < 1e-12


def test_cosine_in_phi1_pairs_with_m_equal_one():
    coeffs = all_mode_coefficients(_data(lambda p1, p2, t: np.cos(p1) * radial(t)), 3, 3, GEOM)
    mags = np.max(np.abs(coeffs.values), axis=2)
    nonzero = {(i - 3, j - 3) for i, j in zip(*np.nonzero(mags > 1e-10))}
    assert nonzero == {(1, 0), (-1, 0)}
    # the complex coefficient of cos is half the real amplitude: 2 pi^2 g
    assert np.allclose(coeffs.values[4, 3], 2 * math.pi ** 2 * radial(coeffs.tau_nodes), atol=1e-12)


def test_reference_datum_coefficients_obey_fourth_power_decay():
    # fit C on the first ten shells, then require |f| <= C / m^4 (and C / (m mu)^4) further out
    q, eps0, hi = reference_datum(GEOM)
    data = InitialData(q, eps0, hi, n_angle=64, tau_nodes_per_unit=16)
    coeffs = all_mode_coefficients(data, 20, 20, GEOM)
    peaks = np.max(np.abs(coeffs.values), axis=2)
    m = np.arange(1, 21)
    weighted = [peaks[20 + m, 20] * m ** 4, peaks[20, 20 + m] * m ** 4, peaks[20 - m, 20] * m ** 4,
                peaks[20 + m, 20 + m] * m ** 8]
    for series in weighted:
        fitted = series[:10].max()
        assert np.all(series[10:] <= fitted)


def test_mode_coefficients_tags_decay_evidence():
    prof = mode_coefficients(_data(), ModeIndex(1, 2), GEOM)
    assert prof.meta["weighted_peak"] == pytest.approx(5 * np.max(np.abs(prof.values)))


def test_support_violation_is_rejected():
    leaky = InitialData(lambda p1, p2, t: np.exp(-t) + 0 * p1, LO, HI, n_angle=8, tau_nodes_per_unit=8)
    with pytest.raises(SupportError):
        all_mode_coefficients(leaky, 1, 1, GEOM)


def test_coarse_angular_sampling_is_rejected():
    with pytest.raises(GridError):
        all_mode_coefficients(_data(n_angle=8), 4, 4, GEOM)


# ---------------------------------------------------------------------------
# single-mode propagator

@pytest.fixture(scope="module")
def zero_mode():
    coeffs = all_mode_coefficients(_data(lambda p1, p2, t: radial(t) + 0 * p1), 0, 0, GEOM)
    return coeffs.profile(0, 0)


def test_mode_propagate_at_time_zero_is_identity(zero_mode):
    policy = TruncationPolicy(k_max=40.0)
    for tau in (0.5, 0.8, 1.1):
        val = mode_propagate(zero_mode, ModeIndex(0, 0), 0.0, tau, 0.4, GEOM, policy)
        assert val.real == pytest.approx(4 * math.pi ** 2 * radial(tau), abs=1e-3 * 4 * math.pi ** 2)


def test_mode_propagate_of_zero_coefficient(zero_mode):
    zero = zero_mode.with_values(np.zeros_like(zero_mode.values))
    assert mode_propagate(zero, ModeIndex(0, 0), 0.3, 0.7, 0.0, GEOM, SMALL) == 0


def test_mode_propagate_matches_taylor_expansion(zero_mode):
    # u(t) - u(0) = t^2/2 N^2 (g'' + csch^2 g / 4) + O(t^4) for the (0, 0) mode; the
    # opposite sign of the zero-order term would give a coefficient 1.8% larger here
    tau, phi1 = 0.8, 0.5
    policy = TruncationPolicy(k_max=80.0)
    n2 = float(prefactor_N(tau, phi1, GEOM)) ** 2
    step = 1e-4
    g = radial(np.array([tau - step, tau, tau + step]))
    second = (g[2] - 2 * g[1] + g[0]) / step ** 2
    quarter = g[1] / (4 * math.sinh(tau) ** 2)
    expected = n2 * (second + quarter)
    u0 = mode_propagate(zero_mode, ModeIndex(0, 0), 0.0, tau, phi1, GEOM, policy).real
    errors = []
    for t in (0.04, 0.02, 0.01):
        ut = mode_propagate(zero_mode, ModeIndex(0, 0), t, tau, phi1, GEOM, policy).real
        errors.append((ut - u0) / (0.5 * t * t) / (4 * math.pi ** 2) - expected)
    assert abs(errors[-1]) < 1e-4 * abs(expected)
    assert abs(errors[0]) > abs(errors[1]) > abs(errors[2])
    assert abs(errors[-1]) < 1e-2 * n2 * 2 * quarter


def test_k_quadrature_scales_with_time():
    n0 = k_quadrature(SMALL, 0.0, 3.0, 2.0)[0].size
    n1 = k_quadrature(SMALL, 5.0, 3.0, 2.0)[0].size
    assert n1 > 3 * n0
    with pytest.raises(ResolutionError):
        k_quadrature(TruncationPolicy(max_nodes_per_unit=64), 100.0, 10.0, 2.0)


# ---------------------------------------------------------------------------
# synthesis

GRID = GridSpec.uniform(8, 8, 0.4, 1.2, 9)


@pytest.fixture(scope="module")
def base_state():
    return synthesize(_data(), 0.0, GRID, GEOM, SMALL)


def test_synthesize_at_zero_reproduces_data(base_state):
    P1, P2, T = base_state.mesh()
    exact = band_limited(P1, P2, T)
    assert np.max(np.abs(base_state.values - exact)) / np.max(np.abs(exact)) < 1e-3


def test_synthesize_zero_data():
    zero = _data(lambda p1, p2, t: 0 * t)
    assert np.all(synthesize(zero, 0.2, GRID, GEOM, SMALL).values == 0)


def test_synthesize_is_even_in_time():
    a = synthesize(_data(), 0.15, GRID, GEOM, SMALL)
    b = synthesize(_data(), -0.15, GRID, GEOM, SMALL)
    assert np.array_equal(a.values, b.values)
    assert a.meta["t"] == -b.meta["t"]


def test_synthesize_is_linear():
    a = synthesize(_data(), 0.1, GRID, GEOM, SMALL)
    b = synthesize(_data().scaled(-2.5), 0.1, GRID, GEOM, SMALL)
    assert np.allclose(b.values, -2.5 * a.values, rtol=1e-12, atol=1e-14)


def test_initial_velocity_vanishes():
    d = 0.01
    ahead = synthesize(_data(), d, GRID, GEOM, SMALL)
    behind = synthesize(_data(), -d, GRID, GEOM, SMALL)
    assert np.max(np.abs(ahead.values - behind.values)) / (2 * d) < 1e-12


def test_synthesize_reports_tail_and_rejects_boundary_grid(base_state):
    assert base_state.meta["tail_estimate"] >= 0
    with pytest.raises(GridError):
        synthesize(_data(), 0.0, GridSpec.uniform(8, 8, 0.01, 1.0, 5), GEOM, SMALL)
    with pytest.raises(GridError):
        synthesize(_data(), 0.0, GridSpec.uniform(8, 8, 0.4, 1.5, 5), GEOM, SMALL)


def test_synthesize_residual_is_reported():
    # the cosine factor depends on (tau, phi1) through N, so the synthesized field is not an
    # exact solution; the residual is a diagnostic and only its well-definedness is asserted
    grid = GridSpec.uniform(16, 16, 0.5, 1.1, 25)
    states = [synthesize(_data(), t, grid, GEOM, SMALL) for t in (0.08, 0.1, 0.12)]
    res = pde_residual(states, GEOM)
    assert np.isfinite(res) and res >= 0


# ---------------------------------------------------------------------------
# residual checker

def _toy_operator(c, h):
    def op(field, geom):
        u = field.values
        inner = u[:, :, 1:-1]
        second_phi1 = (np.roll(inner, -1, 0) - 2 * inner + np.roll(inner, 1, 0)) / h ** 2
        second_tau = (u[:, :, 2:] - 2 * inner + u[:, :, :-2])
        return FieldGrid(c * c * second_phi1 + 0 * second_tau, field.phi1, field.phi2, field.tau[1:-1])
    return op


def test_pde_residual_manufactured_solution_is_second_order():
    # cos(w t) cos(m phi1) (1 + tau) with the discrete eigenvalue of the angular stencil:
    # the spatial stencil is exact, so the residual is the O(delta^2) time-difference error
    n, m, c = 32, 3, 1.7
    h = 2 * math.pi / n
    omega = c * 2 / h * math.sin(m * h / 2)
    phi1, phi2, tau = periodic_nodes(n, -math.pi), periodic_nodes(4), np.linspace(0.5, 1.0, 6)
    P1, _, T = np.meshgrid(phi1, phi2, tau, indexing="ij")

    def state(t):
        return FieldGrid(math.cos(omega * t) * np.cos(m * P1) * (1 + T), phi1, phi2, tau, abs(t), {"t": t})

    res = []
    for d in (0.02, 0.01):
        res.append(pde_residual([state(0.3 - d), state(0.3), state(0.3 + d)], GEOM, operator=_toy_operator(c, h)))
    assert res[0] / res[1] == pytest.approx(4.0, rel=0.02)
    assert res[1] < omega ** 4 * 0.01 ** 2 / 12 * 1.01


def test_pde_residual_zero_and_errors():
    z = FieldGrid(np.zeros((4, 4, 8)), periodic_nodes(4), periodic_nodes(4), np.linspace(0.5, 1, 8), 0.0, {"t": 0.0})
    z1 = z.with_values(z.values)
    z1.meta = {"t": 0.1}
    z2 = z.with_values(z.values)
    z2.meta = {"t": 0.2}
    assert pde_residual([z, z1, z2], GEOM) == 0.0
    with pytest.raises(GridError):
        pde_residual([z, z1], GEOM)
    z3 = z.with_values(z.values)
    z3.meta = {"t": 0.35}
    with pytest.raises(GridError):
        pde_residual([z, z1, z3], GEOM)
