import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torwave.errors import CFLError, GridError, NonConvergence
from torwave.geometry import torus_from_radii
from torwave.oracle import FDTDConfig, eigen_residual, fdtd_solve, quad_oracle
from torwave.profiles import bump
from torwave.wave_kernel import InitialData

GEOM = torus_from_radii(1.0, 2.0)

# ---------------------------------------------------------------------------
# adaptive quadrature against closed forms

CLOSED_FORMS = [
    (lambda x: x ** 100, (0, 1), 1 / 101),
    (lambda x: np.exp(x), (0, 1), math.e - 1),
    (lambda x: np.sin(x), (0, math.pi), 2.0),
    (lambda x: np.cos(x) ** 2, (0, 2 * math.pi), math.pi),
    (lambda x: 1 / (1 + x * x), (-np.inf, np.inf), math.pi),
    (lambda x: np.exp(-x * x), (-np.inf, np.inf), math.sqrt(math.pi)),
    (lambda x: np.exp(-x), (0, np.inf), 1.0),
    (lambda x: x * np.exp(-x), (0, np.inf), 1.0),
    (lambda x: 1 / np.sqrt(x), (1e-300, 1), 2.0),
    (lambda x: np.log(x), (1e-300, 1), -1.0),
    (lambda x: np.sqrt(x), (0, 1), 2 / 3),
    (lambda x: 1 / (1 + x), (0, 1), math.log(2)),
    (lambda x: np.abs(x - 0.3), (0, 1), 0.5 * (0.09 + 0.49)),
    (lambda x: np.exp(1j * x), (0, math.pi), 2j),
    (lambda x: np.exp(-x) * np.cos(x), (0, np.inf), 0.5),
    (lambda x: 4 * np.exp(-2 * np.abs(x)) / (1 + np.exp(-2 * np.abs(x))) ** 2, (-np.inf, np.inf), 2.0),  # sech^2
    (lambda x: x ** 3 - 2 * x, (-1, 2), 15 / 4 - 3),
    (lambda x: np.exp(-x * x / 2) * x * x, (-np.inf, np.inf), math.sqrt(2 * math.pi)),
    (lambda x: np.sin(10 * x) ** 2, (0, math.pi), math.pi / 2),
    (lambda x: 1 / x ** 2, (1, np.inf), 1.0),
]


@pytest.mark.parametrize("index", range(len(CLOSED_FORMS)))
def test_quad_oracle_closed_forms(index):
    func, domain, exact = CLOSED_FORMS[index]
    res = quad_oracle(func, domain, tol=1e-10)
    assert abs(res.value - exact) <= max(res.abs_err, 1e-14 * abs(exact))
    assert abs(res.value - exact) < 1e-9


def test_quad_oracle_scalar_integrand_and_nonconvergence():
    res = quad_oracle(lambda x: math.exp(-x), (0, 2), vectorized=False)
    assert res.value == pytest.approx(1 - math.exp(-2), abs=1e-12)
    with pytest.raises(NonConvergence):
        quad_oracle(lambda x: 1 / x, (0, 1), max_subdivisions=50)


# ---------------------------------------------------------------------------
# eigenfunction residual

def test_eigen_residual_is_scale_invariant():
    tau = np.linspace(0.5, 3.0, 1001)
    a = eigen_residual(1, 2.0, tau)
    b = eigen_residual(1, 2.0, tau, scale=-7.5)
    # the residual is a difference of O(1) terms, so rounding differs at the 1e-6 relative level
    assert a == pytest.approx(b, rel=1e-5)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 3), st.floats(0.5, 5.0))
def test_eigen_residual_is_second_order(mu, k):
    coarse = eigen_residual(mu, k, np.linspace(0.5, 3.0, 251))
    fine = eigen_residual(mu, k, np.linspace(0.5, 3.0, 501))
    assert coarse / fine == pytest.approx(4.0, rel=0.1)


def test_eigen_residual_grid_checks():
    with pytest.raises(GridError):
        eigen_residual(0, 1.0, np.linspace(0.5, 1, 4))
    with pytest.raises(GridError):
        eigen_residual(0, 1.0, np.array([0.5, 0.6, 0.8, 0.9, 1.0]))
    with pytest.raises(GridError):
        eigen_residual(0, 1.0, np.linspace(0.0, 1, 10))


# ---------------------------------------------------------------------------
# leapfrog solver

def smooth_data():
    def q(p1, p2, tau):
        return bump(tau, 0.45, 1.1) / math.exp(-4.0) * (1 + 0.3 * np.cos(p1)) * (1 + 0.2 * np.sin(p2))
    return InitialData(q, 0.45, 1.1, n_angle=16, tau_nodes_per_unit=16)


def _config(scale):
    return FDTDConfig(n_phi1=8 * scale, n_phi2=8 * scale, n_tau=16 * scale + 1, tau_min=0.3, cfl=0.5)


def test_fdtd_zero_data_stays_zero():
    zero = smooth_data().scaled(0.0)
    snaps = fdtd_solve(zero, 0.1, _config(1), GEOM)
    assert np.all(snaps[-1].values == 0)


def test_fdtd_time_zero_returns_data():
    snaps = fdtd_solve(smooth_data(), 0.0, _config(1), GEOM)
    assert len(snaps) == 1 and snaps[0].time_stamp == 0.0


def test_fdtd_conserves_discrete_energy():
    last = fdtd_solve(smooth_data(), 0.3, _config(2), GEOM)[-1]
    assert last.meta["energy_drift"] < 1e-10
    assert last.meta["energy_first"] > 0


def test_fdtd_self_convergence_is_second_order():
    # nested grids: errors between consecutive refinements at the coarsest nodes
    T = 0.2
    sols = [fdtd_solve(smooth_data(), T, _config(s), GEOM)[-1].values for s in (1, 2, 4)]
    on_coarse = [sols[0], sols[1][::2, ::2, ::2], sols[2][::4, ::4, ::4]]
    e1 = np.max(np.abs(on_coarse[0] - on_coarse[1]))
    e2 = np.max(np.abs(on_coarse[1] - on_coarse[2]))
    assert e1 / e2 == pytest.approx(4.0, rel=0.35)


def test_fdtd_save_times():
    snaps = fdtd_solve(smooth_data(), 0.2, _config(1), GEOM, save_times=[0.0, 0.1])
    times = [s.meta["t"] for s in snaps]
    assert times[0] == 0.0 and times[-1] == pytest.approx(0.2)
    assert len(times) == 3


def test_fdtd_rejects_unstable_step_and_bad_grid():
    cfg = _config(1)
    limit = cfg.stable_dt(GEOM)
    with pytest.raises(CFLError):
        fdtd_solve(smooth_data(), 0.1, FDTDConfig(**dict(cfg.to_dict(), dt=limit)), GEOM)
    with pytest.raises(GridError):
        FDTDConfig(n_phi1=2).axes(GEOM)
    with pytest.raises(GridError):
        FDTDConfig(tau_min=2.0).axes(GEOM)
