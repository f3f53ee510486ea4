import math

import numpy as np
import pytest

from gaqb.chiral import ChiralProtocol, chiral_spec
from gaqb.geometry import BRAIDED, SEPARATED, CouplingLayout, CouplingParams, closed_form_params
from gaqb.integrator import (
    DivergenceError,
    PositivityError,
    TimeGrid,
    convergence_order,
    evolve,
)
from gaqb.liouville import LiouvillianSpec, StateValidationError, projector
from gaqb.metrics import compute_records


def spec_for(theta, gamma=0.1, topo=BRAIDED):
    return LiouvillianSpec(1.0, closed_form_params(CouplingLayout(topo, theta, gamma)))


EG = projector("eg")


def test_zero_generator_trajectory_constant_bitwise():
    spec = spec_for(math.pi, topo=SEPARATED)
    traj = evolve(spec, EG, TimeGrid(0.0, 50.0, dt=0.005, sample_stride=200))
    assert all(np.array_equal(s, EG) for s in traj.states)


def test_rabi_oracle_braided_df():
    traj = evolve(spec_for(math.pi / 2), EG, TimeGrid(0.0, 20.0, dt=0.02, sample_stride=10))
    pb = traj.states[:, 1, 1].real
    assert np.abs(pb - np.sin(0.1 * traj.times) ** 2).max() <= 1e-6


def test_dark_state_half_population_braided_zero():
    # initial |eg> overlaps the non-decaying antisymmetric state with weight 1/2
    traj = evolve(spec_for(0.0), EG, TimeGrid(0.0, 100.0, dt=0.02, sample_stride=100))
    pb = traj.states[:, 1, 1].real
    oracle = (1.0 - np.exp(-0.4 * traj.times)) ** 2 / 4.0
    assert np.abs(pb - oracle).max() <= 1e-6
    assert pb[-1] == pytest.approx(0.25, abs=1e-3)


def test_snapshot_times_and_first_state():
    grid = TimeGrid(0.0, 1.003, dt=0.01, sample_stride=7)
    traj = evolve(spec_for(0.7), EG, grid)
    assert traj.times[0] == 0.0
    assert traj.times[-1] == 1.003
    assert np.all(np.diff(traj.times) > 0)
    np.testing.assert_array_equal(traj.states[0], EG)


def test_purity_and_excitation_conserved_at_df_point():
    traj = evolve(spec_for(math.pi / 2), EG, TimeGrid(0.0, 100.0, dt=0.02, sample_stride=50))
    for rho in traj.states:
        assert abs(np.trace(rho @ rho).real - 1.0) <= 1e-8
        assert abs(rho[1, 1].real + rho[2, 2].real + rho[3, 3].real * 2 - 1.0) <= 1e-8


def test_trace_drift_small():
    traj = evolve(spec_for(0.7), EG, TimeGrid(0.0, 100.0, dt=0.005, sample_stride=100))
    assert traj.max_trace_drift <= 1e-9
    assert traj.min_eigenvalue >= -1e-8


def test_determinism_bitwise():
    grid = TimeGrid(0.0, 30.0, dt=0.01, sample_stride=30)
    a = evolve(spec_for(1.1), EG, grid)
    b = evolve(spec_for(1.1), EG, grid)
    assert np.array_equal(a.states, b.states)
    assert np.array_equal(a.times, b.times)


def test_convergence_order_smooth():
    order = convergence_order(spec_for(math.pi / 2), EG, 20.0, dt=0.2)
    assert order == pytest.approx(4.0, abs=0.3)


def test_convergence_order_chiral_smooth_piece():
    # away from the profile kink at t = tau the order stays ~4
    p = ChiralProtocol(gamma_max=0.1, tau=100.0)
    spec = chiral_spec(p)
    order = convergence_order(spec, EG, 80.0, dt=2.0)
    assert order >= 3.7


def test_dt_halving_shrinks_error_16x():
    spec = spec_for(math.pi / 2)

    def err(dt):
        traj = evolve(spec, EG, TimeGrid(0.0, 20.0, dt=dt, sample_stride=10**9))
        pb = traj.states[-1][1, 1].real
        return abs(pb - math.sin(0.1 * 20.0) ** 2)

    ratio = err(0.2) / err(0.1)
    assert 12.0 <= ratio <= 20.0


def test_positivity_error_names_time():
    # an unphysical negative rate pumps the state out of the PSD cone
    bad = CouplingParams(0.0, 0.0, 0.0, -0.2, 0.0, 0.0)
    spec = LiouvillianSpec(1.0, bad)
    with pytest.raises(PositivityError, match="t = "):
        evolve(spec, EG, TimeGrid(0.0, 200.0, dt=0.05, sample_stride=100))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_error():
    # only the final snapshot is checked, by which point RK4 at lambda*dt = 16
    # has overflowed to non-finite values
    with pytest.raises(DivergenceError):
        evolve(spec_for(0.0), EG, TimeGrid(0.0, 20000.0, dt=40.0, sample_stride=10**9))


def test_invalid_initial_state_rejected():
    with pytest.raises(StateValidationError):
        evolve(spec_for(0.7), 2.0 * EG, TimeGrid(0.0, 1.0, dt=0.01))


def test_adaptive_matches_fixed():
    spec = spec_for(0.9)
    fixed = evolve(spec, EG, TimeGrid(0.0, 50.0, dt=0.005, sample_stride=10**9))
    adaptive = evolve(
        spec, EG,
        TimeGrid(0.0, 50.0, dt=0.1, sample_stride=10**9, rel_tol=1e-10, abs_tol=1e-12),
    )
    assert adaptive.times[-1] == 50.0
    assert np.abs(adaptive.states[-1] - fixed.states[-1]).max() <= 1e-8
    # the controller should not need anywhere near the fixed-step count
    assert adaptive.step_count < fixed.step_count


def test_aux_integrand_accumulates():
    # integrate d(aux)/dt = p_a(t) alongside the Rabi oscillation
    spec = spec_for(math.pi / 2)
    traj = evolve(
        spec, EG, TimeGrid(0.0, 20.0, dt=0.02, sample_stride=100),
        aux=lambda t, rho: rho[2, 2].real + rho[3, 3].real,
    )
    # integral of cos^2(g t) = t/2 + sin(2 g t)/(4 g)
    g = 0.1
    exact = traj.times / 2 + np.sin(2 * g * traj.times) / (4 * g)
    assert np.abs(traj.aux - exact).max() <= 1e-9


def test_grid_validation():
    with pytest.raises(ValueError):
        TimeGrid(1.0, 1.0)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, dt=-0.1)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, dt=0.1, sample_stride=0)
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, dt=0.1, rel_tol=1e-8)  # missing abs_tol
    with pytest.raises(ValueError):
        TimeGrid(0.0, 1.0, dt=0.1, rel_tol=-1e-8, abs_tol=1e-8)


def test_records_attached_by_metrics():
    traj = evolve(spec_for(math.pi / 2), EG, TimeGrid(0.0, 10.0, dt=0.02, sample_stride=50))
    recs = compute_records(traj, 1.0)
    assert traj.records is recs
    assert len(recs) == len(traj.times)
    assert recs[0].p_a == pytest.approx(1.0)
