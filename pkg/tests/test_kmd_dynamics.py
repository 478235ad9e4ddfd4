import numpy as np
import pytest

from helical_filaments.errors import CollisionError
from helical_filaments.filaments import helical_equilibria as he
from helical_filaments.filaments import kmd_dynamics
from helical_filaments.filaments.kmd_dynamics import FilamentEnsemble


def single_mode_ensemble(num_filaments=1, radius=1.0, period=2*np.pi, num_modes=16):
    s = np.arange(num_modes)*period/num_modes
    phases = np.exp(2j*np.pi*np.arange(num_filaments)/num_filaments)
    positions = radius*phases[:, None]*np.exp(2j*np.pi*s/period)[None, :]
    return FilamentEnsemble(np.ones(num_filaments), positions, period)


def perturbed_three_filaments(num_modes=64):
    '''
    A non-equilibrium configuration: unequal circulations and a second-harmonic perturbation
    '''
    period = 2*np.pi
    s = np.arange(num_modes)*period/num_modes
    centers = np.exp(2j*np.pi*np.arange(3)/3)
    positions = (
        centers[:, None]*np.exp(1j*s)[None, :]
        + 0.1*np.array([1, 1j, -0.5])[:, None]*np.exp(2j*s)[None, :]
    )
    return FilamentEnsemble([1.0, 1.5, 0.7], positions, period)


def test_single_filament_rotates():
    kappa, radius, period = 1.3, 0.7, 3.0
    ensemble = single_mode_ensemble(radius=radius, period=period)
    ensemble = FilamentEnsemble([kappa], ensemble.positions, period)
    rhs = kmd_dynamics.kmd_rhs(ensemble)
    expected = -1j*kappa*(2*np.pi/period)**2/(4*np.pi)*ensemble.positions
    assert np.allclose(rhs, expected, atol=1e-13)


def test_antipodal_pair_interaction():
    positions = np.full((2, 8), 0.5 + 0.2j)
    positions[1] = -positions[0]
    ensemble = FilamentEnsemble([1.0, 2.0], positions, 2*np.pi, structure_constants=[0, 0])
    rhs = kmd_dynamics.kmd_rhs(ensemble)
    X1 = positions[0]
    # 2i kappa_2 (2 X_1)/|2 X_1|^2 = i kappa_2 X_1/|X_1|^2
    expected = 1j*2.0*X1/np.abs(X1)**2/(4*np.pi)
    assert np.allclose(rhs[0], expected, atol=1e-14)


def test_helical_data_rotates_rigidly():
    family = he.make_family('polygon', n=3, kappa=1, radius=1)
    ensemble = he.sample_filaments(family, 64)
    alpha = he.angular_velocity(family)
    assert alpha == pytest.approx((1 - 2)/(4*np.pi))
    rhs = kmd_dynamics.kmd_rhs(ensemble)
    assert np.max(np.abs(rhs + 1j*alpha*ensemble.positions)) <= 1e-12


def test_collision_raises():
    positions = np.ones((2, 8), dtype=complex)
    ensemble = FilamentEnsemble([1, 1], positions, 1.0)
    with pytest.raises(CollisionError):
        kmd_dynamics.kmd_rhs(ensemble)


def test_rotation_equivariance():
    ensemble = perturbed_three_filaments(num_modes=32)
    phase = np.exp(0.37j)
    rotated = ensemble.with_positions(phase*ensemble.positions)
    assert np.max(np.abs(kmd_dynamics.kmd_rhs(rotated) - phase*kmd_dynamics.kmd_rhs(ensemble))) <= 1e-13


def test_translation_invariance():
    ensemble = FilamentEnsemble([1.0, 1.0, 1.0], perturbed_three_filaments(32).positions, 2*np.pi)
    shifted = ensemble.with_positions(ensemble.positions + (0.3 - 0.8j))
    rhs = kmd_dynamics.kmd_rhs(ensemble)
    rhs_shifted = kmd_dynamics.kmd_rhs(shifted)
    assert np.max(np.abs((rhs_shifted[0] - rhs_shifted[1]) - (rhs[0] - rhs[1]))) <= 1e-12


def test_rigid_rotation_accuracy():
    family = he.make_family('polygon', n=3, kappa=1, radius=1)
    ensemble = he.sample_filaments(family, 64)
    alpha = he.angular_velocity(family)
    trajectory = kmd_dynamics.kmd_integrate(ensemble, dt=1e-4, final_time=0.1, save_stride=250)
    assert trajectory.times[-1] == pytest.approx(0.1)
    assert trajectory.collision is None

    s = ensemble.arclength
    exact = np.array([
        np.exp(-1j*alpha*0.1)*np.exp(1j*s)*np.exp(2j*np.pi*j/3) for j in range(3)
    ])
    assert np.max(np.abs(trajectory.states[-1].positions - exact)) <= 1e-6
    assert np.max(kmd_dynamics.rotation_deviation(trajectory, alpha)) <= 1e-6


def test_fourth_order_convergence():
    # a tight polygon rotates fast enough for the RK4 error to sit well above rounding
    family = he.make_family('polygon', n=3, kappa=1, radius=0.3)
    ensemble = he.sample_filaments(family, 64)
    alpha = he.angular_velocity(family)

    errors = []
    for dt in [0.02, 0.01]:
        trajectory = kmd_dynamics.kmd_integrate(ensemble, dt=dt, final_time=1.0, save_stride=1000)
        errors.append(kmd_dynamics.rotation_deviation(trajectory, alpha)[-1])
    assert 12 <= errors[0]/errors[1] <= 20


def test_zero_circulations_are_static():
    ensemble = perturbed_three_filaments(16)
    ensemble = FilamentEnsemble([0, 0, 0], ensemble.positions, ensemble.period)
    trajectory = kmd_dynamics.kmd_integrate(ensemble, dt=0.01, final_time=0.1)
    assert np.all(trajectory.states[-1].positions == ensemble.positions)


def test_diagnostics_of_antipodal_pair():
    family = he.make_family('polygon', n=2, kappa=1, radius=1)
    diagnostics = kmd_dynamics.kmd_diagnostics(he.sample_filaments(family, 32))
    assert abs(diagnostics.mean_vorticity_center) <= 1e-14
    assert diagnostics.second_moment == pytest.approx(4*np.pi, rel=1e-14)
    assert diagnostics.min_separation == pytest.approx(2.0)


def test_conservation_along_trajectory():
    ensemble = perturbed_three_filaments()
    trajectory = kmd_dynamics.kmd_integrate(ensemble, dt=1e-3, final_time=1.0, save_stride=100)
    table = kmd_dynamics.diagnostics_to_dataframe(trajectory)
    drifts = kmd_dynamics.conservation_drift(
        table, mean_scale=kmd_dynamics.mean_center_scale(ensemble)
    )
    assert drifts['mean_vorticity_center'] <= 1e-8
    assert drifts['second_moment'] <= 1e-8
    assert drifts['hamiltonian'] <= 1e-8


def test_trajectory_table_columns():
    ensemble = single_mode_ensemble(num_filaments=2, num_modes=8)
    trajectory = kmd_dynamics.kmd_integrate(ensemble, dt=0.05, final_time=0.1)
    table = kmd_dynamics.trajectory_to_dataframe(trajectory)
    assert list(table.columns) == ['tau', 'j', 's_index', 're', 'im']
    assert len(table) == len(trajectory.times)*2*8
