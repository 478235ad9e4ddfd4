'''
The nearly-parallel vortex filament system

    d/dtau X_j = (1/4pi) (i alpha_j kappa_j d_ss X_j + 2i sum_{k != j} kappa_k (X_j - X_k)/|X_j - X_k|^2)

for N filaments X_j(s), periodic in s with period L, each sampled at M points.
Derivatives in s are spectral; time stepping is classical RK4 with a fixed step.

'''

from collections import namedtuple

import numpy as np
import pandas as pd
from scipy import fft

from helical_filaments import utils
from helical_filaments.errors import CollisionError, NumericalBlowupError

DEFAULT_COLLISION_FLOOR = 1e-8


class FilamentEnsemble:

    def __init__(self, circulations, positions, period, structure_constants=None):
        '''
        circulations : length-N list of signed circulations kappa_j
        positions : (N, M) complex array of samples X_j(s_k), s_k = k*L/M
        period : the period L in s
        structure_constants : length-N list of alpha_j (default 1)
        '''
        positions = np.array(positions, dtype=complex, ndmin=2)
        num_filaments, num_modes = positions.shape

        circulations = np.array(circulations, dtype=float).reshape(-1)
        if structure_constants is None:
            structure_constants = np.ones(num_filaments)
        structure_constants = np.array(structure_constants, dtype=float).reshape(-1)

        if len(circulations) != num_filaments or len(structure_constants) != num_filaments:
            raise ValueError(
                'Got %d filaments but %d circulations and %d structure constants'
                % (num_filaments, len(circulations), len(structure_constants))
            )
        if num_modes < 8 or num_modes & (num_modes - 1):
            raise ValueError('The number of samples per filament must be a power of two >= 8')
        if period <= 0:
            raise ValueError('The period must be positive')

        for array in (positions, circulations, structure_constants):
            array.flags.writeable = False

        self.positions = positions
        self.circulations = circulations
        self.structure_constants = structure_constants
        self.period = float(period)


    @property
    def num_filaments(self):
        return self.positions.shape[0]

    @property
    def num_modes(self):
        return self.positions.shape[1]

    @property
    def arclength(self):
        return np.arange(self.num_modes)*self.period/self.num_modes

    @property
    def wavenumbers(self):
        return 2*np.pi*fft.fftfreq(self.num_modes, d=self.period/self.num_modes)


    def with_positions(self, positions):
        return FilamentEnsemble(
            self.circulations, positions, self.period, structure_constants=self.structure_constants
        )


Trajectory = namedtuple('Trajectory', ['times', 'states', 'collision'])

Diagnostics = namedtuple('Diagnostics', [
    'mean_vorticity_center', 'second_moment', 'hamiltonian', 'min_separation'
])


def _spectral_derivative(positions, wavenumbers, order):
    coefs = fft.fft(positions, axis=-1)
    multiplier = (1j*wavenumbers)**order
    if order % 2 == 1:
        # the Nyquist mode has no well-defined odd derivative
        multiplier = multiplier.copy()
        multiplier[len(wavenumbers)//2] = 0
    return fft.ifft(coefs*multiplier, axis=-1)


def _pair_differences(positions):
    '''
    differences X_j - X_k of shape (N, N, M) and the minimum separation over j != k
    '''
    differences = positions[:, None, :] - positions[None, :, :]
    distances_sq = np.abs(differences)**2
    num_filaments = positions.shape[0]
    off_diagonal = ~np.eye(num_filaments, dtype=bool)
    if num_filaments > 1:
        min_separation = float(np.sqrt(distances_sq[off_diagonal].min()))
    else:
        min_separation = np.inf
    distances_sq[~off_diagonal] = np.inf
    return differences, distances_sq, min_separation


def kmd_rhs(ensemble, collision_floor=DEFAULT_COLLISION_FLOOR):
    '''
    The time derivative of every filament, as an (N, M) complex array
    '''
    positions = ensemble.positions
    differences, distances_sq, min_separation = _pair_differences(positions)
    if min_separation < collision_floor:
        raise CollisionError(
            'Filaments collided (min separation %s)' % min_separation, min_separation=min_separation
        )

    self_induction = _spectral_derivative(positions, ensemble.wavenumbers, order=2)
    self_induction *= (ensemble.structure_constants*ensemble.circulations)[:, None]

    kappa = ensemble.circulations[None, :, None]
    interaction = np.sum(kappa*differences/distances_sq, axis=1)

    return (1j*self_induction + 2j*interaction)/(4*np.pi)


def kmd_integrate(
    ensemble,
    dt,
    final_time,
    save_stride=1,
    collision_floor=DEFAULT_COLLISION_FLOOR,
    event_logger=None
):
    '''
    Classical RK4 integration with a fixed step

    The step is adjusted down so that an integer number of steps reaches final_time exactly.
    A collision ends the run and returns the partial trajectory with a collision report.

    '''
    if dt <= 0 or final_time < dt:
        raise ValueError('Expected 0 < dt <= final_time (got dt=%s, T=%s)' % (dt, final_time))

    event_logger = event_logger or utils.null_logger
    num_steps = int(np.ceil(final_time/dt - 1e-9))
    step = final_time/num_steps

    def rhs(positions):
        return kmd_rhs(ensemble.with_positions(positions), collision_floor=collision_floor)

    times = [0.0]
    states = [ensemble]
    collision = None
    positions = ensemble.positions.copy()

    event_logger('KMD INFO: Integrating %d filaments for %d steps of size %s'
                 % (ensemble.num_filaments, num_steps, step))

    for ind in range(1, num_steps + 1):
        tau = (ind - 1)*step
        try:
            k1 = rhs(positions)
            k2 = rhs(positions + 0.5*step*k1)
            k3 = rhs(positions + 0.5*step*k2)
            k4 = rhs(positions + step*k3)
        except CollisionError as error:
            collision = {'tau': tau, 'min_separation': error.payload['min_separation']}
            event_logger('KMD WARNING: Collision at tau = %s (min separation %s)'
                         % (tau, collision['min_separation']))
            if times[-1] != tau:
                times.append(tau)
                states.append(ensemble.with_positions(positions))
            break

        positions = positions + (step/6)*(k1 + 2*k2 + 2*k3 + k4)
        if not np.all(np.isfinite(positions)):
            raise NumericalBlowupError('Non-finite filament positions at tau = %s' % (ind*step),
                                       tau=ind*step)

        if ind % save_stride == 0 or ind == num_steps:
            times.append(ind*step)
            states.append(ensemble.with_positions(positions))

    return Trajectory(times=np.array(times), states=states, collision=collision)


def kmd_diagnostics(ensemble):
    '''
    The conserved quantities of the flow and the minimum separation

    The integrals over s use the trapezoid rule on the periodic grid (a plain sum times ds)
    '''
    positions = ensemble.positions
    kappa = ensemble.circulations
    ds = ensemble.period/ensemble.num_modes

    differences, distances_sq, min_separation = _pair_differences(positions)
    if min_separation <= 0:
        raise CollisionError('Coincident filaments', min_separation=min_separation)

    mean = np.sum(kappa[:, None]*positions)*ds
    second_moment = np.sum(kappa[:, None]*np.abs(positions)**2)*ds

    ds_positions = _spectral_derivative(positions, ensemble.wavenumbers, order=1)
    kinetic = np.sum(
        (ensemble.structure_constants*kappa**2/(8*np.pi))[:, None]*np.abs(ds_positions)**2
    )*ds

    # diagonal entries are inf; replacing them by 1 zeroes their log
    log_distances = 0.5*np.log(np.where(np.isfinite(distances_sq), distances_sq, 1.0))
    interaction = np.sum(kappa[:, None, None]*kappa[None, :, None]*log_distances)*ds/(4*np.pi)

    return Diagnostics(
        mean_vorticity_center=complex(mean),
        second_moment=float(second_moment),
        hamiltonian=float(kinetic - interaction),
        min_separation=min_separation,
    )


def rotation_deviation(trajectory, alpha):
    '''
    Sup-norm distance of each saved state from the initial state rotated by exp(-i alpha tau)
    '''
    initial = trajectory.states[0].positions
    return np.array([
        np.max(np.abs(state.positions - initial*np.exp(-1j*alpha*tau)))
        for tau, state in zip(trajectory.times, trajectory.states)
    ])


def trajectory_to_dataframe(trajectory):
    '''
    Long-form table with columns (tau, j, s_index, re, im)
    '''
    rows = []
    for tau, state in zip(trajectory.times, trajectory.states):
        num_filaments, num_modes = state.positions.shape
        j, s_index = np.meshgrid(np.arange(num_filaments), np.arange(num_modes), indexing='ij')
        rows.append(pd.DataFrame({
            'tau': tau,
            'j': j.ravel(),
            's_index': s_index.ravel(),
            're': state.positions.real.ravel(),
            'im': state.positions.imag.ravel(),
        }))
    return pd.concat(rows, ignore_index=True)


def diagnostics_to_dataframe(trajectory):
    rows = []
    for tau, state in zip(trajectory.times, trajectory.states):
        diagnostics = kmd_diagnostics(state)
        rows.append({
            'tau': tau,
            'mean_re': diagnostics.mean_vorticity_center.real,
            'mean_im': diagnostics.mean_vorticity_center.imag,
            'second_moment': diagnostics.second_moment,
            'hamiltonian': diagnostics.hamiltonian,
            'min_sep': diagnostics.min_separation,
        })
    return pd.DataFrame(rows)


def mean_center_scale(ensemble):
    '''
    sum_j |kappa_j| int |X_j| ds, the natural scale of the mean vorticity center
    (which is often exactly zero for symmetric data)
    '''
    ds = ensemble.period/ensemble.num_modes
    return float(np.sum(np.abs(ensemble.circulations)[:, None]*np.abs(ensemble.positions))*ds)


def conservation_drift(diagnostics_table, mean_scale=None):
    '''
    Max relative drift of each conserved quantity from its initial value

    mean_scale : the scale of the mean vorticity center (defaults to its initial modulus)
    '''
    drifts = {}
    initial = diagnostics_table.iloc[0]
    mean = diagnostics_table.mean_re + 1j*diagnostics_table.mean_im
    scale = mean_scale or max(abs(mean.iloc[0]), 1e-300)
    drifts['mean_vorticity_center'] = float(np.max(np.abs(mean - mean.iloc[0]))/scale)
    for column in ['second_moment', 'hamiltonian']:
        scale = max(abs(initial[column]), 1e-300)
        drifts[column] = float(np.max(np.abs(diagnostics_table[column] - initial[column]))/scale)
    return drifts
