'''
The approximate solution built from one radial bubble per center

    V_j(x) = q_j L + (eps/s_j)^{2/(p-1)} phi(rho/s_j)     rho <= s_j
           = q_j L ln(rho)/ln(s_j)                        rho > s_j

with rho = |T_{z_j}(x - z_j)| and L = ln(1/eps), its projection correction H_j,
and the fixed point that fixes the strengths q_j.

'''

from collections import namedtuple

import numpy as np

from helical_filaments import coeff_field, utils
from helical_filaments.elliptic import green as green_module
from helical_filaments.elliptic import profile as core_profile
from helical_filaments.elliptic.grid import ScalarField
from helical_filaments.elliptic.operator import DiscreteOperator, frozen_operator
from helical_filaments.errors import FixedPointError, ResolutionError, ValidationError
from helical_filaments.settings_schemas import QhatSettings

DEFAULT_QHAT_SETTINGS = QhatSettings(damping=1.0, rtol=1e-12, max_sweeps=200)

# the sign structure is searched for L on this grid of candidates
SIGN_STRUCTURE_CANDIDATES = np.arange(1.0, 10.0 + 1e-9, 0.25)


class AnsatzParameters(namedtuple(
        'AnsatzParameters', ['centers', 'qhat', 'core_radii', 'epsilon', 'species'])):
    '''
    centers : (N, 2) array of core centers
    qhat : strengths of the cores
    core_radii : the core radius s_eps of each core
    epsilon : the small parameter
    species : index into WeightProfile.species for each core (default all zero)
    '''
    __slots__ = ()

    def __new__(cls, centers, qhat, core_radii, epsilon, species=None):
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        if species is None:
            species = (0,)*len(centers)
        return super().__new__(
            cls, centers, np.asarray(qhat, dtype=float), np.asarray(core_radii, dtype=float),
            float(epsilon), tuple(int(ind) for ind in species)
        )

    @property
    def log_scale(self):
        return np.log(1/self.epsilon)


QhatResult = namedtuple('QhatResult', ['qhat', 'core_radii', 'sweeps'])

AnsatzResult = namedtuple('AnsatzResult', [
    'V_total', 'H_parts', 'zeta_sup', 'matching_error', 'V_parts'
])


def _local_radii(grid, field, center):
    '''
    |T_z (x - z)| at every node
    '''
    T = coeff_field.factor_T(field, center)
    x1, x2 = grid.mesh()
    z = np.stack([x1 - center[0], x2 - center[1]], axis=-1) @ T.T
    return np.linalg.norm(z, axis=-1)


def ansatz_bubble(grid, field, table, center, qhat, core_radius, epsilon):
    '''
    The bubble V_{eps, z, q} at every node of the grid
    '''
    L = np.log(1/epsilon)
    rho = _local_radii(grid, field, utils.as_point(center))
    inside = rho <= core_radius

    values = np.empty(grid.shape)
    with np.errstate(divide='ignore'):
        values[~inside] = qhat*L*np.log(rho[~inside])/np.log(core_radius)
    amplitude = (epsilon/core_radius)**(2/(table.p - 1))
    values[inside] = qhat*L + amplitude*core_profile.profile_values(table, rho[inside]/core_radius)
    return values


def validate_parameters(params, field, grid=None):
    '''
    Raise a ValidationError if two cores overlap and a ResolutionError
    if a core is narrower than four grid cells
    '''
    centers = params.centers
    if not (len(params.qhat) == len(params.core_radii) == len(params.species) == len(centers)):
        raise ValidationError('The ansatz parameters have inconsistent lengths')
    if np.any(params.qhat <= 0) or np.any(params.core_radii <= 0):
        raise ValidationError('The strengths and core radii must be positive')

    max_radius = params.core_radii.max()
    for i, center in enumerate(centers):
        T = coeff_field.factor_T(field, center)
        for j in range(len(centers)):
            if i != j and np.linalg.norm(T @ (center - centers[j])) <= 2*max_radius:
                raise ValidationError(
                    'The cores at %s and %s overlap' % (center, centers[j]),
                    centers=[center, centers[j]], core_radius=max_radius
                )

    if grid is not None and params.core_radii.min() < 2*grid.spacing:
        raise ResolutionError(
            'The core radius %s is resolved by fewer than four cells (spacing %s)'
            % (params.core_radii.min(), grid.spacing),
            core_radius=params.core_radii.min(), spacing=grid.spacing
        )


def solve_qhat(field, profile, table, centers, epsilon, green_data, species=None,
               settings=DEFAULT_QHAT_SETTINGS, event_logger=None):
    '''
    Damped fixed-point sweeps for the strengths

        qhat_i = q(z_i) + (2 pi qhat_i sqrt(d_i)/ln s_i) S(z_i, z_i)
                        + sum_{j != i} (2 pi qhat_j sqrt(d_j)/ln s_j) G(z_i, z_j)

    starting from qhat_i = q(z_i), with the core radii s_i re-solved each sweep. Each sweep
    moves qhat by settings.damping times the update; the default damping of 1.0 gives plain
    undamped sweeps, which converge because the couplings scale with 1/|ln s_i|

    green_data : any object with the attributes robin_values and green_values
    (see green.green_data_at_centers)
    '''
    event_logger = event_logger or utils.null_logger
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    num = len(centers)
    species = species or (0,)*num

    q = np.array([profile.species(ind).q(center) for ind, center in zip(species, centers)])
    if np.any(q <= 0):
        raise ValidationError('The weight q must be positive at every center', q_values=q)

    sqrt_det = np.array([coeff_field.eval_metric(field, center).sqrt_det for center in centers])
    robin = np.asarray(green_data.robin_values, dtype=float)
    green = np.array(green_data.green_values, dtype=float)
    np.fill_diagonal(green, 0)

    def core_radii(qhat):
        return np.array([core_profile.solve_core_radius(epsilon, value, table) for value in qhat])

    qhat = q.copy()
    for sweep in range(1, settings.max_sweeps + 1):
        radii = core_radii(qhat)
        coupling = 2*np.pi*qhat*sqrt_det/np.log(radii)
        update = q + coupling*robin + green @ coupling
        new_qhat = settings.damping*update + (1 - settings.damping)*qhat
        if np.any(new_qhat <= 0):
            raise FixedPointError(
                'The strength fixed point left the positive orthant', last_iterate=new_qhat,
                iterations=sweep
            )

        change = np.max(np.abs(new_qhat - qhat))
        qhat = new_qhat
        if change <= settings.rtol:
            event_logger('QHAT INFO: converged after %d sweeps' % sweep)
            return QhatResult(qhat=qhat, core_radii=core_radii(qhat), sweeps=sweep)

    raise FixedPointError(
        'The strength fixed point did not converge in %d sweeps (last change %s)'
        % (settings.max_sweeps, change),
        last_iterate=qhat, iterations=settings.max_sweeps, change=change
    )


def build_ansatz(field, profile, table, params, grid, operator=None, green_data=None,
                 event_logger=None):
    '''
    Sample V_j, solve for the projection corrections H_j, and measure the matching error

    H_j = P V_j - V_j, where P V_j solves the variable-coefficient problem with zero
    boundary data and the right-hand side that the frozen operator -div(K(z_j) grad .)
    assigns to V_j.

    Parameters
    ----------
    operator : the DiscreteOperator of the field on the grid (assembled when omitted)
    green_data : the Green data at the centers (see green.green_data_at_centers);
        computed when omitted

    Returns
    -------
    AnsatzResult with
        V_total : ScalarField of sum_j V_j
        H_parts : list of ScalarField H_j
        zeta_sup : sup |H_j + (2 pi q_j sqrt(det K(z_j)) L/ln s_j) S(., z_j)| for each core
        matching_error : max_i sup over rho_i <= 2 s_i of
            |sum V + sum H - q_i(x) L - (V_i - q_i L)|
        V_parts : the bubbles as arrays
    '''
    event_logger = event_logger or utils.null_logger
    validate_parameters(params, field, grid=grid)
    if operator is None:
        operator = DiscreteOperator(grid, field)
    if green_data is None:
        green_data = green_module.green_data_at_centers(
            grid, field, params.centers, operator=operator, event_logger=event_logger
        )

    L = params.log_scale
    x1, x2 = grid.mesh()
    V_parts, H_parts, zeta_sup = [], [], []
    for j, center in enumerate(params.centers):
        V = ansatz_bubble(
            grid, field, table, center, params.qhat[j], params.core_radii[j], params.epsilon
        )
        rhs = frozen_operator(grid, field, center).apply(V)
        projected = operator.solve(rhs)
        H = projected - V

        sqrt_det = coeff_field.eval_metric(field, center).sqrt_det
        coefficient = 2*np.pi*params.qhat[j]*sqrt_det*L/np.log(params.core_radii[j])
        zeta = H + coefficient*np.asarray(green_data.results[j].S.values)

        V_parts.append(V)
        H_parts.append(ScalarField(grid, H, name='H_%d' % j))
        zeta_sup.append(float(np.max(np.abs(zeta[grid.interior_mask]))))

    total = sum(V_parts) + sum(H.values for H in H_parts)

    matching_error = 0.0
    for i, center in enumerate(params.centers):
        near = _local_radii(grid, field, center) <= 2*params.core_radii[i]
        level = profile.species(params.species[i]).q_arrays(x1, x2)*L
        defect = total - level - (V_parts[i] - params.qhat[i]*L)
        matching_error = max(matching_error, float(np.max(np.abs(defect[near]))))

    event_logger(
        'ANSATZ INFO: %d cores, matching error %s, sup zeta %s'
        % (len(params.centers), matching_error, max(zeta_sup))
    )
    return AnsatzResult(
        V_total=ScalarField(grid, sum(V_parts), name='V'),
        H_parts=H_parts,
        zeta_sup=zeta_sup,
        matching_error=matching_error,
        V_parts=V_parts,
    )


def ansatz_total(result):
    '''
    sum V_j + sum H_j as a plain array
    '''
    return np.asarray(result.V_total.values) + sum(np.asarray(H.values) for H in result.H_parts)


def measure_sign_structure(ansatz, field, profile, params, gamma=0.5,
                           candidates=SIGN_STRUCTURE_CANDIDATES):
    '''
    The smallest L among the candidates for which

        ansatz - q L_eps > 0  where rho_j <= (1 - L eps^gamma) s_j for some core j
        ansatz - q L_eps < 0  where rho_j > L s_j for every core j

    with q the weight of the core's species (of the nearest core, outside all cores).
    Returns None if no candidate works.

    ansatz : ScalarField (typically sum V_j + sum H_j)
    '''
    grid = ansatz.grid
    x1, x2 = grid.mesh()
    L_eps = params.log_scale

    scaled_radii = np.stack([
        _local_radii(grid, field, center)/radius
        for center, radius in zip(params.centers, params.core_radii)
    ])
    nearest = np.argmin(scaled_radii, axis=0)
    closest = np.min(scaled_radii, axis=0)

    levels = np.stack([profile.species(ind).q_arrays(x1, x2)*L_eps for ind in params.species])
    excess = ansatz.values - np.take_along_axis(levels, nearest[None], axis=0)[0]

    for L in candidates:
        inner = closest <= 1 - L*params.epsilon**gamma
        outer = closest > L
        if np.all(excess[inner] > 0) and np.all(excess[outer] < 0):
            return float(L)
    return None
