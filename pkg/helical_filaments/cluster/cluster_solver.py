'''
The clustered semilinear problem

    -div(K grad u) = eps^{-2} sum_s (u - q_s |ln eps|)_+^p 1_{A_s}   in the square,
    u = 0 on its boundary

solved by damped iteration from the multi-core ansatz, and the measurements made on its solutions

'''

import os
from collections import namedtuple

import dask
import dask.diagnostics
import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
import skimage.measure
from scipy.spatial.distance import pdist

from helical_filaments import coeff_field, utils
from helical_filaments.cluster import scenarios
from helical_filaments.elliptic import ansatz, green, profile
from helical_filaments.elliptic.grid import ScalarField
from helical_filaments.elliptic.operator import DiscreteOperator
from helical_filaments.errors import ConvergenceError, NumericalBlowupError, SolverError
from helical_filaments.reduced_energy import ExpansionInputs
from helical_filaments.settings_schemas import DampingManager, LinearSolverSettings, PicardSettings

DEFAULT_PICARD_SETTINGS = PicardSettings(
    damping=0.6, min_damping=0.6/64, rtol=1e-8, max_sweeps=300, newton_correction=True
)
DEFAULT_LINEAR_SETTINGS = LinearSolverSettings(method='cg', rtol=1e-10, max_iterations=None)
DEFAULT_QHAT_SETTINGS = ansatz.DEFAULT_QHAT_SETTINGS

# consecutive sweeps whose smallest step still raises the residual before the iteration gives up
MAX_RISING_SWEEPS = 5

# the number of dask workers for epsilon ladders
NUM_THREADS_ENV_VAR = 'HELICAL_FILAMENTS_NUM_THREADS'


ClusterProblem = namedtuple('ClusterProblem', [
    'grid', 'operator', 'levels', 'masks', 'epsilon', 'p'
])

IterationResult = namedtuple('IterationResult', [
    'u', 'sweeps', 'update', 'residual', 'converged', 'damping'
])

AnsatzSetup = namedtuple('AnsatzSetup', [
    'grid', 'operator', 'table', 'centers', 'species_index', 'green_data', 'params', 'result'
])

LadderResult = namedtuple('LadderResult', ['epsilons', 'reports', 'fields', 'trends'])


class ClusterReport(namedtuple('ClusterReport', [
        'kind', 'epsilon', 'components', 'iterations', 'final_residual', 'fixed_point_residual',
        'energy', 'ansatz_energy', 'ansatz_residual', 'support_contained', 'qhat', 'core_radii',
        'converged'])):
    '''
    The measurements on a clustered solution

    components : one dict per connected support component, with its species, centroid,
        diameter, circulation, the species target 2 pi beta sqrt(det K(0)) and the relative
        circulation error
    final_residual : the relative size of the last accepted update
    fixed_point_residual : |A u - f(u)| relative to max(|A u|, |f(u)|)
    ansatz_residual : sup |u - (sum V + sum H)|
    support_contained : whether the support lies within 1/|ln eps| of the component centroids
    '''
    __slots__ = ()

    def __new__(cls, kind, epsilon, components, iterations=None, final_residual=None,
                fixed_point_residual=None, energy=None, ansatz_energy=None, ansatz_residual=None,
                support_contained=None, qhat=None, core_radii=None, converged=None):
        return super().__new__(
            cls, kind, epsilon, components, iterations, final_residual, fixed_point_residual,
            energy, ansatz_energy, ansatz_residual, support_contained, qhat, core_radii, converged
        )

    @property
    def num_components(self):
        return len(self.components)

    def to_dict(self):
        report = self._asdict()
        for key in ('qhat', 'core_radii'):
            if report[key] is not None:
                report[key] = np.asarray(report[key]).tolist()
        return report


# ------------------------------------------------------------------------------------------
#
# the discrete nonlinear problem
#
# ------------------------------------------------------------------------------------------

def build_problem(scenario, grid=None, operator=None, linear_settings=DEFAULT_LINEAR_SETTINGS):
    grid = grid or scenario.grid()
    if operator is None:
        operator = DiscreteOperator(
            grid, scenario.field, method=linear_settings.method, rtol=linear_settings.rtol,
            max_iterations=linear_settings.max_iterations
        )
    return ClusterProblem(
        grid=grid,
        operator=operator,
        levels=scenarios.species_levels(scenario, grid),
        masks=scenarios.species_masks(scenario, grid),
        epsilon=scenario.epsilon,
        p=scenario.p,
    )


def forcing(problem, u):
    '''
    eps^{-2} sum_s (u - level_s)_+^p 1_s at every node
    '''
    total = np.zeros(problem.grid.shape)
    for level, mask in zip(problem.levels, problem.masks):
        total += np.where(mask, np.maximum(u - level, 0)**problem.p, 0)
    return total/problem.epsilon**2


def forcing_derivative(problem, u):
    total = np.zeros(problem.grid.shape)
    for level, mask in zip(problem.levels, problem.masks):
        total += np.where(mask, problem.p*np.maximum(u - level, 0)**(problem.p - 1), 0)
    return total/problem.epsilon**2


def relative_residual(problem, u):
    '''
    |A u - f(u)| / max(|f(u)|, |A u|) over the interior nodes
    '''
    interior = problem.operator.interior
    applied = problem.operator.apply(u)
    rhs = forcing(problem, u).ravel()[interior]
    scale = max(np.linalg.norm(rhs), np.linalg.norm(applied), np.finfo(float).tiny)
    return float(np.linalg.norm(applied - rhs)/scale)


def discrete_energy(problem, u):
    '''
    (eps^2/2) int (K grad u, grad u) - (1/(p + 1)) sum_s int_{A_s} (u - q_s |ln eps|)_+^{p+1}
    by the discrete quadratic form and midpoint quadrature
    '''
    u = np.asarray(u, dtype=float)
    interior = problem.operator.interior
    u_interior = u.ravel()[interior]
    cell_area = problem.grid.cell_area

    quadratic = 0.5*problem.epsilon**2*cell_area*float(u_interior @ (problem.operator.A_II @ u_interior))
    nonlinear = 0.0
    for level, mask in zip(problem.levels, problem.masks):
        nonlinear += np.sum(np.where(mask, np.maximum(u - level, 0)**(problem.p + 1), 0))
    return quadratic - cell_area*nonlinear/(problem.p + 1)


def _newton_direction(problem, u):
    '''
    The solution of (A - f'(u)) delta = f(u) - A u on the interior, by MINRES
    preconditioned with the factorization of A
    '''
    operator = problem.operator
    interior = operator.interior
    derivative = forcing_derivative(problem, u).ravel()[interior]
    residual = forcing(problem, u).ravel()[interior] - operator.apply(u)

    jacobian = operator.A_II - sp.diags(derivative)
    lu = operator.factorization()
    preconditioner = spla.LinearOperator(jacobian.shape, matvec=lu.solve, dtype=float)
    delta, info = spla.minres(jacobian, residual, M=preconditioner, rtol=operator.rtol)
    if info < 0:
        raise SolverError('MINRES failed on the linearized problem (info %s)' % info, info=info)

    direction = np.zeros(problem.grid.num_points**2)
    direction[interior] = delta
    return direction.reshape(problem.grid.shape)


def _picard_direction(problem, u):
    return problem.operator.solve(forcing(problem, u)) - u


def iterate_clustered(problem, u0, settings=DEFAULT_PICARD_SETTINGS, event_logger=None,
                      iteration_logger=None):
    '''
    Damped fixed-point iteration u <- u + theta d from u0

    d is either the Picard step A^{-1} f(u) - u or, when settings.newton_correction is set,
    the Newton step of A u - f(u) = 0. A step that increases the residual is retried with
    the damping halved, down to settings.min_damping. The iteration stops when the update
    is smaller than settings.rtol relative to max(|u|, |u0|). It fails with ConvergenceError
    once MAX_RISING_SWEEPS consecutive sweeps raise the residual even at the smallest damping.

    iteration_logger : optional callable receiving one dict per sweep
    '''
    event_logger = event_logger or utils.null_logger
    iteration_logger = iteration_logger or (lambda row: None)

    u = np.array(u0, dtype=float)
    u[problem.grid.boundary_mask] = 0
    initial_norm = np.linalg.norm(u)

    initially_forced = bool(np.any(forcing(problem, u)))
    if not initially_forced:
        # the forcing vanishes, so the unique fixed point is u = 0
        event_logger('PICARD INFO: the initial forcing vanishes; returning the zero solution')
        return IterationResult(
            u=np.zeros_like(u), sweeps=0, update=0.0, residual=0.0, converged=True, damping=None
        )

    damping = DampingManager(settings)
    direction_method = _newton_direction if settings.newton_correction else _picard_direction
    residual = relative_residual(problem, u)
    rising_sweeps = 0

    for sweep in range(1, settings.max_sweeps + 1):
        direction = direction_method(problem, u)
        damping.reset()
        while True:
            candidate = u + damping.current_damping*direction
            if not np.all(np.isfinite(candidate)):
                raise NumericalBlowupError(
                    'Non-finite values in sweep %d' % sweep, iterations=sweep
                )
            candidate_residual = relative_residual(problem, candidate)
            if not np.isfinite(candidate_residual):
                raise NumericalBlowupError(
                    'Non-finite residual in sweep %d' % sweep, last_iterate=u, iterations=sweep,
                    residual=residual
                )
            if candidate_residual <= residual or not damping.halve():
                break

        update = np.linalg.norm(candidate - u)/max(np.linalg.norm(candidate), initial_norm)
        previous_residual = residual
        u, residual = candidate, candidate_residual

        iteration_logger({
            'sweep': sweep,
            'damping': damping.current_damping,
            'update': update,
            'residual': residual,
        })
        if update <= settings.rtol:
            break

        if residual > previous_residual:
            rising_sweeps += 1
            event_logger(
                'PICARD WARNING: the residual rose from %s to %s at damping %s in sweep %d'
                % (previous_residual, residual, damping.current_damping, sweep)
            )
            if rising_sweeps >= MAX_RISING_SWEEPS:
                raise ConvergenceError(
                    'The clustered iteration diverges: the residual rose in %d consecutive sweeps '
                    'at the smallest damping' % rising_sweeps,
                    last_iterate=u, iterations=sweep, residual=residual,
                    damping=damping.current_damping
                )
        else:
            rising_sweeps = 0
    else:
        raise ConvergenceError(
            'The clustered iteration did not converge in %d sweeps (last update %s)'
            % (settings.max_sweeps, update),
            last_iterate=u, iterations=settings.max_sweeps, update=update, residual=residual
        )

    if not np.any(forcing(problem, u)):
        raise ConvergenceError(
            'The iteration lost every support component', last_iterate=u, iterations=sweep
        )

    event_logger(
        'PICARD INFO: converged after %d sweeps (update %s, residual %s)' % (sweep, update, residual)
    )
    return IterationResult(
        u=u, sweeps=sweep, update=update, residual=residual, converged=True,
        damping=damping.current_damping
    )


# ------------------------------------------------------------------------------------------
#
# the ansatz at the predicted centers
#
# ------------------------------------------------------------------------------------------

def prepare_ansatz(scenario, operator=None, table=None, qhat=None,
                   qhat_settings=DEFAULT_QHAT_SETTINGS, event_logger=None):
    '''
    The multi-core ansatz at the scenario's predicted centers

    qhat : the core strengths (solved from the fixed point when omitted)
    '''
    scenarios.check_scenario_fits(scenario)
    grid = operator.grid if operator is not None else scenario.grid()
    if operator is None:
        operator = DiscreteOperator(grid, scenario.field)
    if table is None:
        table = profile.solve_profile(scenario.p, event_logger=event_logger)

    field, weight = scenario.field, scenario.profile
    centers, species_index = scenarios.predicted_centers(scenario)
    green_data = green.green_data_at_centers(
        grid, field, centers, operator=operator, event_logger=event_logger
    )

    if qhat is None:
        solution = ansatz.solve_qhat(
            field, weight, table, centers, scenario.epsilon, green_data,
            species=species_index, settings=qhat_settings, event_logger=event_logger
        )
        qhat, core_radii = solution.qhat, solution.core_radii
    else:
        qhat = np.asarray(qhat, dtype=float)
        core_radii = np.array([
            profile.solve_core_radius(scenario.epsilon, value, table) for value in qhat
        ])

    params = ansatz.AnsatzParameters(centers, qhat, core_radii, scenario.epsilon, species_index)
    result = ansatz.build_ansatz(
        field, weight, table, params, grid, operator=operator, green_data=green_data,
        event_logger=event_logger
    )
    return AnsatzSetup(
        grid=grid,
        operator=operator,
        table=table,
        centers=centers,
        species_index=species_index,
        green_data=green_data,
        params=params,
        result=result,
    )


def energy_of_ansatz(scenario, centers=None, qhat=None, setup=None, event_logger=None):
    '''
    I_eps(sum V + sum H) for the scenario's ansatz

    centers : when given, replace the predicted points (unscaled, as in the scenario's species)
    '''
    if centers is not None:
        centers = np.asarray(centers, dtype=float).reshape(-1, 2)
        species, start = [], 0
        for item in scenario.species:
            species.append(item._replace(positions=centers[start:start + len(item.positions)]))
            start += len(item.positions)
        scenario = scenario._replace(species=tuple(species))
        setup = None

    if setup is None:
        setup = prepare_ansatz(scenario, qhat=qhat, event_logger=event_logger)
    problem = build_problem(scenario, grid=setup.grid, operator=setup.operator)
    return discrete_energy(problem, ansatz.ansatz_total(setup.result))


def expansion_inputs(scenario, setup):
    '''
    The inputs of reduced_energy.energy_expansion at the ansatz centers
    '''
    weight, field = scenario.profile, scenario.field
    q_values = [
        weight.species(ind).q(center) for ind, center in zip(setup.species_index, setup.centers)
    ]
    sqrt_det = [coeff_field.eval_metric(field, center).sqrt_det for center in setup.centers]
    return ExpansionInputs(
        epsilon=scenario.epsilon,
        q_values=q_values,
        sqrt_det_values=sqrt_det,
        robin_values=setup.green_data.robin_values,
        green_values=setup.green_data.green_values,
        p=scenario.p,
    )


def ansatz_circulation(qhat, core_radius, epsilon, sqrt_det):
    '''
    The circulation of a single exact bubble, 2 pi q |ln eps| sqrt(det K)/|ln s|
    '''
    return 2*np.pi*qhat*abs(np.log(epsilon))*sqrt_det/abs(np.log(core_radius))


# ------------------------------------------------------------------------------------------
#
# solve and measure
#
# ------------------------------------------------------------------------------------------

def _component_dict(prop, species_index, problem, u, level, target):
    grid = problem.grid
    coords = grid.coords[0] + prop.coords*grid.spacing
    values = u[prop.coords[:, 0], prop.coords[:, 1]] - level[prop.coords[:, 0], prop.coords[:, 1]]
    circulation = grid.cell_area*np.sum(np.maximum(values, 0)**problem.p)/problem.epsilon**2
    diameter = float(np.max(pdist(coords))) if len(coords) > 1 else 0.0
    centroid = coords.mean(axis=0)
    return {
        'species': species_index,
        'centroid': centroid.tolist(),
        'angle': float(np.arctan2(centroid[1], centroid[0])),
        'num_nodes': int(prop.area),
        'diameter': diameter,
        'circulation': float(circulation),
        'target': float(target),
        'circulation_error': float(abs(circulation - target)/target),
    }


def cluster_diagnostics(u, scenario, problem=None):
    '''
    Connected components of {u > q_s |ln eps|} within each species region,
    with their diameters, centroids and circulations, and the residual and energy of u

    An empty support gives a report without components
    '''
    values = np.asarray(u.values if isinstance(u, ScalarField) else u, dtype=float)
    problem = problem or build_problem(scenario)
    targets = [
        2*np.pi*species.beta*coeff_field.eval_metric(scenario.field, (0, 0)).sqrt_det
        for species in scenario.species
    ]

    components = []
    support = np.zeros(problem.grid.shape, dtype=bool)
    for ind, (level, mask) in enumerate(zip(problem.levels, problem.masks)):
        species_support = (values > level) & mask
        support |= species_support
        labels = skimage.measure.label(species_support, connectivity=2)
        for prop in skimage.measure.regionprops(labels):
            components.append(_component_dict(prop, ind, problem, values, level, targets[ind]))
    components = sorted(components, key=lambda c: (c['species'], c['angle'] % (2*np.pi)))

    support_contained = True
    if components:
        x1, x2 = problem.grid.mesh()
        points = np.stack([x1[support], x2[support]], axis=-1)
        centroids = np.array([c['centroid'] for c in components])
        distances = np.linalg.norm(points[:, None, :] - centroids[None, :, :], axis=-1)
        support_contained = bool(np.all(distances.min(axis=1) <= 1/scenario.log_scale))

    return ClusterReport(
        kind=scenario.kind,
        epsilon=scenario.epsilon,
        components=components,
        fixed_point_residual=relative_residual(problem, values),
        energy=discrete_energy(problem, values),
        support_contained=support_contained,
    )


def solve_clustered(scenario, picard_settings=DEFAULT_PICARD_SETTINGS,
                    linear_settings=DEFAULT_LINEAR_SETTINGS, qhat_settings=DEFAULT_QHAT_SETTINGS,
                    event_logger=None, iteration_logger=None):
    '''
    Solve the clustered problem from the ansatz at the predicted centers

    Returns the solution as a ScalarField and its ClusterReport
    '''
    event_logger = event_logger or utils.null_logger
    grid = scenario.grid()
    operator = DiscreteOperator(
        grid, scenario.field, method=linear_settings.method, rtol=linear_settings.rtol,
        max_iterations=linear_settings.max_iterations
    )
    setup = prepare_ansatz(
        scenario, operator=operator, qhat_settings=qhat_settings, event_logger=event_logger
    )
    u0 = ansatz.ansatz_total(setup.result)
    problem = build_problem(scenario, grid=grid, operator=operator)

    event_logger(
        'PICARD INFO: solving %s at eps = %s on %s' % (scenario.kind, scenario.epsilon, grid)
    )
    iteration = iterate_clustered(
        problem, u0, picard_settings, event_logger=event_logger, iteration_logger=iteration_logger
    )

    u = ScalarField(grid, iteration.u, name='u')
    report = cluster_diagnostics(u, scenario, problem=problem)._replace(
        iterations=iteration.sweeps,
        final_residual=iteration.update,
        ansatz_energy=discrete_energy(problem, u0),
        ansatz_residual=float(np.max(np.abs(iteration.u - u0))),
        qhat=setup.params.qhat,
        core_radii=setup.params.core_radii,
        converged=iteration.converged,
    )

    expected = scenario.num_cores
    if report.num_components != expected:
        event_logger(
            'PICARD WARNING: found %d components but expected %d' % (report.num_components, expected)
        )
    return u, report


# ------------------------------------------------------------------------------------------
#
# the three-dimensional helical vorticity
#
# ------------------------------------------------------------------------------------------

def lift_vorticity_3d(u, scenario, samples, t=0.0):
    '''
    The helical vorticity at the points samples (an (m, 3) array) at time t

        w(x, t) = eps^{-2} sum_s (u(y) - q_s(y) |ln eps|)_+^p 1_s(y),
        y = Rbar_theta (x1, x2),  theta = -(x3/h + alpha |ln eps| t),

    with Rbar_theta = [[cos, sin], [-sin, cos]], and the vorticity vector (w/h)(x2, -x1, h).
    u is interpolated bilinearly; points whose rotation leaves the grid raise a DomainError.
    '''
    samples = np.asarray(samples, dtype=float).reshape(-1, 3)
    h = scenario.pitch
    theta = -(samples[:, 2]/h + scenario.alpha*scenario.log_scale*t)
    cos, sin = np.cos(theta), np.sin(theta)
    rotated = np.stack([
        cos*samples[:, 0] + sin*samples[:, 1],
        -sin*samples[:, 0] + cos*samples[:, 1],
    ], axis=-1)

    values = u.interpolate(rotated)
    weight = scenario.profile
    w = np.zeros(len(samples))
    for ind, species in enumerate(scenario.species):
        level = weight.species(ind).q(rotated)*scenario.log_scale
        inside = scenarios.region_contains(species.region, rotated, scenario.scale)
        w += np.where(inside, np.maximum(values - level, 0)**scenario.p, 0)
    w /= scenario.epsilon**2

    direction = np.stack([samples[:, 1], -samples[:, 0], np.full(len(samples), h)], axis=-1)
    return (w/h)[:, None]*direction


# ------------------------------------------------------------------------------------------
#
# epsilon ladders
#
# ------------------------------------------------------------------------------------------

def _num_workers():
    value = os.environ.get(NUM_THREADS_ENV_VAR)
    return int(value) if value else None


def ladder_trends(epsilons, reports):
    '''
    Diameter halving ratios, the worst circulation error per epsilon, and whether
    the circulation error decreases with epsilon
    '''
    mean_diameters = [
        np.mean([c['diameter'] for c in report.components]) if report.components else np.nan
        for report in reports
    ]
    circulation_errors = [
        max(c['circulation_error'] for c in report.components) if report.components else np.nan
        for report in reports
    ]
    diameter_ratios = [
        mean_diameters[ind]/mean_diameters[ind + 1] for ind in range(len(reports) - 1)
    ]
    return {
        'epsilons': list(epsilons),
        'num_components': [report.num_components for report in reports],
        'mean_diameters': mean_diameters,
        'diameter_ratios': diameter_ratios,
        'circulation_errors': circulation_errors,
        'circulation_error_decreasing': bool(np.all(np.diff(circulation_errors) < 0)),
    }


def solve_ladder(scenario, epsilons, picard_settings=DEFAULT_PICARD_SETTINGS,
                 linear_settings=DEFAULT_LINEAR_SETTINGS, qhat_settings=DEFAULT_QHAT_SETTINGS,
                 event_logger=None):
    '''
    Independent solves of the scenario at each epsilon (in decreasing order),
    dispatched to dask threads
    '''
    epsilons = sorted((float(eps) for eps in epsilons), reverse=True)
    tasks = [
        dask.delayed(solve_clustered)(
            scenario.with_epsilon(eps), picard_settings, linear_settings, qhat_settings,
            event_logger
        )
        for eps in epsilons
    ]
    with dask.diagnostics.ProgressBar():
        results = dask.compute(*tasks, scheduler='threads', num_workers=_num_workers())

    fields = [field for field, _ in results]
    reports = [report for _, report in results]
    return LadderResult(
        epsilons=epsilons, reports=reports, fields=fields, trends=ladder_trends(epsilons, reports)
    )
