'''
Clustered scenarios: the helical families placed at the origin and shrunk by |ln eps|^{-1/2}

Each species s of a scenario has the weight q_s(x) = (alpha/2)|x|^2 + beta_s with
beta_s = kappa_s/(2 pi), alpha the family's angular velocity, and an indicator region
(an annulus around the origin, or small disks around the species' predicted points)
outside of which its nonlinearity is switched off.

'''

from collections import namedtuple

import numpy as np
from scipy.spatial.distance import pdist

from helical_filaments import reduced_energy, utils
from helical_filaments.coeff_field import CoefficientField, WeightProfile
from helical_filaments.elliptic.grid import Grid
from helical_filaments.errors import DomainError, ValidationError
from helical_filaments.filaments import helical_equilibria

SCENARIO_KINDS = [
    'polygon', 'polygon_plus_center', 'asym2', 'two_by_two', 'two_by_two_plus_center', 'generic'
]

# the indicator radius rho0 is this fraction of the smallest unscaled separation
DEFAULT_RHO0_FACTOR = 0.3

# species index of each configuration point, in the order of build_configuration
# (species are ordered as the betas of reduced_energy.landscape_coefficients)
def _point_species(case, num_points):
    if case == 'polygon':
        return [0]*num_points
    if case == 'polygon_plus_center':
        return [1] + [0]*(num_points - 1)
    if case == 'asym2':
        return [0, 1]
    if case == 'two_by_two':
        return [0, 1, 0, 1]
    return [2, 0, 1, 0, 1]


Region = namedtuple('Region', ['centers', 'inner', 'outer'])
Region.__doc__ = '''
The union over centers c of the annuli inner <= |x - c| < outer (unscaled coordinates);
inner = 0 gives disks and outer = inf the whole plane
'''

Species = namedtuple('Species', ['beta', 'region', 'positions'])


class Scenario(namedtuple('Scenario', [
        'kind', 'epsilon', 'p', 'pitch', 'half_width', 'num_points', 'alpha', 'species',
        'parameters'])):
    '''
    A clustered problem on the square [-half_width, half_width]^2

    kind : one of SCENARIO_KINDS
    epsilon : the small parameter
    p : the exponent of the nonlinearity
    pitch : the helical pitch h
    alpha : the shared quadratic coefficient of the weights
    species : tuple of Species (beta, indicator region, unscaled predicted points)
    parameters : the family parameters (or the generic weight) the scenario was built from
    '''
    __slots__ = ()

    @property
    def log_scale(self):
        return abs(np.log(self.epsilon))

    @property
    def scale(self):
        '''
        The factor |ln eps|^{-1/2} that shrinks the configuration toward the origin
        '''
        return 1/np.sqrt(self.log_scale)

    @property
    def field(self):
        return CoefficientField('helical', half_width=self.half_width, pitch=self.pitch)

    @property
    def profile(self):
        betas = [species.beta for species in self.species]
        return WeightProfile(self.alpha, betas[0], betas[1:])

    @property
    def num_cores(self):
        return sum(len(species.positions) for species in self.species)

    def grid(self):
        return Grid(self.half_width, self.num_points)

    def with_epsilon(self, epsilon):
        return self._replace(epsilon=float(epsilon))

    def target_circulations(self):
        '''
        2 pi beta_s sqrt(det K(0)) per species (det K_H(0) = 1)
        '''
        return [2*np.pi*species.beta for species in self.species]


def _rho0(points, factor):
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(points) < 2:
        return factor*max(np.max(np.linalg.norm(points, axis=1)), 1.0)
    return factor*np.min(pdist(points))


def _family_species(family, rho0_factor):
    configuration = helical_equilibria.build_configuration(family)
    points = utils.from_complex(configuration.positions)
    rho0 = _rho0(points, rho0_factor)
    _, betas, _ = reduced_energy.landscape_coefficients(family)
    point_species = _point_species(family.case, len(points))

    species = []
    for ind, beta in enumerate(betas):
        positions = points[[k for k, s in enumerate(point_species) if s == ind]]
        if family.case in ('polygon', 'polygon_plus_center') and ind == 0:
            radius = family.parameters['radius']
            region = Region(centers=np.zeros((1, 2)), inner=radius - rho0, outer=radius + rho0)
        else:
            region = Region(centers=positions, inner=0.0, outer=rho0)
        species.append(Species(beta=float(beta), region=region, positions=positions))
    return tuple(species)


def make_scenario(kind, epsilon, p=2.0, pitch=1.0, half_width=1.0, num_points=257,
                  rho0_factor=DEFAULT_RHO0_FACTOR, generic_start=None, **parameters):
    '''
    Build a scenario from a family case and its parameters, or a generic weight

    For the family kinds, parameters are those of helical_equilibria.make_family
    (a single missing parameter is solved for, as in complete_family).
    For kind='generic', parameters are alpha, beta and num_cores; the predicted points are
    the maximizer of H_N found from generic_start (default: a regular polygon of radius 1).
    '''
    if kind not in SCENARIO_KINDS:
        raise ValidationError("Unknown scenario kind '%s'" % kind, kind=kind)
    if not 0 < epsilon < 0.5:
        raise DomainError('epsilon must lie in (0, 0.5) (got %s)' % epsilon, epsilon=epsilon)
    if not rho0_factor > 0:
        raise ValidationError('rho0_factor must be positive')

    if kind == 'generic':
        alpha, beta = parameters['alpha'], parameters['beta']
        num_cores = int(parameters['num_cores'])
        if beta <= 0:
            raise ValidationError('beta must be positive (got %s)' % beta, beta=beta)
        if num_cores < 1:
            raise ValidationError('num_cores must be at least 1')
        if num_cores == 1:
            # H_1 is the quadratic form alone
            positions = np.zeros((1, 2))
        else:
            field = CoefficientField('helical', half_width=half_width, pitch=pitch)
            ctx = reduced_energy.reduced_energy_context(field, WeightProfile(alpha, beta), num_cores)
            if generic_start is None:
                generic_start = utils.from_complex(np.exp(2j*np.pi*np.arange(num_cores)/num_cores))
            result = reduced_energy.optimize_h_n(ctx, generic_start, mode='max')
            positions = np.asarray(result.point, dtype=float).reshape(-1, 2)
        region = Region(centers=np.zeros((1, 2)), inner=0.0, outer=np.inf)
        species = (Species(beta=float(beta), region=region, positions=positions),)

    else:
        family = helical_equilibria.complete_family(
            helical_equilibria.make_family(kind, pitch=pitch, **parameters)
        )
        alpha = helical_equilibria.angular_velocity(family)
        species = _family_species(family, rho0_factor)
        parameters = dict(family.parameters)

    scenario = Scenario(
        kind=kind,
        epsilon=float(epsilon),
        p=float(p),
        pitch=float(pitch),
        half_width=float(half_width),
        num_points=int(num_points),
        alpha=float(alpha),
        species=species,
        parameters=parameters,
    )
    for species in scenario.species:
        if species.beta <= 0:
            raise ValidationError('Every species needs a positive circulation', beta=species.beta)
    return scenario


def predicted_centers(scenario, snap=True):
    '''
    The scaled predicted points |ln eps|^{-1/2} Z_j, snapped to the nearest grid nodes,
    with the species index of each
    '''
    points, species_index = [], []
    for ind, species in enumerate(scenario.species):
        for position in species.positions:
            points.append(scenario.scale*np.asarray(position))
            species_index.append(ind)
    points = np.array(points).reshape(-1, 2)

    if snap:
        grid = scenario.grid()
        points = np.array([grid.node_position(grid.nearest_node(point)) for point in points])
    return points, tuple(species_index)


def region_contains(region, points, scale):
    '''
    Whether points (an (..., 2) array) lie in the region scaled by scale
    '''
    points = np.asarray(points, dtype=float)
    inside = np.zeros(points.shape[:-1], dtype=bool)
    for center in np.asarray(region.centers).reshape(-1, 2):
        distance = np.linalg.norm(points - scale*center, axis=-1)
        inside |= (distance >= scale*region.inner) & (distance < scale*region.outer)
    return inside


def species_masks(scenario, grid=None):
    '''
    The indicator of each species on the grid nodes (boundary nodes excluded)
    '''
    grid = grid or scenario.grid()
    x1, x2 = grid.mesh()
    points = np.stack([x1, x2], axis=-1)
    return [
        region_contains(species.region, points, scenario.scale) & grid.interior_mask
        for species in scenario.species
    ]


def species_levels(scenario, grid=None):
    '''
    q_s(x) |ln eps| at the grid nodes for each species
    '''
    grid = grid or scenario.grid()
    x1, x2 = grid.mesh()
    profile = scenario.profile
    return [
        profile.species(ind).q_arrays(x1, x2)*scenario.log_scale
        for ind in range(len(scenario.species))
    ]


def check_scenario_fits(scenario, grid=None):
    '''
    Raise a DomainError if a predicted point or an indicator region leaves the grid
    '''
    grid = grid or scenario.grid()
    centers, _ = predicted_centers(scenario, snap=False)
    for center in centers:
        grid.check_placement(center)

    for species in scenario.species:
        if not np.isfinite(species.region.outer):
            continue
        reach = scenario.scale*(
            np.max(np.abs(np.asarray(species.region.centers))) + species.region.outer
        )
        if reach >= grid.half_width:
            raise DomainError(
                'The indicator region of a species reaches the boundary (%s >= %s)'
                % (reach, grid.half_width),
                reach=reach, half_width=grid.half_width
            )


def scenario_summary(scenario):
    centers, species_index = predicted_centers(scenario)
    return {
        'kind': scenario.kind,
        'epsilon': scenario.epsilon,
        'p': scenario.p,
        'pitch': scenario.pitch,
        'alpha': scenario.alpha,
        'betas': [species.beta for species in scenario.species],
        'parameters': dict(scenario.parameters),
        'predicted_centers': centers.tolist(),
        'center_species': list(species_index),
        'grid': {'half_width': scenario.half_width, 'num_points': scenario.num_points},
    }
