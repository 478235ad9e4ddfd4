'''
Exact co-rotating helical filament configurations

Each family is a configuration Z_j(0) of points in the plane, with circulations kappa_j,
that rotates rigidly, Z_j(tau) = Z_j(0) exp(-i alpha tau), under the helical reduction

    d/dtau Z_j = (1/4pi) (-i kappa_j Z_j/h^2 + 2i sum_{k != j} kappa_k (Z_j - Z_k)/|Z_j - Z_k|^2)

The filaments themselves are X_j(s, tau) = Z_j(tau) exp(i s/h).

'''

from collections import namedtuple

import numpy as np
from scipy import optimize

from helical_filaments.errors import (
    AmbiguityError, CollisionError, CompatibilityError, NoSolutionError, ValidationError
)
from helical_filaments.filaments.kmd_dynamics import FilamentEnsemble

# the parameters of each case, in order
CASE_PARAMETERS = {
    'polygon': ['n', 'kappa', 'radius'],
    'polygon_plus_center': ['n', 'kappa', 'mu', 'radius'],
    'asym2': ['kappa1', 'kappa2', 'lambda1', 'lambda2'],
    'two_by_two': ['kappa', 'mu', 'lambda1', 'lambda2'],
    'two_by_two_plus_center': ['kappa0', 'kappa', 'mu', 'lambda1', 'lambda2'],
}

# the cases whose parameters must satisfy a compatibility condition
COMPATIBILITY_CASES = ['asym2', 'two_by_two', 'two_by_two_plus_center']

# relative tolerance of the compatibility condition
COMPATIBILITY_RTOL = 1e-10

# log-spaced bracket scan used to solve for a missing parameter
SCAN_BOUNDS = (1e-4, 1e4)
SCAN_INTERVALS = 64


HelicalFamily = namedtuple('HelicalFamily', ['case', 'parameters', 'pitch', 'global_phase'])
HelicalFamily.__new__.__defaults__ = (1.0, 0.0)

Configuration = namedtuple('Configuration', ['positions', 'circulations', 'alpha'])


def make_family(case, pitch=1.0, global_phase=0.0, **parameters):
    '''
    Convenience constructor, e.g. make_family('polygon', n=3, kappa=1, radius=1)
    (a parameter passed as None is unknown, see solve_missing_parameter)
    '''
    if case not in CASE_PARAMETERS:
        raise ValidationError('Unknown helical family case %s' % case, case=case)
    missing = set(CASE_PARAMETERS[case]) - set(parameters)
    extra = set(parameters) - set(CASE_PARAMETERS[case])
    if missing or extra:
        raise ValidationError(
            'The %s case takes parameters %s (missing %s, unexpected %s)'
            % (case, CASE_PARAMETERS[case], sorted(missing), sorted(extra)),
            case=case
        )
    return HelicalFamily(case=case, parameters=dict(parameters), pitch=pitch, global_phase=global_phase)


def validate_family(family):
    if family.case not in CASE_PARAMETERS:
        raise ValidationError('Unknown helical family case %s' % family.case, case=family.case)
    if family.pitch <= 0:
        raise ValidationError('The pitch must be positive (got %s)' % family.pitch, key='pitch')

    for name in CASE_PARAMETERS[family.case]:
        value = family.parameters.get(name)
        if value is None:
            raise ValidationError('The %s parameter is unknown' % name, key=name)
        if value <= 0:
            raise ValidationError('The %s parameter must be positive (got %s)' % (name, value), key=name)

    if 'n' in family.parameters:
        n = family.parameters['n']
        if n < 2 or int(n) != n:
            raise ValidationError('The polygon size n must be an integer >= 2 (got %s)' % n, key='n')


def _alpha_pair(case, params, h):
    '''
    The two expressions for the angular velocity of the two-species cases
    (they agree exactly when the compatibility condition holds)
    '''
    if case == 'asym2':
        kappa1, kappa2 = params['kappa1'], params['kappa2']
        lambda1, lambda2 = params['lambda1'], params['lambda2']
        left = kappa1/(4*np.pi*h**2) - kappa2/(2*np.pi*lambda1*(lambda1 + lambda2))
        right = kappa2/(4*np.pi*h**2) - kappa1/(2*np.pi*lambda2*(lambda1 + lambda2))
        left_terms = [kappa1/(4*np.pi*h**2), kappa2/(2*np.pi*lambda1*(lambda1 + lambda2))]
        right_terms = [kappa2/(4*np.pi*h**2), kappa1/(2*np.pi*lambda2*(lambda1 + lambda2))]
        return left, right, left_terms + right_terms

    kappa, mu = params['kappa'], params['mu']
    lambda1, lambda2 = params['lambda1'], params['lambda2']
    sum_sq = lambda1**2 + lambda2**2
    left_terms = [kappa/(4*np.pi*h**2), kappa/(4*np.pi*lambda1**2), mu/(np.pi*sum_sq)]
    right_terms = [mu/(4*np.pi*h**2), mu/(4*np.pi*lambda2**2), kappa/(np.pi*sum_sq)]

    if case == 'two_by_two_plus_center':
        kappa0 = params['kappa0']
        left_terms.append(kappa0/(2*np.pi*lambda1**2))
        right_terms.append(kappa0/(2*np.pi*lambda2**2))

    left = left_terms[0] - sum(left_terms[1:])
    right = right_terms[0] - sum(right_terms[1:])
    return left, right, left_terms + right_terms


def angular_velocity(family):
    '''
    The rotation rate alpha of the family (the first expression for the two-species cases)
    '''
    params, h = family.parameters, family.pitch

    if family.case in ('polygon', 'polygon_plus_center'):
        n, kappa, radius = params['n'], params['kappa'], params['radius']
        alpha = kappa/(4*np.pi)*(1/h**2 - (n - 1)/radius**2)
        if family.case == 'polygon_plus_center':
            alpha -= params['mu']/(2*np.pi*radius**2)
        return alpha

    left, _, _ = _alpha_pair(family.case, params, h)
    return left


def compatibility_residual(family):
    '''
    |alpha_left - alpha_right| relative to the largest term entering either expression
    (zero for the polygon cases, which carry no condition)
    '''
    if family.case not in COMPATIBILITY_CASES:
        return 0.0
    left, right, terms = _alpha_pair(family.case, family.parameters, family.pitch)
    return abs(left - right)/max(abs(term) for term in terms)


def build_configuration(family):
    '''
    The positions Z_j(0) (without the global phase), the circulations, and alpha

    Layouts: polygon vertices radius*exp(2 pi i (j - 1)/n); the center (when present) comes first;
    the two-by-two cross is (lambda1, i lambda2, -lambda1, -i lambda2)
    '''
    validate_family(family)
    params = family.parameters

    residual = compatibility_residual(family)
    if residual > COMPATIBILITY_RTOL:
        raise CompatibilityError(
            'The %s parameters violate the compatibility condition (relative residual %s)'
            % (family.case, residual),
            residual=residual
        )

    case = family.case
    if case in ('polygon', 'polygon_plus_center'):
        n = int(params['n'])
        positions = params['radius']*np.exp(2j*np.pi*np.arange(n)/n)
        circulations = np.full(n, float(params['kappa']))
        if case == 'polygon_plus_center':
            positions = np.concatenate([[0j], positions])
            circulations = np.concatenate([[params['mu']], circulations])

    elif case == 'asym2':
        positions = np.array([params['lambda1'], -params['lambda2']], dtype=complex)
        circulations = np.array([params['kappa1'], params['kappa2']], dtype=float)

    else:
        lambda1, lambda2 = params['lambda1'], params['lambda2']
        positions = np.array([lambda1, 1j*lambda2, -lambda1, -1j*lambda2], dtype=complex)
        kappa, mu = params['kappa'], params['mu']
        circulations = np.array([kappa, mu, kappa, mu], dtype=float)
        if case == 'two_by_two_plus_center':
            positions = np.concatenate([[0j], positions])
            circulations = np.concatenate([[params['kappa0']], circulations])

    return Configuration(positions=positions, circulations=circulations, alpha=angular_velocity(family))


def helical_velocity(positions, circulations, pitch):
    '''
    The right-hand side of the helical reduction at the points Z_j
    '''
    positions = np.asarray(positions, dtype=complex)
    circulations = np.asarray(circulations, dtype=float)

    differences = positions[:, None] - positions[None, :]
    distances_sq = np.abs(differences)**2
    np.fill_diagonal(distances_sq, np.inf)
    if np.min(distances_sq) == 0:
        raise CollisionError('Coincident points in the configuration', min_separation=0.0)

    interaction = np.sum(circulations[None, :]*differences/distances_sq, axis=1)
    return (-1j*circulations*positions/pitch**2 + 2j*interaction)/(4*np.pi)


def equilibrium_residual(family, alpha=None):
    '''
    max_j |-i alpha Z_j - (helical velocity)_j| at tau = 0

    alpha : overrides the family's angular velocity
    '''
    config = build_configuration(family)
    if alpha is None:
        alpha = config.alpha
    velocity = helical_velocity(config.positions, config.circulations, family.pitch)
    return float(np.max(np.abs(-1j*alpha*config.positions - velocity)))


def polygon_identity_sum(n):
    '''
    sum_{k != j} (1 - w^{j-k})/|1 - w^{j-k}|^2 with w = exp(2 pi i/n), which equals (n - 1)/2
    '''
    w = np.exp(2j*np.pi*np.arange(1, n)/n)
    return complex(np.sum((1 - w)/np.abs(1 - w)**2))


def _root_near_guess(residual, name, initial_guess):
    '''
    Scan log-spaced brackets for sign changes of the residual and refine each with brentq
    '''
    grid = np.geomspace(*SCAN_BOUNDS, SCAN_INTERVALS + 1)
    values = np.array([residual(value) for value in grid])

    roots, brackets = [], []
    for ind in range(SCAN_INTERVALS):
        lower, upper = grid[ind], grid[ind + 1]
        if values[ind] == 0:
            roots.append(lower)
            brackets.append((lower, lower))
        elif values[ind]*values[ind + 1] < 0:
            root = optimize.brentq(residual, lower, upper, xtol=1e-15, rtol=4*np.finfo(float).eps,
                                   maxiter=200)
            roots.append(root)
            brackets.append((lower, upper))
    if values[-1] == 0:
        roots.append(grid[-1])
        brackets.append((grid[-1], grid[-1]))

    if not roots:
        raise NoSolutionError(
            'No sign change of the compatibility condition in %s for %s' % (SCAN_BOUNDS, name),
            parameter=name
        )
    if len(roots) > 1 and initial_guess is None:
        raise AmbiguityError(
            'The compatibility condition has %d roots for %s; pass an initial guess'
            % (len(roots), name),
            parameter=name, brackets=brackets, roots=roots
        )
    if initial_guess is None:
        return roots[0]
    return min(roots, key=lambda root: abs(root - initial_guess))


def solve_missing_parameter(family, initial_guess=None):
    '''
    Solve the compatibility condition for the single parameter given as None

    For asym2 with unknown kappa2 the solution is closed form:

        kappa2/kappa1 = (2 lambda1 h^2 + lambda1 lambda2 (lambda1 + lambda2))
                        / (2 lambda2 h^2 + lambda1 lambda2 (lambda1 + lambda2))

    Every other unknown is found by bracket scanning over (1e-4, 1e4) and Brent refinement,
    taking the root nearest initial_guess when there are several.

    Returns the value of the unknown parameter
    '''
    if family.case not in COMPATIBILITY_CASES:
        raise ValidationError('The %s case has no compatibility condition' % family.case)

    unknowns = [name for name in CASE_PARAMETERS[family.case] if family.parameters.get(name) is None]
    if len(unknowns) != 1:
        raise ValidationError('Expected exactly one unknown parameter but got %s' % unknowns)
    name = unknowns[0]

    for other, value in family.parameters.items():
        if other != name and value <= 0:
            raise ValidationError(
                'The %s parameter must be positive (got %s)' % (other, value), key=other
            )

    params, h = family.parameters, family.pitch
    if family.case == 'asym2' and name == 'kappa2':
        lambda1, lambda2 = params['lambda1'], params['lambda2']
        shared = lambda1*lambda2*(lambda1 + lambda2)
        return params['kappa1']*(2*lambda1*h**2 + shared)/(2*lambda2*h**2 + shared)

    def residual(value):
        trial = dict(params)
        trial[name] = value
        left, right, _ = _alpha_pair(family.case, trial, h)
        return left - right

    return _root_near_guess(residual, name, initial_guess)


def complete_family(family, initial_guess=None):
    '''
    The family with its unknown parameter (if any) filled in
    '''
    unknowns = [name for name, value in family.parameters.items() if value is None]
    if not unknowns:
        return family
    parameters = dict(family.parameters)
    parameters[unknowns[0]] = solve_missing_parameter(family, initial_guess=initial_guess)
    return family._replace(parameters=parameters)


def sample_filaments(family, num_modes):
    '''
    The filaments X_j(s) = Z_j(0) exp(i s/h) exp(i theta0) on num_modes points over [0, 2 pi h)
    '''
    if num_modes < 8 or num_modes & (num_modes - 1):
        raise ValueError('The number of samples must be a power of two >= 8 (got %s)' % num_modes)

    config = build_configuration(family)
    period = 2*np.pi*family.pitch
    s = np.arange(num_modes)*period/num_modes
    positions = (
        config.positions[:, None]*np.exp(1j*s/family.pitch)[None, :]*np.exp(1j*family.global_phase)
    )
    return FilamentEnsemble(config.circulations, positions, period)


def verification_report(family):
    '''
    JSON-ready summary {case, parameters, alpha, compat_residual, equilibrium_residual}
    '''
    return {
        'case': family.case,
        'parameters': dict(family.parameters),
        'pitch': family.pitch,
        'alpha': angular_velocity(family),
        'compat_residual': compatibility_residual(family),
        'equilibrium_residual': equilibrium_residual(family),
    }
