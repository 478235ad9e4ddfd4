'''
The radial core profile

    phi'' + phi'/r + phi^p = 0 on (0, 1),  phi'(0) = 0,  phi(1) = 0,  phi > 0

and the core radius s_eps of a vortex with strength q_hat.

'''

from collections import namedtuple

import numpy as np
from scipy import integrate, interpolate, optimize

from helical_filaments import utils
from helical_filaments.errors import DomainError, SolverError

P_RANGE = (1.0, 6.0)

# the radial ODE is started at this radius from its series expansion
START_RADIUS = 1e-6

ODE_RTOL = 1e-13
ODE_ATOL = 1e-15

DEFAULT_NUM_SAMPLES = 4097


ProfileTable = namedtuple('ProfileTable', [
    'p', 'amplitude', 'radii', 'values', 'slope_at_one', 'integral_p', 'integral_p1'
])


def _rhs(p):
    def rhs(r, y):
        phi, dphi = y
        # odd extension of phi^p past the first zero
        return [dphi, -dphi/r - np.sign(phi)*np.abs(phi)**p]
    return rhs


def _initial_state(amplitude, p, r0=START_RADIUS):
    return [amplitude - amplitude**p*r0**2/4, -amplitude**p*r0/2]


def _shoot(amplitude, p, r_end=1.0, t_eval=None, events=None):
    return integrate.solve_ivp(
        _rhs(p), (START_RADIUS, r_end), _initial_state(amplitude, p),
        method='DOP853', rtol=ODE_RTOL, atol=ODE_ATOL, t_eval=t_eval, events=events,
        dense_output=False
    )


def _first_zero_of_unit_profile(p):
    '''
    The first zero of the solution with phi(0) = 1
    '''
    def crossing(r, y):
        return y[0]
    crossing.terminal = True
    crossing.direction = -1

    solution = _shoot(1.0, p, r_end=100.0, events=crossing)
    if not len(solution.t_events[0]):
        raise SolverError('The unit-amplitude profile has no zero in (0, 100) for p = %s' % p, p=p)
    return float(solution.t_events[0][0])


def solve_profile(p, num_samples=DEFAULT_NUM_SAMPLES, event_logger=None):
    '''
    Shoot on the central amplitude until phi(1) = 0

    The bracket comes from the scaling phi(r) = lambda^{2/(p-1)} psi(lambda r)
    of the unit-amplitude solution psi, whose first zero is lambda

    Parameters
    ----------
    p : exponent in (1, 6]
    num_samples : number of equispaced radial samples on [0, 1] (odd, for Simpson's rule)

    '''
    event_logger = event_logger or utils.null_logger
    if not P_RANGE[0] < p <= P_RANGE[1]:
        raise DomainError('The exponent p must lie in (1, 6] (got %s)' % p, p=p)
    if num_samples < 3 or num_samples % 2 == 0:
        raise ValueError('num_samples must be odd and at least 3')

    first_zero = _first_zero_of_unit_profile(p)
    estimate = first_zero**(2/(p - 1))

    def boundary_value(amplitude):
        return _shoot(amplitude, p).y[0, -1]

    lower, upper = 0.9*estimate, 1.1*estimate
    if not boundary_value(lower) > 0 > boundary_value(upper):
        raise SolverError(
            'The amplitude bracket [%s, %s] does not straddle phi(1) = 0' % (lower, upper),
            bracket=[lower, upper]
        )
    amplitude = optimize.brentq(boundary_value, lower, upper, xtol=1e-15, rtol=1e-15, maxiter=200)

    radii = np.linspace(0, 1, num_samples)
    solution = _shoot(amplitude, p, t_eval=radii[1:])
    if not solution.success:
        raise SolverError('The profile integration failed: %s' % solution.message)

    values = np.concatenate([[amplitude], solution.y[0]])
    slope = np.concatenate([[0.0], solution.y[1]])
    if abs(values[-1]) > 1e-10*amplitude:
        raise SolverError('phi(1) = %s after the amplitude solve' % values[-1], residual=values[-1])
    values[-1] = 0.0
    if np.any(values[:-1] <= 0) or np.any(slope[1:] >= 0):
        raise SolverError('The computed profile is not positive and decreasing')

    integral_p = 2*np.pi*integrate.simpson(values**p*radii, x=radii)
    integral_p1 = 2*np.pi*integrate.simpson(values**(p + 1)*radii, x=radii)

    event_logger('PROFILE INFO: p = %s, phi(0) = %s, phi\'(1) = %s' % (p, amplitude, slope[-1]))
    return ProfileTable(
        p=float(p),
        amplitude=float(amplitude),
        radii=radii,
        values=values,
        slope_at_one=float(slope[-1]),
        integral_p=float(integral_p),
        integral_p1=float(integral_p1),
    )


def pohozaev_defects(table):
    '''
    Relative defects of the two integral identities
        int phi^{p+1} = pi (p + 1) |phi'(1)|^2/2,   int phi^p = 2 pi |phi'(1)|
    '''
    slope = abs(table.slope_at_one)
    expected_p1 = np.pi*(table.p + 1)*slope**2/2
    expected_p = 2*np.pi*slope
    return {
        'integral_p1': abs(table.integral_p1 - expected_p1)/expected_p1,
        'integral_p': abs(table.integral_p - expected_p)/expected_p,
    }


def profile_values(table, rho):
    '''
    phi at radii rho in [0, 1] (cubic spline through the samples)
    '''
    spline = interpolate.CubicSpline(table.radii, table.values)
    return spline(np.clip(rho, 0, 1))


def core_radius_residual(eps, q_hat, table, s):
    '''
    eps^{2/(p-1)} s^{-2/(p-1)} phi'(1) - q_hat ln(1/eps)/ln s, and the larger of the two terms
    '''
    exponent = 2/(table.p - 1)
    left = (eps/s)**exponent*table.slope_at_one
    right = q_hat*np.log(1/eps)/np.log(s)
    return left - right, max(abs(left), abs(right))


def solve_core_radius(eps, q_hat, table):
    '''
    The core radius s_eps, by Newton's method in t = ln s from the small-eps estimate
    eps (|phi'(1)|/q_hat)^{(p-1)/2}, falling back to bracketing on [eps^2, sqrt(eps)]
    '''
    if not 0 < eps < 0.5:
        raise DomainError('epsilon must lie in (0, 0.5) (got %s)' % eps, epsilon=eps)
    if q_hat <= 0:
        raise DomainError('q_hat must be positive (got %s)' % q_hat, q_hat=q_hat)

    exponent = 2/(table.p - 1)
    slope = table.slope_at_one
    log_eps = np.log(eps)

    def residual(t):
        return np.exp(exponent*(log_eps - t))*slope + q_hat*log_eps/t

    def derivative(t):
        return -exponent*np.exp(exponent*(log_eps - t))*slope - q_hat*log_eps/t**2

    lower, upper = 2*log_eps, 0.5*log_eps
    t0 = log_eps + np.log(abs(slope)/q_hat)*(table.p - 1)/2
    t = None
    if lower < t0 < upper:
        try:
            result = optimize.root_scalar(
                residual, x0=t0, fprime=derivative, method='newton', xtol=1e-15, maxiter=100
            )
        except RuntimeError:
            result = None
        if result is not None and result.converged and lower < result.root < upper:
            t = result.root

    if t is None:
        if not residual(lower) < 0 < residual(upper):
            raise SolverError(
                'No core radius in (eps^2, sqrt(eps)) for eps = %s, q_hat = %s' % (eps, q_hat),
                epsilon=eps, q_hat=q_hat
            )
        t = optimize.brentq(residual, lower, upper, xtol=1e-15, rtol=1e-15)

    s = float(np.exp(t))
    if not eps**2 < s < np.sqrt(eps):
        raise SolverError('The core radius %s is outside (eps^2, sqrt(eps))' % s, core_radius=s)
    return s
