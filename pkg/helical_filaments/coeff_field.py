'''
Coefficient fields K(x), the weight q(x), and the local quantities derived from them

The helical coefficient matrix is

    K_H(x) = 1/(h^2 + |x|^2) * [[h^2 + x2^2, -x1*x2], [-x1*x2, h^2 + x1^2]]

whose eigenpairs are (x, h^2/(h^2 + |x|^2)) and (x_perp, 1).

'''

from collections import namedtuple

import numpy as np
from scipy.stats import qmc

from helical_filaments import utils
from helical_filaments.errors import (
    AssumptionError, DomainError, FactorizationError, ValidationError
)

FIELD_KINDS = ['helical', 'identity', 'custom']

# relative step of the finite-difference fallback for first derivatives
FD_STEP = 1e-5

# second derivatives by finite differences use a larger relative step (also scaled by max(1, |x|)),
# since at FD_STEP their rounding error is of order 1e-6
HESSIAN_FD_STEP = 1e-4


class CoefficientField:

    def __init__(self, kind='helical', half_width=1.0, pitch=1.0, matrix_map=None,
                 eigenvalue_bounds=None):
        '''
        kind : 'helical', 'identity' or 'custom'
        half_width : the domain is the square [-half_width, half_width]^2
        pitch : the helical pitch h (only used by the helical kind)
        matrix_map : callable mapping a 2-vector to a 2x2 matrix (only for the custom kind)
        eigenvalue_bounds : optional (lower, upper) bounds checked by validate_assumptions
        '''
        if kind not in FIELD_KINDS:
            raise ValueError('Unknown coefficient field kind %s' % kind)
        if half_width <= 0:
            raise ValueError('The domain half-width must be positive')
        if kind == 'helical' and pitch <= 0:
            raise ValueError('The helical pitch must be positive')
        if kind == 'custom' and matrix_map is None:
            raise ValueError('A custom coefficient field requires a matrix_map')

        self.kind = kind
        self.half_width = float(half_width)
        self.pitch = float(pitch)
        self.matrix_map = matrix_map
        self.eigenvalue_bounds = eigenvalue_bounds


    def __repr__(self):
        if self.kind == 'helical':
            return 'CoefficientField(helical, h=%s, R=%s)' % (self.pitch, self.half_width)
        return 'CoefficientField(%s, R=%s)' % (self.kind, self.half_width)


    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.all(np.abs(x) <= self.half_width*(1 + 1e-12)))


    def check_domain(self, x):
        if not self.contains(x):
            raise DomainError(
                'Point %s is outside the domain [-%s, %s]^2' % (x, self.half_width, self.half_width),
                point=np.asarray(x, dtype=float)
            )


    def matrix(self, x):
        '''
        K(x) as a 2x2 array, without domain or SPD checks
        '''
        if self.kind == 'identity':
            return np.eye(2)

        if self.kind == 'helical':
            h2 = self.pitch**2
            x1, x2 = x
            scale = 1/(h2 + x1**2 + x2**2)
            return scale*np.array([[h2 + x2**2, -x1*x2], [-x1*x2, h2 + x1**2]])

        return np.asarray(self.matrix_map(np.asarray(x, dtype=float)), dtype=float)


    def matrix_arrays(self, x1, x2):
        '''
        The entries (K11, K12, K22) evaluated at arrays of points
        '''
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)

        if self.kind == 'identity':
            return np.ones_like(x1), np.zeros_like(x1), np.ones_like(x1)

        if self.kind == 'helical':
            h2 = self.pitch**2
            scale = 1/(h2 + x1**2 + x2**2)
            return scale*(h2 + x2**2), -scale*x1*x2, scale*(h2 + x1**2)

        k11 = np.empty_like(x1)
        k12 = np.empty_like(x1)
        k22 = np.empty_like(x1)
        for ind in np.ndindex(x1.shape):
            K = self.matrix((x1[ind], x2[ind]))
            k11[ind], k12[ind], k22[ind] = K[0, 0], 0.5*(K[0, 1] + K[1, 0]), K[1, 1]
        return k11, k12, k22


    def matrix_derivatives(self, x):
        '''
        The array dK[a, i, j] = d K_ij / d x_a
        (analytic for the helical and identity kinds, central differences otherwise)
        '''
        x = utils.as_point(x)

        if self.kind == 'identity':
            return np.zeros((2, 2, 2))

        if self.kind == 'helical':
            h2 = self.pitch**2
            x1, x2 = x
            denom = h2 + x1**2 + x2**2
            numer = np.array([[h2 + x2**2, -x1*x2], [-x1*x2, h2 + x1**2]])
            dnumer = np.array([
                [[0, -x2], [-x2, 2*x1]],
                [[2*x2, -x1], [-x1, 0]],
            ])
            return np.stack([
                dnumer[a]/denom - numer*2*x[a]/denom**2 for a in range(2)
            ])

        step = FD_STEP*max(1.0, np.linalg.norm(x))
        derivatives = []
        for a in range(2):
            offset = np.zeros(2)
            offset[a] = step
            derivatives.append((self.matrix(x + offset) - self.matrix(x - offset))/(2*step))
        return np.stack(derivatives)


class WeightProfile(namedtuple('WeightProfile', ['alpha', 'beta', 'extra_betas'])):
    '''
    The radial weight q(x) = (alpha/2)|x|^2 + beta

    extra_betas holds the offsets of the other species in multi-species scenarios
    (all species share alpha)
    '''
    __slots__ = ()

    def __new__(cls, alpha, beta, extra_betas=()):
        return super().__new__(cls, float(alpha), float(beta), tuple(extra_betas))

    def q(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5*self.alpha*np.sum(x**2, axis=-1) + self.beta

    def q_arrays(self, x1, x2):
        return 0.5*self.alpha*(x1**2 + x2**2) + self.beta

    def species(self, ind):
        '''
        The profile of species ind (0 is this profile's own beta)
        '''
        betas = (self.beta,) + self.extra_betas
        return WeightProfile(self.alpha, betas[ind])


MetricValues = namedtuple('MetricValues', ['K', 'det', 'sqrt_det'])

WeightValues = namedtuple('WeightValues', ['q', 'weight', 'gradient', 'hessian'])

AssumptionReport = namedtuple('AssumptionReport', [
    'passed',
    'min_eigenvalue',
    'max_eigenvalue',
    'min_q',
    'weight_gradient_norm',
    'failures',
])


def eval_metric(field, x):
    '''
    K(x), det K(x) and sqrt(det K(x))

    Raises a DomainError outside the domain and a ValidationError
    if a custom field returns a matrix that is not symmetric positive definite
    '''
    x = utils.as_point(x)
    field.check_domain(x)
    K = field.matrix(x)

    if field.kind == 'custom':
        if K.shape != (2, 2):
            raise ValidationError('The custom matrix map returned shape %s' % (K.shape,))
        if not np.allclose(K, K.T, rtol=1e-12, atol=1e-14):
            raise ValidationError('The custom matrix at %s is not symmetric' % x, matrix=K)
        if np.linalg.eigvalsh(K).min() <= 0:
            raise ValidationError('The custom matrix at %s is not positive definite' % x, matrix=K)

    det = K[0, 0]*K[1, 1] - K[0, 1]*K[1, 0]
    return MetricValues(K=K, det=det, sqrt_det=np.sqrt(det))


def factor_T(field, y):
    '''
    The unique symmetric positive definite T with T^{-1} T^{-T} = K(y), that is, T = K(y)^{-1/2}
    '''
    K = eval_metric(field, y).K
    return inverse_sqrt(K)


def inverse_sqrt(K):
    eigenvalues, eigenvectors = np.linalg.eigh(0.5*(K + K.T))
    if eigenvalues.min() <= 1e-14*max(1.0, eigenvalues.max()):
        raise FactorizationError(
            'The coefficient matrix is singular (eigenvalues %s)' % eigenvalues, eigenvalues=eigenvalues
        )
    return (eigenvectors/np.sqrt(eigenvalues)) @ eigenvectors.T


def _helical_radial_weight(profile, h, r):
    '''
    f(r) = q(r)^2 g(r) with g = h/sqrt(h^2 + r^2), and its first two derivatives,
    plus f'(r)/r (which is smooth at r = 0)
    '''
    alpha, beta = profile.alpha, profile.beta
    q = 0.5*alpha*r**2 + beta
    dq = alpha*r
    d2q = alpha

    s = h**2 + r**2
    g = h/np.sqrt(s)
    dg_over_r = -h*s**-1.5
    dg = r*dg_over_r
    d2g = -h*s**-1.5 + 3*h*r**2*s**-2.5

    f = q**2*g
    df_over_r = 2*q*alpha*g + q**2*dg_over_r
    d2f = 2*(dq**2 + q*d2q)*g + 4*q*dq*dg + q**2*d2g
    return q, f, df_over_r, d2f


def eval_weight(profile, field, x, derivatives=False):
    '''
    q(x), the weight q^2 sqrt(det K) at x, and optionally its gradient and Hessian

    Parameters
    ----------
    profile : WeightProfile
    field : CoefficientField
    x : 2-vector
    derivatives : whether to compute the gradient and Hessian of q^2 sqrt(det K)
        (analytic for the helical kind, central finite differences otherwise)

    '''
    x = utils.as_point(x)
    field.check_domain(x)

    q = float(profile.q(x))
    if q <= 0:
        raise AssumptionError('The weight q is not positive at %s (q = %s)' % (x, q), point=x, q=q)

    def weight(point):
        return float(profile.q(point))**2*np.sqrt(np.linalg.det(field.matrix(point)))

    if field.kind == 'helical':
        r = np.linalg.norm(x)
        _, value, df_over_r, d2f = _helical_radial_weight(profile, field.pitch, r)
        if not derivatives:
            return WeightValues(q=q, weight=value, gradient=None, hessian=None)

        gradient = df_over_r*x
        if r > 0:
            unit = x/r
            hessian = df_over_r*np.eye(2) + (d2f - df_over_r)*np.outer(unit, unit)
        else:
            hessian = d2f*np.eye(2)
        return WeightValues(q=q, weight=value, gradient=gradient, hessian=hessian)

    value = weight(x)
    if not derivatives:
        return WeightValues(q=q, weight=value, gradient=None, hessian=None)

    step = FD_STEP*max(1.0, np.linalg.norm(x))
    gradient = np.zeros(2)
    for a in range(2):
        offset = np.zeros(2)
        offset[a] = step
        gradient[a] = (weight(x + offset) - weight(x - offset))/(2*step)

    step = HESSIAN_FD_STEP*max(1.0, np.linalg.norm(x))
    hessian = np.zeros((2, 2))
    for a in range(2):
        for b in range(a, 2):
            ea = np.zeros(2)
            eb = np.zeros(2)
            ea[a] = step
            eb[b] = step
            if a == b:
                hessian[a, a] = (weight(x + ea) - 2*value + weight(x - ea))/step**2
            else:
                hessian[a, b] = (
                    weight(x + ea + eb) - weight(x + ea - eb) - weight(x - ea + eb) + weight(x - ea - eb)
                )/(4*step**2)
                hessian[b, a] = hessian[a, b]
    return WeightValues(q=q, weight=value, gradient=gradient, hessian=hessian)


def sample_points(half_width, sample_count):
    '''
    Deterministic quasi-random points covering the square domain,
    plus the origin, the corners and the edge midpoints
    '''
    unit = qmc.Halton(d=2, scramble=False).random(sample_count)
    points = half_width*(2*unit - 1)
    extras = half_width*np.array([
        [0, 0], [1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [1, -1], [-1, 1], [-1, -1]
    ])
    return np.vstack([points, extras])


def validate_assumptions(field, profile, sample_count=10000):
    '''
    Check the ellipticity, positivity and critical-point assumptions by sampling

    Returns an AssumptionReport; nothing is raised
    '''
    points = sample_points(field.half_width, sample_count)
    failures = []

    k11, k12, k22 = field.matrix_arrays(points[:, 0], points[:, 1])
    matrices = np.stack([np.stack([k11, k12], -1), np.stack([k12, k22], -1)], -2)
    eigenvalues = np.linalg.eigvalsh(matrices)
    min_eigenvalue = float(eigenvalues.min())
    max_eigenvalue = float(eigenvalues.max())

    if min_eigenvalue <= 0:
        failures.append('K1: coefficient matrix is not positive definite (min eigenvalue %s)'
                        % min_eigenvalue)
    if field.eigenvalue_bounds is not None:
        lower, upper = field.eigenvalue_bounds
        if min_eigenvalue < lower or max_eigenvalue > upper:
            failures.append('K1: sampled eigenvalues [%s, %s] leave the bounds [%s, %s]'
                            % (min_eigenvalue, max_eigenvalue, lower, upper))

    q_values = profile.q(points)
    min_q = float(q_values.min())
    if min_q <= 0:
        worst = points[np.argmin(q_values)]
        failures.append('Q1: q is not positive (q = %s at %s)' % (min_q, worst))

    weight_gradient_norm = None
    if profile.beta > 0:
        values = eval_weight(profile, field, np.zeros(2), derivatives=True)
        weight_gradient_norm = float(np.linalg.norm(values.gradient))
        if weight_gradient_norm > 1e-10:
            failures.append('KQ: |grad(q^2 sqrt(det K))(0)| = %s' % weight_gradient_norm)
    else:
        failures.append('Q1: q(0) = %s is not positive' % profile.beta)

    return AssumptionReport(
        passed=len(failures) == 0,
        min_eigenvalue=min_eigenvalue,
        max_eigenvalue=max_eigenvalue,
        min_q=min_q,
        weight_gradient_norm=weight_gradient_norm,
        failures=failures,
    )
