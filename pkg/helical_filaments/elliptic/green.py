'''
The discrete Green's function of -div(K grad .) with zero Dirichlet data, its regular part

    S(x, y) = G(x, y) - Gamma(T_y (x - y))/sqrt(det K(y)),   Gamma(z) = -ln|z|/(2 pi),

the Robin value S(y, y), and the two correctors F1, F2 that remove the r ln r part of S
so that S + F1 + F2 is continuously differentiable at y.

'''

from collections import namedtuple

import numpy as np
import pandas as pd

from helical_filaments import coeff_field, utils
from helical_filaments.elliptic.grid import ScalarField
from helical_filaments.elliptic.operator import DiscreteOperator
from helical_filaments.errors import SingularityError, ValidationError

# the Robin value is extrapolated from the nodes in this annulus (in grid spacings)
ROBIN_RING = (3, 6)

DEFAULT_RING_SPACINGS = (16, 8, 4, 2)


GreenResult = namedtuple('GreenResult', ['G', 'S', 'robin', 'source_index', 'source'])

GreenData = namedtuple('GreenData', ['robin_values', 'green_values', 'results'])


def fundamental_solution(z):
    return -np.log(np.linalg.norm(z, axis=-1))/(2*np.pi)


def singular_part(grid, field, y):
    '''
    Gamma(T_y (x - y))/sqrt(det K(y)) at every node (inf at y itself)
    '''
    y = utils.as_point(y)
    T = coeff_field.factor_T(field, y)
    sqrt_det = coeff_field.eval_metric(field, y).sqrt_det
    x1, x2 = grid.mesh()
    z = np.stack([x1 - y[0], x2 - y[1]], axis=-1) @ T.T
    with np.errstate(divide='ignore'):
        return fundamental_solution(z)/sqrt_det


def robin_extrapolation(grid, values, y, ring=ROBIN_RING):
    '''
    The constant term of a least-squares biquadratic fit to the values on the ring
    ring[0] <= |x - y|/spacing <= ring[1]
    '''
    y = utils.as_point(y)
    x1, x2 = grid.mesh()
    distance = grid.distances(y)/grid.spacing
    on_ring = (distance >= ring[0]) & (distance <= ring[1]) & np.isfinite(values)

    dx = (x1[on_ring] - y[0])/grid.spacing
    dy = (x2[on_ring] - y[1])/grid.spacing
    basis = np.stack([
        np.ones_like(dx), dx, dy, dx**2, dx*dy, dy**2, dx**2*dy, dx*dy**2, dx**2*dy**2
    ], axis=1)
    coefs, *_ = np.linalg.lstsq(basis, values[on_ring], rcond=None)
    return float(coefs[0])


def green_function(grid, field, y, operator=None, event_logger=None):
    '''
    The discrete Green's function with pole at the node nearest to y

    The Dirac mass is a unit load on that node scaled by 1/spacing^2. The regular part S
    is G minus the frozen-coefficient fundamental solution; at the pole it is set to
    the Robin value extrapolated from the surrounding ring.

    Returns a GreenResult (G, S, robin, source_index, source)
    '''
    event_logger = event_logger or utils.null_logger
    grid.check_placement(y)
    if operator is None:
        operator = DiscreteOperator(grid, field)

    source_index = grid.nearest_node(y)
    source = grid.node_position(source_index)

    rhs = np.zeros(grid.shape)
    rhs[source_index] = 1/grid.cell_area
    G = operator.solve(rhs)

    S = G - singular_part(grid, field, source)
    S[source_index] = np.nan
    robin = robin_extrapolation(grid, S, source)
    S[source_index] = robin

    event_logger('GREEN INFO: pole at %s, Robin value %s' % (source, robin))
    return GreenResult(
        G=ScalarField(grid, G, name='G(., y)'),
        S=ScalarField(grid, S, name='S(., y)'),
        robin=robin,
        source_index=source_index,
        source=source,
    )


def _corrector_kernels(z):
    '''
    k[a, b, c] evaluated at z (shape (..., 2)), stacked as an array of shape (2, 2, 2, ...)
    '''
    z1, z2 = z[..., 0], z[..., 1]
    norm_sq = z1**2 + z2**2
    log_norm = 0.5*np.log(norm_sq)

    k = np.empty((2, 2, 2) + z1.shape)
    k[0, 0, 0] = -z1**3/(8*norm_sq) + z1*log_norm/8
    k[0, 0, 1] = -z1**2*z2/(8*norm_sq) + z2*log_norm/8
    k[0, 1, 0] = k[0, 0, 1]
    k[0, 1, 1] = -z1*z2**2/(8*norm_sq) - z1*log_norm/8
    k[1, 0, 0] = -z1**2*z2/(8*norm_sq) - z2*log_norm/8
    k[1, 0, 1] = -z1*z2**2/(8*norm_sq) + z1*log_norm/8
    k[1, 1, 0] = k[1, 0, 1]
    k[1, 1, 1] = -z2**3/(8*norm_sq) + z2*log_norm/8
    return k


def eval_correctors(field, y, x):
    '''
    The correctors F1 and F2 with pole y at the points x (a 2-vector or an (..., 2) array)

        F1 = -(1/4pi) sqrt(det K(y))^{-1} sum_{i,j,m} T_mj dK_ij/dx_i(y) z_m ln|z|
        F2 = (1/pi) sqrt(det K(y))^{-1} sum_{i,j,alpha} dK_ij/dx_alpha(y)
                 sum_{a,b,c} Tinv_{alpha a} T_bj T_ci k_abc(z)

    with z = T_y (x - y)
    '''
    y = utils.as_point(y)
    x = np.asarray(x, dtype=float)
    T = coeff_field.factor_T(field, y)
    T_inv = np.linalg.inv(T)
    sqrt_det = coeff_field.eval_metric(field, y).sqrt_det
    dK = field.matrix_derivatives(y)

    z = (x - y) @ T.T
    if np.any(np.linalg.norm(z, axis=-1) == 0):
        raise SingularityError('The correctors are singular at the pole %s' % y, pole=y)

    log_norm = np.log(np.linalg.norm(z, axis=-1))

    # v_m = sum_{i,j} T_mj dK[i, i, j]
    v = np.einsum('mj,iij->m', T, dK)
    F1 = -(z @ v)*log_norm/(4*np.pi*sqrt_det)

    # C_abc = sum_{alpha,i,j} dK[alpha, i, j] Tinv[alpha, a] T[b, j] T[c, i]
    C = np.einsum('xij,xa,bj,ci->abc', dK, T_inv, T, T)
    F2 = np.einsum('abc,abc...->...', C, _corrector_kernels(z))/(np.pi*sqrt_det)
    return F1, F2


def corrector_field(grid, field, y):
    '''
    F1 + F2 at every node (zero at the pole, where both vanish continuously)
    '''
    y = utils.as_point(y)
    x1, x2 = grid.mesh()
    points = np.stack([x1, x2], axis=-1)
    at_pole = grid.distances(y) == 0
    points[at_pole] = y + grid.spacing

    F1, F2 = eval_correctors(field, y, points)
    total = F1 + F2
    total[at_pole] = 0.0
    return total


def probe_corrector_smoothness(grid, field, y, ring_spacings=DEFAULT_RING_SPACINGS,
                               green=None, operator=None):
    '''
    Max gradient norms of S and of S + F1 + F2 on rings around the pole

    The gradients are centered differences on the grid, and ring k collects the nodes
    whose distance from the pole is within half a spacing of k spacings.

    Returns a DataFrame with columns (ring_spacings, radius, grad_S, grad_corrected)
    ordered from the largest ring to the smallest
    '''
    if green is None:
        green = green_function(grid, field, y, operator=operator)
    pole = green.source

    S = np.array(green.S.values)
    corrected = S + corrector_field(grid, field, pole)

    def gradient_norm(values):
        d1, d2 = np.gradient(values, grid.spacing)
        return np.hypot(d1, d2)

    grad_S = gradient_norm(S)
    grad_corrected = gradient_norm(corrected)
    distance = grid.distances(pole)/grid.spacing

    rows = []
    for k in sorted(ring_spacings, reverse=True):
        on_ring = np.abs(distance - k) <= 0.5
        if not np.any(on_ring):
            raise ValidationError('No grid nodes on the ring of %s spacings' % k)
        rows.append({
            'ring_spacings': k,
            'radius': k*grid.spacing,
            'grad_S': float(np.max(grad_S[on_ring])),
            'grad_corrected': float(np.max(grad_corrected[on_ring])),
        })
    return pd.DataFrame(rows)


def green_data_at_centers(grid, field, centers, operator=None, event_logger=None):
    '''
    Robin values S(z_i, z_i) and the symmetrized matrix G(z_i, z_j) (zero diagonal)
    for centers that lie on grid nodes
    '''
    if operator is None:
        operator = DiscreteOperator(grid, field)
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)

    results = [green_function(grid, field, center, operator=operator, event_logger=event_logger)
               for center in centers]
    indices = [result.source_index for result in results]
    if len(set(indices)) < len(indices):
        raise SingularityError('Two centers share the grid node nearest to them', centers=centers)

    num = len(centers)
    green_values = np.zeros((num, num))
    for i in range(num):
        for j in range(num):
            if i != j:
                green_values[i, j] = results[j].G.values[indices[i]]
    green_values = 0.5*(green_values + green_values.T)

    robin_values = np.array([result.robin for result in results])
    return GreenData(robin_values=robin_values, green_values=green_values, results=results)
