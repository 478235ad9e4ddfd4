'''
The flux-form discretization of -div(K grad u) with zero Dirichlet data on the square

Row (i, j) of the assembled operator is

    -[K11(i+1/2, j)(u(i+1, j) - u(i, j)) - K11(i-1/2, j)(u(i, j) - u(i-1, j))
      + K22(i, j+1/2)(u(i, j+1) - u(i, j)) - K22(i, j-1/2)(u(i, j) - u(i, j-1))]/h^2
    - [d1(K12 d2 u) + d2(K12 d1 u)]

with half-point coefficients by arithmetic averaging and the mixed terms by centered
differences of the nodal K12. The resulting matrix is symmetric.

'''

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from helical_filaments import coeff_field
from helical_filaments.errors import DomainError, SolverError

DEFAULT_RTOL = 1e-10


def _node_coefficients(grid, field=None, constant_matrix=None):
    x1, x2 = grid.mesh()
    if constant_matrix is not None:
        K = np.asarray(constant_matrix, dtype=float)
        k12 = 0.5*(K[0, 1] + K[1, 0])
        return np.full(grid.shape, K[0, 0]), np.full(grid.shape, k12), np.full(grid.shape, K[1, 1])

    if grid.half_width > field.half_width*(1 + 1e-12):
        raise DomainError(
            'The grid half width %s exceeds the coefficient domain %s'
            % (grid.half_width, field.half_width)
        )
    return field.matrix_arrays(x1, x2)


def assemble_matrix(grid, field=None, constant_matrix=None):
    '''
    The n^2 x n^2 operator matrix with rows only for interior nodes (boundary rows are empty)

    Either a CoefficientField or a constant 2x2 matrix must be given
    '''
    if field is None and constant_matrix is None:
        raise ValueError('Either a coefficient field or a constant matrix is required')

    k11, k12, k22 = _node_coefficients(grid, field, constant_matrix)
    n = grid.num_points
    h2 = grid.spacing**2
    index = np.arange(n*n).reshape(n, n)

    # interior slices: center, and shifted by one node in each direction
    c = (slice(1, -1), slice(1, -1))
    e = (slice(2, None), slice(1, -1))
    w = (slice(None, -2), slice(1, -1))
    nth = (slice(1, -1), slice(2, None))
    s = (slice(1, -1), slice(None, -2))
    ne = (slice(2, None), slice(2, None))
    nw = (slice(None, -2), slice(2, None))
    se = (slice(2, None), slice(None, -2))
    sw = (slice(None, -2), slice(None, -2))

    k11_east = 0.5*(k11[c] + k11[e])
    k11_west = 0.5*(k11[c] + k11[w])
    k22_north = 0.5*(k22[c] + k22[nth])
    k22_south = 0.5*(k22[c] + k22[s])

    stencil = [
        (c, (k11_east + k11_west + k22_north + k22_south)/h2),
        (e, -k11_east/h2),
        (w, -k11_west/h2),
        (nth, -k22_north/h2),
        (s, -k22_south/h2),
        (ne, -(k12[e] + k12[nth])/(4*h2)),
        (sw, -(k12[w] + k12[s])/(4*h2)),
        (se, (k12[e] + k12[s])/(4*h2)),
        (nw, (k12[w] + k12[nth])/(4*h2)),
    ]

    rows = np.concatenate([index[c].ravel()]*len(stencil))
    cols = np.concatenate([index[offset].ravel() for offset, _ in stencil])
    vals = np.concatenate([values.ravel() for _, values in stencil])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n*n, n*n)).tocsr()


class DiscreteOperator:

    def __init__(self, grid, field=None, constant_matrix=None, method='cg', rtol=DEFAULT_RTOL,
                 max_iterations=None):
        '''
        The assembled operator split into interior and boundary blocks, with linear solves

        method : 'cg' (Jacobi-preconditioned conjugate gradient) or 'direct' (cached sparse LU)
        '''
        if method not in ('cg', 'direct'):
            raise ValueError("Unknown linear solver method '%s'" % method)

        self.grid = grid
        self.field = field
        self.method = method
        self.rtol = rtol
        self.max_iterations = max_iterations

        matrix = assemble_matrix(grid, field=field, constant_matrix=constant_matrix)
        flat_interior = grid.interior_mask.ravel()
        self.interior = np.flatnonzero(flat_interior)
        self.boundary = np.flatnonzero(~flat_interior)

        rows = matrix[self.interior]
        self.A_II = rows[:, self.interior].tocsr()
        self.A_IB = rows[:, self.boundary].tocsr()
        self._lu = None


    @property
    def size(self):
        return len(self.interior)


    def symmetry_defect(self):
        '''
        max |A_II - A_II^T| relative to max |A_II|
        '''
        difference = abs(self.A_II - self.A_II.T)
        defect = difference.max() if difference.nnz else 0.0
        return float(defect/abs(self.A_II).max())


    def apply(self, values):
        '''
        The interior values of A u for a full n x n array u
        '''
        flat = np.asarray(values, dtype=float).ravel()
        return self.A_II @ flat[self.interior] + self.A_IB @ flat[self.boundary]


    def factorization(self):
        if self._lu is None:
            self._lu = spla.splu(self.A_II.tocsc())
        return self._lu


    def solve_interior(self, rhs, x0=None):
        '''
        Solve A_II x = rhs
        '''
        rhs = np.asarray(rhs, dtype=float)
        if not np.any(rhs):
            return np.zeros_like(rhs)

        if self.method == 'direct':
            solution = self.factorization().solve(rhs)
            if not np.all(np.isfinite(solution)):
                raise SolverError('The direct solve returned non-finite values')
            return solution

        diagonal = self.A_II.diagonal()
        preconditioner = spla.LinearOperator(
            self.A_II.shape, matvec=lambda x: x/diagonal, dtype=float
        )
        solution, info = spla.cg(
            self.A_II, rhs, x0=x0, rtol=self.rtol, atol=0.0,
            maxiter=self.max_iterations, M=preconditioner
        )
        if info != 0:
            residual = np.linalg.norm(rhs - self.A_II @ solution)/np.linalg.norm(rhs)
            raise SolverError(
                'Conjugate gradient did not converge (info %s, relative residual %s)' % (info, residual),
                info=info, residual=residual
            )
        return solution


    def solve(self, rhs, boundary_values=None):
        '''
        The full n x n solution of A u = rhs in the interior with u = boundary_values on the boundary

        rhs : interior values (length A_II.shape[0]) or a full n x n array
        boundary_values : full n x n array whose boundary entries are used (default zero)
        '''
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape == self.grid.shape:
            rhs = rhs.ravel()[self.interior]

        solution = np.zeros(self.grid.num_points**2)
        if boundary_values is not None:
            boundary = np.asarray(boundary_values, dtype=float).ravel()[self.boundary]
            solution[self.boundary] = boundary
            rhs = rhs - self.A_IB @ boundary

        solution[self.interior] = self.solve_interior(rhs)
        return solution.reshape(self.grid.shape)


def frozen_operator(grid, field, point, **kwargs):
    '''
    The operator with the coefficients frozen at K(point)
    '''
    K = coeff_field.eval_metric(field, point).K
    return DiscreteOperator(grid, constant_matrix=K, **kwargs)
