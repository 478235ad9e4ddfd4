'''
Uniform square grids, scalar fields on them, and the two field export formats

Binary grid dump layout (little-endian): int64 n, float64 R, then the n*n values
as float64 in row-major order (values[i, j] with i along x1 and j along x2).

'''

import numpy as np
import pandas as pd
from scipy import interpolate

from helical_filaments import utils
from helical_filaments.errors import DomainError, PlacementError

HEADER_DTYPE = np.dtype([('n', '<i8'), ('half_width', '<f8')])

# the smallest grid the solvers accept
MIN_NUM_POINTS = 9


class Grid:

    def __init__(self, half_width, num_points):
        '''
        The nodes x_i = -R + i*spacing, i = 0, ..., n - 1, in both axes

        half_width : R
        num_points : n (the boundary nodes are included)
        '''
        if half_width <= 0:
            raise ValueError('The half width must be positive')
        if num_points < MIN_NUM_POINTS:
            raise ValueError('The grid needs at least %d points per axis' % MIN_NUM_POINTS)

        self.half_width = float(half_width)
        self.num_points = int(num_points)
        self.spacing = 2*self.half_width/(self.num_points - 1)
        self.coords = np.linspace(-self.half_width, self.half_width, self.num_points)


    def __repr__(self):
        return 'Grid(half_width=%s, num_points=%s)' % (self.half_width, self.num_points)


    @property
    def shape(self):
        return (self.num_points, self.num_points)

    @property
    def cell_area(self):
        return self.spacing**2

    def mesh(self):
        return np.meshgrid(self.coords, self.coords, indexing='ij')

    @property
    def boundary_mask(self):
        mask = np.zeros(self.shape, dtype=bool)
        mask[[0, -1], :] = True
        mask[:, [0, -1]] = True
        return mask

    @property
    def interior_mask(self):
        return ~self.boundary_mask

    def node_position(self, index):
        i, j = index
        return np.array([self.coords[i], self.coords[j]])

    def nearest_node(self, y):
        '''
        The index (i, j) of the node nearest to y
        '''
        y = utils.as_point(y)
        if np.any(np.abs(y) > self.half_width):
            raise DomainError('The point %s lies outside the grid' % y, point=y)
        index = np.rint((y + self.half_width)/self.spacing).astype(int)
        return tuple(int(ind) for ind in np.clip(index, 0, self.num_points - 1))

    def check_placement(self, y, min_spacings=4):
        '''
        Raise PlacementError unless y is at least min_spacings nodes away from the boundary
        '''
        y = utils.as_point(y)
        distance = self.half_width - np.max(np.abs(y))
        if distance < min_spacings*self.spacing:
            raise PlacementError(
                'The point %s is within %s spacings of the boundary' % (y, min_spacings),
                point=y, distance=distance, spacing=self.spacing
            )

    def distances(self, y):
        '''
        |x - y| at every node
        '''
        y = utils.as_point(y)
        x1, x2 = self.mesh()
        return np.hypot(x1 - y[0], x2 - y[1])


class ScalarField:

    def __init__(self, grid, values, name=''):
        '''
        A read-only n x n array of nodal values on a grid

        name : what the field represents (e.g. 'u', 'G(., y)')
        '''
        values = np.array(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError('Expected values of shape %s but got %s' % (grid.shape, values.shape))
        values.flags.writeable = False
        self.grid = grid
        self.values = values
        self.name = name


    def __repr__(self):
        return 'ScalarField(%r, name=%r)' % (self.grid, self.name)


    def interpolator(self):
        return interpolate.RegularGridInterpolator(
            (self.grid.coords, self.grid.coords), self.values, method='linear'
        )

    def interpolate(self, points):
        '''
        Bilinear interpolation at an (m, 2) array of points inside the grid
        '''
        points = np.asarray(points, dtype=float).reshape(-1, 2)
        if np.any(np.abs(points) > self.grid.half_width*(1 + 1e-12)):
            raise DomainError('Interpolation points outside the grid', points=points)
        points = np.clip(points, -self.grid.half_width, self.grid.half_width)
        return self.interpolator()(points)

    def to_dataframe(self):
        '''
        Long-form table with columns (i, j, x, y, value)
        '''
        n = self.grid.num_points
        i, j = np.meshgrid(np.arange(n), np.arange(n), indexing='ij')
        x1, x2 = self.grid.mesh()
        return pd.DataFrame({
            'i': i.ravel(),
            'j': j.ravel(),
            'x': x1.ravel(),
            'y': x2.ravel(),
            'value': self.values.ravel(),
        })


def write_csv(field, filepath):
    field.to_dataframe().to_csv(filepath, index=False, float_format=utils.FLOAT_FORMAT)


def write_binary_grid(field, filepath):
    header = np.array([(field.grid.num_points, field.grid.half_width)], dtype=HEADER_DTYPE)
    with open(filepath, 'wb') as file:
        file.write(header.tobytes())
        file.write(np.ascontiguousarray(field.values, dtype='<f8').tobytes())


def read_binary_grid(filepath, name=''):
    with open(filepath, 'rb') as file:
        header = np.frombuffer(file.read(HEADER_DTYPE.itemsize), dtype=HEADER_DTYPE)[0]
        n = int(header['n'])
        values = np.frombuffer(file.read(8*n*n), dtype='<f8')
    if values.size != n*n:
        raise ValueError('Truncated grid dump %s' % filepath)
    grid = Grid(float(header['half_width']), n)
    return ScalarField(grid, values.reshape(n, n), name=name)
