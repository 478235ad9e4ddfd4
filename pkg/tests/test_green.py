import numpy as np
import pytest
from scipy.special import gamma

from helical_filaments.coeff_field import CoefficientField
from helical_filaments.elliptic import green
from helical_filaments.elliptic.grid import Grid
from helical_filaments.elliptic.operator import DiscreteOperator
from helical_filaments.errors import PlacementError, SingularityError

# the Robin value of the Laplacian at the center of the square [-1, 1]^2
# is ln(conformal radius)/(2 pi), with conformal radius Gamma(1/4)^2/(2 pi^{3/2})
SQUARE_CENTER_ROBIN = np.log(gamma(0.25)**2/(2*np.pi**1.5))/(2*np.pi)

SOURCE = (0.25, -0.5)
PROBES = np.array([[-0.5, 0.25], [0.5, 0.5], [0.0, 0.0], [-0.25, -0.75]])


def series_green(x, y, num_terms=400):
    '''
    Green's function of the Laplacian on [-1, 1]^2 with zero Dirichlet data,
    summed over sine modes in x1 with the exact 1D resolvent in x2 (requires x2 != y2)
    '''
    s1, t1 = x[0] + 1, y[0] + 1
    s2, t2 = x[1] + 1, y[1] + 1
    lower, upper = min(s2, t2), max(s2, t2)
    total = 0.0
    for m in range(1, num_terms + 1):
        k = m*np.pi/2
        # sinh(k a) sinh(k b)/(k sinh(2k)) with a = lower, b = 2 - upper, written stably
        a, b = lower, 2 - upper
        resolvent = (
            np.exp(k*(a + b - 2))*(1 - np.exp(-2*k*a))*(1 - np.exp(-2*k*b))
            / (2*k*(1 - np.exp(-4*k)))
        )
        total += np.sin(k*s1)*np.sin(k*t1)*resolvent
    return total


def oracle_error(num_points):
    grid = Grid(1.0, num_points)
    result = green.green_function(grid, CoefficientField('identity'), SOURCE)
    errors = [
        abs(result.G.values[grid.nearest_node(x)] - series_green(x, SOURCE)) for x in PROBES
    ]
    return max(errors)


def symmetry_defect(num_points):
    grid = Grid(1.0, num_points)
    field = CoefficientField('helical', pitch=1.0)
    operator = DiscreteOperator(grid, field)
    a, b = np.array(SOURCE), np.array([-0.5, 0.25])
    G_a = green.green_function(grid, field, a, operator=operator).G.values
    G_b = green.green_function(grid, field, b, operator=operator).G.values
    return abs(G_a[grid.nearest_node(b)] - G_b[grid.nearest_node(a)])


def test_series_oracle_is_converged():
    x, y = np.array([0.3, 0.2]), np.array([-0.1, -0.4])
    assert series_green(x, y, 400) == pytest.approx(series_green(x, y, 800), abs=1e-12)
    assert series_green(x, y) == pytest.approx(series_green(y, x), abs=1e-12)


def test_green_matches_series_oracle():
    assert oracle_error(65) <= 2e-3


@pytest.mark.slow
def test_green_oracle_refinement():
    coarse, fine = oracle_error(129), oracle_error(257)
    assert fine <= 1e-4
    assert 3.2 <= coarse/fine <= 4.8


def test_green_is_symmetric_on_nodes():
    assert symmetry_defect(65) <= 1e-6


def test_robin_value_at_the_center_of_the_square():
    grid = Grid(1.0, 65)
    result = green.green_function(grid, CoefficientField('identity'), (0, 0))
    assert result.robin == pytest.approx(SQUARE_CENTER_ROBIN, abs=3e-3)
    assert result.S.values[result.source_index] == result.robin


@pytest.mark.slow
def test_robin_value_is_stable_under_refinement():
    field = CoefficientField('identity')
    robins = [green.green_function(Grid(1.0, n), field, (0, 0)).robin for n in (129, 257)]
    assert robins[1] == pytest.approx(robins[0], rel=1e-3)


def test_helical_regular_part_at_the_origin():
    grid = Grid(1.0, 65)
    result = green.green_function(grid, CoefficientField('helical', pitch=1.0), (0, 0))
    S = result.S.values
    assert np.all(np.isfinite(S))
    i, j = result.source_index
    # the extrapolated value joins its neighbors without a jump
    neighbors = S[i - 1:i + 2, j - 1:j + 2]
    assert np.ptp(neighbors) <= 5e-2


def test_source_near_the_boundary():
    with pytest.raises(PlacementError):
        green.green_function(Grid(1.0, 33), CoefficientField('identity'), (0.95, 0))


def test_correctors_vanish_for_the_identity_field():
    F1, F2 = green.eval_correctors(CoefficientField('identity'), (0.2, 0.1), [[0.5, 0.3], [-0.1, 0]])
    assert not np.any(F1) and not np.any(F2)


def test_correctors_vanish_at_the_helical_origin():
    points = np.random.default_rng(0).uniform(-0.5, 0.5, size=(20, 2))
    F1, F2 = green.eval_correctors(CoefficientField('helical', pitch=1.0), (0, 0), points)
    assert np.max(np.abs(F1)) <= 1e-15 and np.max(np.abs(F2)) <= 1e-15


def test_correctors_are_odd_about_the_pole():
    field = CoefficientField('helical', pitch=1.0)
    y = np.array([0.4, -0.1])
    offsets = np.random.default_rng(1).uniform(-0.2, 0.2, size=(10, 2))
    plus = green.eval_correctors(field, y, y + offsets)
    minus = green.eval_correctors(field, y, y - offsets)
    np.testing.assert_allclose(plus[0], -minus[0], atol=1e-14)
    np.testing.assert_allclose(plus[1], -minus[1], atol=1e-14)
    assert np.max(np.abs(plus[0])) > 0 and np.max(np.abs(plus[1])) > 0


def test_correctors_at_the_pole():
    with pytest.raises(SingularityError):
        green.eval_correctors(CoefficientField('helical'), (0.4, 0), (0.4, 0))


def test_corrector_field_is_zero_at_the_pole():
    grid = Grid(1.0, 33)
    values = green.corrector_field(grid, CoefficientField('helical', pitch=1.0), (0.5, 0))
    assert values[grid.nearest_node((0.5, 0))] == 0
    assert np.all(np.isfinite(values))


def test_corrector_smoothness_probe():
    probe = green.probe_corrector_smoothness(
        Grid(1.0, 129), CoefficientField('helical', pitch=1.0), (0.4, 0), ring_spacings=(16, 8, 4)
    )
    assert list(probe.columns) == ['ring_spacings', 'radius', 'grad_S', 'grad_corrected']
    assert list(probe.ring_spacings) == [16, 8, 4]
    ratios = probe.grad_corrected.values[1:]/probe.grad_corrected.values[:-1]
    assert np.all(ratios < 2)


@pytest.mark.slow
def test_corrector_smoothness_over_three_halvings():
    probe = green.probe_corrector_smoothness(
        Grid(1.0, 257), CoefficientField('helical', pitch=1.0), (0.4, 0),
        ring_spacings=(32, 16, 8, 4)
    )
    ratios = probe.grad_corrected.values[1:]/probe.grad_corrected.values[:-1]
    assert np.all(ratios < 2)
    assert probe.grad_S.values[-1] > probe.grad_S.values[0]


def test_green_data_at_centers():
    grid = Grid(1.0, 65)
    field = CoefficientField('helical', pitch=1.0)
    centers = [(0.25, 0), (-0.25, 0)]
    data = green.green_data_at_centers(grid, field, centers)
    assert data.green_values.shape == (2, 2)
    assert data.green_values[0, 0] == 0
    assert data.green_values[0, 1] == data.green_values[1, 0]
    assert data.green_values[0, 1] > 0
    # mirror symmetry of the helical field about the x2 axis
    assert data.robin_values[0] == pytest.approx(data.robin_values[1], rel=1e-6)


def test_green_data_with_coincident_centers():
    with pytest.raises(SingularityError):
        green.green_data_at_centers(
            Grid(1.0, 33), CoefficientField('identity'), [(0.1, 0.1), (0.11, 0.1)]
        )
