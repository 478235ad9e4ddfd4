import numpy as np
import pytest

from helical_filaments import reduced_energy
from helical_filaments.coeff_field import CoefficientField, WeightProfile
from helical_filaments.errors import ConvergenceError, DomainError, SingularityError, ValidationError
from helical_filaments.filaments import helical_equilibria as he
from helical_filaments.reduced_energy import ExpansionInputs, ReducedEnergyContext


def simple_context(n=2):
    return ReducedEnergyContext(
        hessian_at_origin=-np.eye(2), interaction_weight=1.0, whitening=np.eye(2), n=n
    )


def central_difference(function, x, step=1e-6):
    x = np.asarray(x, dtype=float)
    gradient = np.zeros_like(x)
    for ind in np.ndindex(x.shape):
        offset = np.zeros_like(x)
        offset[ind] = step
        gradient[ind] = (function(x + offset) - function(x - offset))/(2*step)
    return gradient


def landscape_families():
    families = {
        1: he.make_family('polygon', n=3, kappa=2.0, radius=0.8),
        2: he.make_family('polygon_plus_center', n=4, kappa=1.5, mu=0.7, radius=1.1),
        3: he.complete_family(
            he.make_family('asym2', pitch=1.2, kappa1=1.0, kappa2=None, lambda1=0.6, lambda2=0.9)
        ),
        4: he.complete_family(
            he.make_family('two_by_two', kappa=1.0, mu=1.4, lambda1=0.8, lambda2=None),
            initial_guess=0.8
        ),
        5: he.complete_family(
            he.make_family('two_by_two_plus_center', kappa0=0.5, kappa=1.0, mu=1.4,
                           lambda1=0.8, lambda2=None),
            initial_guess=0.8
        ),
    }
    return families


def test_h_n_two_point_value():
    ctx = simple_context()
    r = 0.6
    value, gradient = reduced_energy.h_n_eval(ctx, [(r, 0), (-r, 0)])
    assert value == pytest.approx(-r**2 + 2*np.log(2*r), rel=1e-14)


def test_h_n_critical_radius():
    _, gradient = reduced_energy.h_n_eval(simple_context(), [(1, 0), (-1, 0)])
    assert np.max(np.abs(gradient)) <= 1e-14


def test_h_n_translation_invariance():
    ctx = simple_context(n=3)._replace(hessian_at_origin=np.zeros((2, 2)))
    positions = np.array([[0.1, 0.2], [-0.4, 0.3], [0.5, -0.6]])
    value, _ = reduced_energy.h_n_eval(ctx, positions)
    shifted, _ = reduced_energy.h_n_eval(ctx, positions + np.array([0.7, -0.2]))
    assert shifted == pytest.approx(value, rel=1e-13)


def test_h_n_coincident_positions():
    with pytest.raises(SingularityError):
        reduced_energy.h_n_eval(simple_context(), [(0.3, 0.1), (0.3, 0.1)])


def test_h_n_gradient_matches_finite_differences():
    ctx = ReducedEnergyContext(
        hessian_at_origin=np.array([[-2.0, 0.3], [0.3, -1.0]]),
        interaction_weight=0.8,
        whitening=np.array([[1.2, 0.1], [0.1, 0.9]]),
        n=3,
    )
    rng = np.random.default_rng(2)
    for _ in range(50):
        positions = rng.uniform(-1, 1, size=(3, 2))
        _, gradient = reduced_energy.h_n_eval(ctx, positions)
        expected = central_difference(lambda z: reduced_energy.h_n_eval(ctx, z)[0], positions)
        assert np.allclose(gradient, expected, rtol=1e-6, atol=1e-6*np.max(np.abs(expected)))


def test_h_n_rotation_invariance():
    ctx = ReducedEnergyContext(
        hessian_at_origin=-1.5*np.eye(2), interaction_weight=0.7, whitening=2*np.eye(2), n=4
    )
    positions = np.random.default_rng(4).uniform(-1, 1, size=(4, 2))
    angle = 0.83
    rotation = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    value, _ = reduced_energy.h_n_eval(ctx, positions)
    rotated, _ = reduced_energy.h_n_eval(ctx, positions @ rotation.T)
    assert abs(rotated - value) <= 1e-12*max(1, abs(value))


def test_context_from_helical_field():
    field = CoefficientField('helical', pitch=1.0)
    profile = WeightProfile(alpha=0.5, beta=1.0)
    ctx = reduced_energy.reduced_energy_context(field, profile, 3)
    assert ctx.n == 3
    assert ctx.interaction_weight == pytest.approx(1.0)
    assert np.allclose(ctx.whitening, np.eye(2))
    assert np.allclose(ctx.hessian_at_origin, ctx.hessian_at_origin[0, 0]*np.eye(2), atol=1e-6)
    assert reduced_energy.is_isotropic(ctx._replace(hessian_at_origin=-np.eye(2)))


def test_case_one_critical_radius():
    family = he.make_family('polygon', n=2, kappa=2*np.pi, radius=1)
    assert he.angular_velocity(family) == pytest.approx(0, abs=1e-15)
    value, gradient = reduced_energy.landscape_case(1, family)
    assert gradient([1.0])[0] == pytest.approx(0, abs=1e-14)
    assert gradient([0.5])[0] == pytest.approx(2*(-0.5 + 2.0), rel=1e-14)


def test_case_one_diverges_at_origin():
    value, _ = reduced_energy.landscape_case(1, he.make_family('polygon', n=3, kappa=1, radius=1))
    assert value([1e-3]) < value([1e-2]) < value([1e-1])


def test_landscape_rejects_nonpositive_radius():
    value, gradient = reduced_energy.landscape_case(1, he.make_family('polygon', n=3, kappa=1, radius=1))
    with pytest.raises(DomainError):
        value([0.0])
    with pytest.raises(DomainError):
        gradient([-1.0])


def test_landscape_case_mismatch():
    with pytest.raises(ValidationError):
        reduced_energy.landscape_case(3, he.make_family('polygon', n=3, kappa=1, radius=1))


def test_symmetric_case_three_is_stationary():
    family = he.make_family('asym2', kappa1=1.3, kappa2=1.3, lambda1=0.7, lambda2=0.7)
    _, gradient = reduced_energy.landscape_case(3, family)
    assert np.max(np.abs(gradient([0.7, 0.7]))) <= 1e-14


@pytest.mark.parametrize('case_id', [1, 2, 3, 4, 5])
def test_landscape_gradients_match_finite_differences(case_id):
    family = landscape_families()[case_id]
    value, gradient = reduced_energy.landscape_case(case_id, family)
    center = reduced_energy.landscape_critical_point(family)
    rng = np.random.default_rng(case_id)
    for _ in range(50):
        x = center*rng.uniform(0.5, 1.5, size=center.shape)
        expected = central_difference(value, x)
        assert np.allclose(gradient(x), expected, rtol=1e-6, atol=1e-8)


@pytest.mark.parametrize('case_id', [1, 2, 3, 4, 5])
def test_printed_critical_points_are_maximizers(case_id):
    family = landscape_families()[case_id]
    value, gradient = reduced_energy.landscape_case(case_id, family)
    point = reduced_energy.landscape_critical_point(family)
    assert np.linalg.norm(gradient(point)) <= 1e-10*max(1, np.max(np.abs(gradient(1.3*point))))
    eigenvalues = np.linalg.eigvalsh(reduced_energy.finite_difference_hessian(gradient, point))
    assert np.all(eigenvalues < 0)


def test_find_critical_case_one():
    family = he.make_family('polygon', n=2, kappa=2*np.pi, radius=1)
    value, gradient = reduced_energy.landscape_case(1, family)
    result = reduced_energy.find_critical(value, gradient, [0.7], mode='max')
    assert result.point[0] == pytest.approx(1.0, abs=1e-10)
    assert result.gradient_norm <= 1e-10
    assert result.classification == 'maximum'


def test_find_critical_quadratic():
    result = reduced_energy.find_critical(
        lambda x: -x @ x, lambda x: -2*x, [3.0, -4.0], mode='max', trust_radius=10.0
    )
    assert np.allclose(result.point, 0, atol=1e-12)
    assert result.iterations <= 2


def test_find_critical_case_three():
    family = landscape_families()[3]
    value, gradient = reduced_energy.landscape_case(3, family)
    expected = reduced_energy.landscape_critical_point(family)
    for factor in [0.8, 1.2]:
        result = reduced_energy.find_critical(value, gradient, factor*expected, mode='max')
        assert np.allclose(result.point, expected, rtol=1e-8)
        assert result.classification == 'maximum'


def test_find_critical_minimum():
    result = reduced_energy.find_critical(
        lambda x: np.sum((x - 1)**4 + (x - 1)**2), lambda x: 4*(x - 1)**3 + 2*(x - 1),
        [3.0, -2.0], mode='min'
    )
    assert np.allclose(result.point, 1, atol=1e-10)
    assert result.classification == 'minimum'


def test_find_critical_iteration_limit():
    with pytest.raises(ConvergenceError) as error:
        reduced_energy.find_critical(
            lambda x: float(np.sum(x)), lambda x: np.ones_like(x), [0.0], mode='max', max_iterations=3
        )
    assert 'last_iterate' in error.value.payload


def test_multistart_finds_the_maximizer():
    family = landscape_families()[4]
    value, gradient = reduced_energy.landscape_case(4, family)
    results = reduced_energy.find_critical_multistart(
        value, gradient, reduced_energy.landscape_critical_point(family), num_seeds=4
    )
    assert len(results) >= 1
    assert np.allclose(results[0].point, reduced_energy.landscape_critical_point(family), rtol=1e-8)


def test_optimize_h_n_pins_rotation():
    result = reduced_energy.optimize_h_n(simple_context(), [(0.3, 0.5), (-0.4, -0.6)])
    point = result.point.reshape(-1, 2)
    assert np.allclose(point, [[1, 0], [-1, 0]], atol=1e-9)
    assert result.classification == 'maximum'


def test_energy_expansion_single_point():
    eps = 0.01
    inputs = ExpansionInputs(
        epsilon=eps, q_values=[1.0], sqrt_det_values=[1.0], robin_values=[0.0],
        green_values=[[0.0]], p=2
    )
    total, breakdown = reduced_energy.energy_expansion(inputs)
    assert total == pytest.approx(np.pi*eps**2*abs(np.log(eps)) + np.pi*eps**2/4, rel=1e-14)
    assert breakdown['robin'] == 0
    assert breakdown['interaction'] == 0


def test_energy_expansion_leading_term_scales_with_q_squared():
    inputs = ExpansionInputs(
        epsilon=0.05, q_values=[1.0, 0.5], sqrt_det_values=[1.0, 1.0], robin_values=[0, 0],
        green_values=np.zeros((2, 2)), p=3
    )
    _, breakdown = reduced_energy.energy_expansion(inputs)
    _, doubled = reduced_energy.energy_expansion(inputs._replace(q_values=[2.0, 1.0]))
    assert doubled['leading'] == pytest.approx(4*breakdown['leading'], rel=1e-14)


def test_energy_expansion_rejects_bad_inputs():
    inputs = ExpansionInputs(
        epsilon=1.5, q_values=[1.0], sqrt_det_values=[1.0], robin_values=[0.0],
        green_values=[[0.0]], p=2
    )
    with pytest.raises(DomainError):
        reduced_energy.energy_expansion(inputs)
    with pytest.raises(ValidationError):
        reduced_energy.energy_expansion(inputs._replace(
            epsilon=0.1, q_values=[1, 1], sqrt_det_values=[1, 1], robin_values=[0, 0],
            green_values=[[0, 1], [2, 0]]
        ))


def test_fit_recovers_leading_coefficient():
    q, sqrt_det, n = 1.3, 0.8, 2
    green = np.array([[0.0, 0.2], [0.2, 0.0]])
    epsilons = 2.0**-np.arange(4, 9)
    energies = [
        reduced_energy.energy_expansion(ExpansionInputs(
            epsilon=eps, q_values=[q]*n, sqrt_det_values=[sqrt_det]*n,
            robin_values=[0.1]*n, green_values=green, p=3
        ))[0]
        for eps in epsilons
    ]
    fit = reduced_energy.fit_energy_ladder(epsilons, energies)
    assert fit['leading'] == pytest.approx(n*np.pi*q**2*sqrt_det, rel=1e-3)


def test_fit_recovers_the_pair_interaction_coefficient():
    # two cores at distance 2r/sqrt|ln eps| with the free-space log Green function
    q, n, r = 1.3, 2, 1.0
    epsilons = 2.0**-np.arange(4, 12)
    energies = []
    for eps in epsilons:
        distance = 2*r/np.sqrt(abs(np.log(eps)))
        g = -np.log(distance)/(2*np.pi) + 0.05
        inputs = ExpansionInputs(
            epsilon=eps, q_values=[q]*n, sqrt_det_values=[1.0]*n, robin_values=[0.1]*n,
            green_values=[[0.0, g], [g, 0.0]], p=2
        )
        energies.append(reduced_energy.energy_expansion(inputs)[0])

    fit = reduced_energy.fit_energy_ladder(epsilons, energies)
    assert fit['leading'] == pytest.approx(n*np.pi*q**2, rel=1e-8)
    assert fit['loglog'] == pytest.approx(-n*(n - 1)*np.pi*q**2/2, rel=1e-8)


def test_critical_point_report_keys():
    family = he.make_family('polygon', n=2, kappa=2*np.pi, radius=1)
    value, gradient = reduced_energy.landscape_case(1, family)
    result = reduced_energy.find_critical(value, gradient, [0.9])
    report = reduced_energy.critical_point_report(1, family.parameters, result)
    assert set(report) == {'case', 'params', 'point', 'grad_norm', 'hessian_eigs', 'classification'}
