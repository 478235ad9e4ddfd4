'''
Reduced energies whose critical points locate the clustered vortex cores

    H_N(z_1, ..., z_N) = 1/2 sum_j z_j . D^2(q^2 sqrt(det K))(0) . z_j
                         + sum_{i != j} (q^2 sqrt(det K))(0) ln|K(0)^{-1/2} (z_i - z_j)|

(the pair sum runs over ordered pairs), the one- and two-radius landscapes H_1 ... H_5
of the symmetric helical scenarios, a damped Newton critical-point search,
and the finite-dimensional energy expansion in epsilon.

'''

from collections import namedtuple

import numpy as np
from scipy import linalg

from helical_filaments import coeff_field, utils
from helical_filaments.errors import (
    ConvergenceError, DomainError, HelicalFilamentsError, SingularityError, ValidationError
)
from helical_filaments.filaments import helical_equilibria

# eigenvalues smaller than this (in absolute value) count as zero
ZERO_EIGENVALUE = 1e-8

# relative step for the finite-difference Hessian
HESSIAN_STEP = 1e-6

LANDSCAPE_CASES = {
    1: 'polygon',
    2: 'polygon_plus_center',
    3: 'asym2',
    4: 'two_by_two',
    5: 'two_by_two_plus_center',
}


ReducedEnergyContext = namedtuple('ReducedEnergyContext', [
    'hessian_at_origin', 'interaction_weight', 'whitening', 'n'
])

ExpansionInputs = namedtuple('ExpansionInputs', [
    'epsilon', 'q_values', 'sqrt_det_values', 'robin_values', 'green_values', 'p'
])

CriticalPoint = namedtuple('CriticalPoint', [
    'point', 'value', 'gradient_norm', 'hessian_eigenvalues', 'classification', 'iterations'
])


def reduced_energy_context(field, profile, n):
    '''
    The context of H_N for a coefficient field and weight profile
    '''
    weight = coeff_field.eval_weight(profile, field, np.zeros(2), derivatives=True)
    whitening = coeff_field.factor_T(field, np.zeros(2))
    return ReducedEnergyContext(
        hessian_at_origin=weight.hessian,
        interaction_weight=weight.weight,
        whitening=whitening,
        n=int(n),
    )


def h_n_eval(ctx, positions):
    '''
    The value of H_N and its gradient (as an (N, 2) array) at the given positions
    '''
    z = np.asarray(positions, dtype=float).reshape(-1, 2)
    if len(z) != ctx.n:
        raise ValueError('Expected %d positions but got %d' % (ctx.n, len(z)))

    hessian = 0.5*(ctx.hessian_at_origin + ctx.hessian_at_origin.T)
    W = ctx.whitening
    c0 = ctx.interaction_weight

    value = 0.5*np.einsum('ja,ab,jb->', z, hessian, z)
    gradient = z @ hessian

    differences = z[:, None, :] - z[None, :, :]
    whitened = differences @ W.T
    norms_sq = np.sum(whitened**2, axis=-1)
    off_diagonal = ~np.eye(len(z), dtype=bool)
    if np.any(norms_sq[off_diagonal] == 0):
        raise SingularityError('Coincident positions in H_N', positions=z)

    value += c0*0.5*np.sum(np.log(norms_sq[off_diagonal]))

    # each unordered pair appears twice in the ordered sum
    np.fill_diagonal(norms_sq, np.inf)
    pulled_back = whitened @ W
    gradient += 2*c0*np.sum(pulled_back/norms_sq[:, :, None], axis=1)
    return float(value), gradient


def landscape_coefficients(family):
    '''
    alpha, the species offsets beta_i = kappa_i/(2 pi), and c_i = beta_i (2 alpha h^2 - beta_i)/h^2
    (c_i is the radial second derivative of q_i^2 sqrt(det K_H) at the origin)
    '''
    params, h = family.parameters, family.pitch
    alpha = helical_equilibria.angular_velocity(family)
    names = {
        'polygon': ['kappa'],
        'polygon_plus_center': ['kappa', 'mu'],
        'asym2': ['kappa1', 'kappa2'],
        'two_by_two': ['kappa', 'mu'],
        'two_by_two_plus_center': ['kappa', 'mu', 'kappa0'],
    }[family.case]
    betas = [params[name]/(2*np.pi) for name in names]
    cs = [beta*(2*alpha*h**2 - beta)/h**2 for beta in betas]
    return alpha, betas, cs


def landscape_critical_point(family):
    '''
    The radii at which the case landscape is stationary for the family's own parameters
    '''
    params = family.parameters
    if family.case in ('polygon', 'polygon_plus_center'):
        return np.array([params['radius']], dtype=float)
    return np.array([params['lambda1'], params['lambda2']], dtype=float)


def landscape_case(case_id, family):
    '''
    The landscape H of case case_id (1 to 5) and its analytic gradient, as a pair of callables
    taking the radii (r,) or (lambda1, lambda2)

    family : the HelicalFamily providing N, the circulations and the pitch;
        alpha and the beta_i follow from it
    '''
    if case_id not in LANDSCAPE_CASES:
        raise ValidationError('Unknown landscape case %s' % case_id, case_id=case_id)
    if family.case != LANDSCAPE_CASES[case_id]:
        raise ValidationError(
            'Landscape case %s expects a %s family but got %s'
            % (case_id, LANDSCAPE_CASES[case_id], family.case)
        )
    helical_equilibria.validate_family(family)
    _, betas, cs = landscape_coefficients(family)

    def check(radii):
        radii = np.asarray(radii, dtype=float).reshape(-1)
        if np.any(radii <= 0):
            raise DomainError('Landscape radii must be positive (got %s)' % radii, radii=radii)
        return radii

    if case_id in (1, 2):
        n = family.parameters['n']
        beta1, c1 = betas[0], cs[0]
        log_coef = n*(n - 1)*beta1**2
        if case_id == 2:
            log_coef += 2*n*beta1*betas[1]

        def value(radii):
            r = check(radii)[0]
            return 0.5*n*c1*r**2 + log_coef*np.log(r)

        def gradient(radii):
            r = check(radii)[0]
            return np.array([n*c1*r + log_coef/r])

        return value, gradient

    if case_id == 3:
        (beta1, beta2), (c1, c2) = betas, cs

        def value(radii):
            l1, l2 = check(radii)
            return 0.5*(c1*l1**2 + c2*l2**2) + 2*beta1*beta2*np.log(l1 + l2)

        def gradient(radii):
            l1, l2 = check(radii)
            coupling = 2*beta1*beta2/(l1 + l2)
            return np.array([c1*l1 + coupling, c2*l2 + coupling])

        return value, gradient

    beta1, beta2 = betas[:2]
    c1, c2 = cs[:2]
    beta0 = betas[2] if case_id == 5 else 0.0

    def value(radii):
        l1, l2 = check(radii)
        total = (
            c1*l1**2 + c2*l2**2
            + 2*(beta1**2*np.log(2*l1) + beta2**2*np.log(2*l2))
            + 4*beta1*beta2*np.log(l1**2 + l2**2)
        )
        if case_id == 5:
            total += 4*beta0*(beta1*np.log(l1) + beta2*np.log(l2))
        return total

    def gradient(radii):
        l1, l2 = check(radii)
        sum_sq = l1**2 + l2**2
        g1 = 2*c1*l1 + 2*beta1**2/l1 + 8*beta1*beta2*l1/sum_sq
        g2 = 2*c2*l2 + 2*beta2**2/l2 + 8*beta1*beta2*l2/sum_sq
        if case_id == 5:
            g1 += 4*beta0*beta1/l1
            g2 += 4*beta0*beta2/l2
        return np.array([g1, g2])

    return value, gradient


def finite_difference_hessian(gradient, x, step=HESSIAN_STEP):
    x = np.asarray(x, dtype=float)
    size = len(x)
    hessian = np.zeros((size, size))
    h = step*max(1.0, np.linalg.norm(x))
    for a in range(size):
        offset = np.zeros(size)
        offset[a] = h
        hessian[:, a] = (np.asarray(gradient(x + offset)) - np.asarray(gradient(x - offset)))/(2*h)
    return 0.5*(hessian + hessian.T)


def classify(eigenvalues):
    eigenvalues = np.asarray(eigenvalues)
    if np.any(np.abs(eigenvalues) <= ZERO_EIGENVALUE):
        return 'degenerate'
    if np.all(eigenvalues < 0):
        return 'maximum'
    if np.all(eigenvalues > 0):
        return 'minimum'
    return 'saddle'


def _safe_value(objective, x):
    try:
        value = objective(x)
    except (DomainError, SingularityError):
        return None
    if not np.isfinite(value):
        return None
    return value


def find_critical(
    objective,
    gradient,
    start,
    mode='max',
    tol=1e-10,
    max_iterations=100,
    trust_radius=None,
    event_logger=None
):
    '''
    Damped Newton search for a critical point of the given kind

    Parameters
    ----------
    objective, gradient : callables of a 1D array
    start : initial point
    mode : 'max' or 'min'; the Hessian eigenvalues are flipped to the sign that makes
        the Newton step an ascent (max) or descent (min) direction
    tol : gradient-norm tolerance
    trust_radius : cap on the step length (default 0.25*max(|start|, 1e-3))

    Returns a CriticalPoint; raises ConvergenceError (with the last iterate) on failure

    '''
    if mode not in ('max', 'min'):
        raise ValueError("mode must be 'max' or 'min'")
    event_logger = event_logger or utils.null_logger

    x = np.array(start, dtype=float).reshape(-1)
    value = _safe_value(objective, x)
    if value is None:
        raise DomainError('The objective is not finite at the start point %s' % x, point=x)
    if trust_radius is None:
        trust_radius = 0.25*max(np.linalg.norm(x), 1e-3)

    sign = -1.0 if mode == 'max' else 1.0
    for iteration in range(max_iterations + 1):
        g = np.asarray(gradient(x), dtype=float)
        gradient_norm = float(np.linalg.norm(g))
        if gradient_norm <= tol:
            eigenvalues = np.linalg.eigvalsh(finite_difference_hessian(gradient, x))
            return CriticalPoint(
                point=x,
                value=float(value),
                gradient_norm=gradient_norm,
                hessian_eigenvalues=eigenvalues,
                classification=classify(eigenvalues),
                iterations=iteration,
            )
        if iteration == max_iterations:
            break

        hessian = finite_difference_hessian(gradient, x)
        eigenvalues, eigenvectors = np.linalg.eigh(hessian)
        floor = ZERO_EIGENVALUE*max(1.0, np.max(np.abs(eigenvalues)))
        modified = sign*np.maximum(np.abs(eigenvalues), floor)
        step = -eigenvectors @ ((eigenvectors.T @ g)/modified)

        step_norm = np.linalg.norm(step)
        if step_norm > trust_radius:
            step *= trust_radius/step_norm

        slope = g @ step
        t = 1.0
        while True:
            candidate = x + t*step
            candidate_value = _safe_value(objective, candidate)
            if candidate_value is not None:
                sufficient = sign*(candidate_value - value) <= 1e-4*t*sign*slope
                if sufficient or np.linalg.norm(gradient(candidate)) < gradient_norm:
                    break
            t /= 2
            if t < 1e-12:
                raise ConvergenceError(
                    'No progress from %s (gradient norm %s)' % (x, gradient_norm),
                    last_iterate=x, iterations=iteration, gradient_norm=gradient_norm
                )

        x, value = candidate, candidate_value
        event_logger('NEWTON INFO: iteration %d, gradient norm %s, step %s'
                     % (iteration, gradient_norm, t*np.linalg.norm(step)))

    raise ConvergenceError(
        'Iteration limit reached (gradient norm %s)' % gradient_norm,
        last_iterate=x, iterations=max_iterations, gradient_norm=gradient_norm
    )


def find_critical_multistart(
    objective,
    gradient,
    start,
    mode='max',
    num_seeds=8,
    spread=0.2,
    random_seed=0,
    **kwargs
):
    '''
    find_critical from the start and from num_seeds seeded perturbations of it

    Returns the distinct critical points found, best objective first
    (failed seeds are skipped)
    '''
    start = np.array(start, dtype=float).reshape(-1)
    rng = np.random.default_rng(random_seed)
    seeds = [start] + [
        start*(1 + spread*rng.uniform(-1, 1, size=start.shape)) for _ in range(num_seeds)
    ]

    found = []
    for seed in seeds:
        try:
            result = find_critical(objective, gradient, seed, mode=mode, **kwargs)
        except HelicalFilamentsError:
            continue
        scale = max(1.0, np.linalg.norm(result.point))
        if all(np.linalg.norm(result.point - other.point) > 1e-6*scale for other in found):
            found.append(result)

    return sorted(found, key=lambda result: -result.value if mode == 'max' else result.value)


def _rotation_generator(z):
    return np.stack([-z[:, 1], z[:, 0]], axis=-1).reshape(-1)


def is_isotropic(ctx):
    hessian, whitening = ctx.hessian_at_origin, ctx.whitening
    return (
        np.allclose(hessian, hessian[0, 0]*np.eye(2), atol=1e-12)
        and np.allclose(whitening, whitening[0, 0]*np.eye(2), atol=1e-12)
    )


def optimize_h_n(ctx, start, mode='max', tol=1e-10, max_iterations=100, event_logger=None):
    '''
    A critical point of H_N near the start positions (an (N, 2) array)

    The trust radius is a quarter of the smallest initial separation. When H_N is rotation
    invariant the solution is rotated so that the first position lies on the positive x1-axis,
    and the classification ignores the rotation direction.
    '''
    start = np.asarray(start, dtype=float).reshape(-1, 2)
    separations = np.linalg.norm(start[:, None] - start[None, :], axis=-1)
    separations[np.eye(len(start), dtype=bool)] = np.inf
    trust_radius = 0.25*float(np.min(separations))

    def objective(x):
        return h_n_eval(ctx, x.reshape(-1, 2))[0]

    def gradient(x):
        return h_n_eval(ctx, x.reshape(-1, 2))[1].reshape(-1)

    result = find_critical(
        objective, gradient, start.reshape(-1), mode=mode, tol=tol,
        max_iterations=max_iterations, trust_radius=trust_radius, event_logger=event_logger
    )
    if not is_isotropic(ctx):
        return result

    z = result.point.reshape(-1, 2)
    angle = np.arctan2(z[0, 1], z[0, 0])
    rotation = np.array([[np.cos(angle), np.sin(angle)], [-np.sin(angle), np.cos(angle)]])
    z = z @ rotation.T

    hessian = finite_difference_hessian(gradient, z.reshape(-1))
    complement = linalg.null_space(_rotation_generator(z)[None, :])
    eigenvalues = np.linalg.eigvalsh(complement.T @ hessian @ complement)
    return result._replace(
        point=z.reshape(-1),
        hessian_eigenvalues=eigenvalues,
        classification=classify(eigenvalues),
    )


def energy_expansion(inputs):
    '''
    The finite-dimensional energy expansion

        sum_j pi eps^2 |ln eps| q_j^2 sqrt(det K_j)                      (leading)
      + sum_j (p - 1) pi eps^2 q_j^2 sqrt(det K_j)/4                     (profile)
      - sum_j 2 pi^2 eps^2 q_j^2 det K_j S_K(z_j, z_j)                   (robin)
      - sum_{i != j} 2 pi^2 eps^2 q_i q_j sqrt(det K_i) sqrt(det K_j) G_K(z_i, z_j)   (interaction)

    Returns the total and a dict of the four sums
    '''
    eps = inputs.epsilon
    if not 0 < eps < 1:
        raise DomainError('epsilon must lie in (0, 1) (got %s)' % eps, epsilon=eps)

    q = np.asarray(inputs.q_values, dtype=float)
    sqrt_det = np.asarray(inputs.sqrt_det_values, dtype=float)
    robin = np.asarray(inputs.robin_values, dtype=float)
    green = np.atleast_2d(np.asarray(inputs.green_values, dtype=float))
    if green.shape != (len(q), len(q)):
        raise ValueError('green_values must be %d x %d' % (len(q), len(q)))
    scale = max(np.max(np.abs(green)), 1e-300)
    if np.max(np.abs(green - green.T)) > 1e-6*scale:
        raise ValidationError('green_values is not symmetric')

    weights = q**2*sqrt_det
    coupling = q*sqrt_det
    off_diagonal = ~np.eye(len(q), dtype=bool)

    breakdown = {
        'leading': float(np.sum(np.pi*eps**2*abs(np.log(eps))*weights)),
        'profile': float(np.sum((inputs.p - 1)*np.pi*eps**2*weights/4)),
        'robin': float(-np.sum(2*np.pi**2*eps**2*q**2*sqrt_det**2*robin)),
        'interaction': float(
            -np.sum((2*np.pi**2*eps**2*np.outer(coupling, coupling)*green)[off_diagonal])
        ),
    }
    return sum(breakdown.values()), breakdown


def fit_energy_ladder(epsilons, energies):
    '''
    Least-squares fit of E/eps^2 = a |ln eps| + b ln|ln eps| + c

    With fewer than three epsilons the ln|ln eps| term is dropped
    '''
    epsilons = np.asarray(epsilons, dtype=float)
    scaled = np.asarray(energies, dtype=float)/epsilons**2
    log_eps = np.abs(np.log(epsilons))
    if len(epsilons) >= 3:
        design = np.stack([log_eps, np.log(log_eps), np.ones_like(log_eps)], axis=1)
        (a, b, c), *_ = np.linalg.lstsq(design, scaled, rcond=None)
    else:
        design = np.stack([log_eps, np.ones_like(log_eps)], axis=1)
        (a, c), *_ = np.linalg.lstsq(design, scaled, rcond=None)
        b = 0.0
    return {'leading': float(a), 'loglog': float(b), 'constant': float(c)}


def critical_point_report(case, params, result):
    return {
        'case': case,
        'params': params,
        'point': np.asarray(result.point).tolist(),
        'grad_norm': result.gradient_norm,
        'hessian_eigs': np.asarray(result.hessian_eigenvalues).tolist(),
        'classification': result.classification,
    }
