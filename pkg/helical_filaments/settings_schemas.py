
from collections import namedtuple


GridSettings = namedtuple('GridSettings', [

    # the grid covers the square [-half_width, half_width]^2
    'half_width',

    # number of nodes per axis, including the two boundary nodes
    # (a power of two plus one, so that the origin is a node)
    'num_points',
])


LinearSolverSettings = namedtuple('LinearSolverSettings', [

    # 'cg' (Jacobi-preconditioned conjugate gradient) or 'direct' (cached sparse LU)
    'method',

    # relative residual at which CG stops
    'rtol',

    # cap on CG iterations (None lets scipy choose 10*n)
    'max_iterations',
])


PicardSettings = namedtuple('PicardSettings', [

    # initial damping factor theta of the fixed-point update
    'damping',

    # the damping is halved on residual increase but never below this value
    'min_damping',

    # relative update at which the iteration is converged
    'rtol',

    # iteration cap (sweeps)
    'max_sweeps',

    # whether to add the linearized free-boundary term to the operator
    # (False gives the plain damped Picard update)
    'newton_correction',
])


QhatSettings = namedtuple('QhatSettings', [

    # damping of the q-hat fixed-point sweeps (1.0 gives undamped sweeps)
    'damping',

    # max change between successive sweeps at convergence
    'rtol',

    # sweep cap
    'max_sweeps',
])


IntegratorSettings = namedtuple('IntegratorSettings', [

    # fixed RK4 step size
    'dt',

    # final time
    'final_time',

    # save every nth step (the final state is always saved)
    'save_stride',

    # number of samples per filament (power of two)
    'num_modes',

    # separation below which filaments are considered to have collided
    'collision_floor',
])


OptimizerSettings = namedtuple('OptimizerSettings', [

    # gradient-norm tolerance of the damped Newton iteration
    'tol',

    # iteration cap
    'max_iterations',

    # whether to restart from perturbed seeds and report every critical point found
    'multistart',
    'num_seeds',

    # relative size of the seed perturbations
    'seed_spread',

    # seed of the perturbation generator (fixed so that runs are reproducible)
    'random_seed',
])


OutputSettings = namedtuple('OutputSettings', [

    # subset of 'csv', 'json', 'binary-grid'
    'formats',
])


class DampingManager:

    def __init__(self, picard_settings):
        '''
        Manager for a PicardSettings object

        Adds a mutable damping factor, a method to halve it after a rejected step,
        and a reset method to restore the default
        '''
        for key, value in dict(picard_settings._asdict()).items():
            setattr(self, key, value)
        self.reset()

    def reset(self):
        self.current_damping = self.damping  # pylint: disable=no-member

    def halve(self):
        '''
        Returns False if the damping is already at its floor
        '''
        if self.current_damping <= self.min_damping:  # pylint: disable=no-member
            return False
        self.current_damping = max(self.current_damping/2, self.min_damping)  # pylint: disable=no-member
        return True
