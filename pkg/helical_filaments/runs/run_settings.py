'''
Default settings for the scenario runs

Every group can be overridden from the run config (see runs.config);
the values here are the ones the test runs were tuned with.

'''

import numpy as np

from helical_filaments.settings_schemas import (
    GridSettings,
    LinearSolverSettings,
    PicardSettings,
    QhatSettings,
    IntegratorSettings,
    OptimizerSettings,
    OutputSettings,
)


# -----------------------------------------------------------------------------
#
# Grid settings
#
# -----------------------------------------------------------------------------
grid_settings = GridSettings(

    # the clustered cores sit within |ln eps|^{-1/2} of the origin,
    # so the unit square leaves room for the indicator regions down to eps = 0.01
    half_width=1.0,

    # 2^8 + 1 nodes per axis; the epsilon ladders use 513
    num_points=257,
)


# -----------------------------------------------------------------------------
#
# Linear and nonlinear solver settings
#
# -----------------------------------------------------------------------------
linear_solver_settings = LinearSolverSettings(
    method='cg',
    rtol=1e-10,
    max_iterations=None,
)

picard_settings = PicardSettings(
    damping=0.6,

    # six halvings
    min_damping=0.6/64,

    rtol=1e-8,
    max_sweeps=300,
    newton_correction=True,
)

qhat_settings = QhatSettings(

    # undamped: the couplings are O(1/|ln eps|), so plain sweeps contract
    damping=1.0,

    rtol=1e-12,
    max_sweeps=200,
)


# -----------------------------------------------------------------------------
#
# Filament integrator settings
#
# -----------------------------------------------------------------------------
integrator_settings = IntegratorSettings(
    dt=1e-4,
    final_time=0.1,
    save_stride=100,
    num_modes=64,
    collision_floor=1e-8,
)


# -----------------------------------------------------------------------------
#
# Critical-point search settings
#
# -----------------------------------------------------------------------------
optimizer_settings = OptimizerSettings(
    tol=1e-10,
    max_iterations=100,
    multistart=False,
    num_seeds=8,

    # perturbed starts within 20% of the predicted point
    seed_spread=0.2,

    random_seed=0,
)


output_settings = OutputSettings(formats=['csv', 'json', 'binary-grid'])


# -----------------------------------------------------------------------------
#
# Default scenario blocks
# (a parameter given as None is solved from the compatibility condition)
#
# -----------------------------------------------------------------------------
default_families = [
    {'case': 'polygon', 'pitch': 1.0, 'parameters': {'n': 3, 'kappa': 1.0, 'radius': 1.0}},
    {
        'case': 'polygon_plus_center',
        'pitch': 1.0,
        'parameters': {'n': 3, 'kappa': 1.0, 'mu': 0.5, 'radius': 1.0},
    },
    {
        'case': 'asym2',
        'pitch': 1.0,
        'parameters': {'kappa1': 1.0, 'kappa2': None, 'lambda1': 0.6, 'lambda2': 0.9},
    },
    {
        'case': 'two_by_two',
        'pitch': 1.0,
        'parameters': {'kappa': 1.0, 'mu': 1.4, 'lambda1': 0.8, 'lambda2': None},
    },
    {
        'case': 'two_by_two_plus_center',
        'pitch': 1.0,
        'parameters': {'kappa0': 0.5, 'kappa': 1.0, 'mu': 1.4, 'lambda1': 0.8, 'lambda2': None},
    },
]

# the two-filament scenario of the clustered test runs
default_cluster_scenario = {
    'kind': 'polygon',
    'epsilon': 0.02,
    'p': 2.0,
    'pitch': 1.0,
    'parameters': {'n': 2, 'kappa': 2*np.pi, 'radius': 1.0},
}

default_green_scenario = {
    'field': {'kind': 'helical', 'pitch': 1.0},
    'source': [0.4, 0.0],
    'probes': [[0.0, 0.0], [-0.4, 0.0], [0.4, 0.4]],
    'ring_spacings': [16, 8, 4, 2],
}
