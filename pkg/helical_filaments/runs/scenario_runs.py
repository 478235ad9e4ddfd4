'''
One Run subclass per subcommand, and run_scenario to execute a run config end to end

Each run writes its report (JSON) and its tables and fields in the configured formats
to the run directory, and run_scenario adds manifest.json (and error.json on failure).

'''

import json
import sys
import time

import numpy as np
import pandas as pd

from helical_filaments import reduced_energy, utils
from helical_filaments.cluster import cluster_solver, scenarios
from helical_filaments.coeff_field import CoefficientField, WeightProfile
from helical_filaments.elliptic import ansatz, green, profile
from helical_filaments.elliptic.grid import Grid, ScalarField
from helical_filaments.elliptic.operator import DiscreteOperator
from helical_filaments.errors import HelicalFilamentsError, ValidationError
from helical_filaments.filaments import helical_equilibria, kmd_dynamics
from helical_filaments.runs import exports, run_settings
from helical_filaments.runs.base_run import Run
from helical_filaments.runs.config import config_hash, family_from_block, family_to_block


def cluster_scenario(config):
    '''
    The cluster.scenarios.Scenario of a solve or energy run config
    '''
    defaults = run_settings.default_cluster_scenario
    block = config.scenario

    kind = block.get('kind', defaults['kind'])
    parameters = block.get('parameters')
    if parameters is None:
        if kind != defaults['kind']:
            raise ValidationError(
                'The %s scenario needs its parameters' % kind, key='scenario.parameters'
            )
        parameters = defaults['parameters']

    kwargs = {}
    if 'rho0_factor' in block:
        kwargs['rho0_factor'] = block['rho0_factor']

    return scenarios.make_scenario(
        kind,
        block.get('epsilon', defaults['epsilon']),
        p=block.get('p', defaults['p']),
        pitch=block.get('pitch', defaults['pitch']),
        half_width=config.grid.half_width,
        num_points=config.grid.num_points,
        **kwargs,
        **parameters
    )


def _family(block):
    return helical_equilibria.complete_family(family_from_block(block))


class EquilibriaRun(Run):
    '''
    Build each configured family (solving the compatibility condition when needed)
    and check that it is an exact rotating solution
    '''

    operation_modules = (helical_equilibria,)

    def run(self):
        blocks = self.config.scenario.get('families', run_settings.default_families)
        self.event_logger('RUN INFO: Verifying %d families' % len(blocks))

        reports = []
        for block in blocks:
            family = self.operations.complete_family(family_from_block(block))
            report = self.operations.verification_report(family)
            report['family'] = family_to_block(family)
            reports.append(report)
            self.event_logger(
                'RUN INFO: %s has alpha = %s and equilibrium residual %0.2e'
                % (family.case, report['alpha'], report['equilibrium_residual'])
            )

        exports.export(reports, self.root_dir, 'equilibria', 'json')
        if 'csv' in self.config.output.formats:
            table = pd.DataFrame([
                {key: report[key] for key in (
                    'case', 'pitch', 'alpha', 'compat_residual', 'equilibrium_residual'
                )}
                for report in reports
            ])
            exports.export(table, self.root_dir, 'equilibria', 'csv')

        worst = max(report['equilibrium_residual'] for report in reports)
        self.metadata_logger('max_equilibrium_residual', worst)


class SimulateRun(Run):
    '''
    Integrate the filament dynamics from a sampled family, optionally perturbed
    '''

    operation_modules = (helical_equilibria, kmd_dynamics)

    def initial_ensemble(self, family):
        settings = self.config.integrator
        ensemble = self.operations.sample_filaments(family, settings.num_modes)

        perturbation = self.config.scenario.get('perturbation', {})
        amplitude = perturbation.get('amplitude', 0.0)
        if amplitude:
            mode = perturbation.get('mode', 1)
            phase = 2*np.pi*mode*ensemble.arclength/ensemble.period
            offsets = np.arange(ensemble.num_filaments)[:, None]
            factor = 1 + amplitude*np.cos(phase[None, :] + offsets)
            ensemble = ensemble.with_positions(ensemble.positions*factor)
            self.event_logger(
                'RUN INFO: Perturbed the filaments with amplitude %s in mode %d' % (amplitude, mode)
            )
        return ensemble, amplitude

    def run(self):
        settings = self.config.integrator
        block = self.config.scenario.get('family', run_settings.default_families[0])
        family = _family(block)
        alpha = helical_equilibria.angular_velocity(family)
        ensemble, amplitude = self.initial_ensemble(family)

        self.event_logger(
            'RUN INFO: Integrating %d filaments to T = %s with dt = %s'
            % (ensemble.num_filaments, settings.final_time, settings.dt)
        )
        trajectory = self.operations.kmd_integrate(
            ensemble,
            settings.dt,
            settings.final_time,
            save_stride=settings.save_stride,
            collision_floor=settings.collision_floor,
            event_logger=self.event_logger
        )

        diagnostics = kmd_dynamics.diagnostics_to_dataframe(trajectory)
        drifts = kmd_dynamics.conservation_drift(
            diagnostics, mean_scale=kmd_dynamics.mean_center_scale(ensemble)
        )
        summary = {
            'family': family_to_block(family),
            'alpha': alpha,
            'perturbation': self.config.scenario.get('perturbation', {}),
            'num_saved': len(trajectory.times),
            'final_time': trajectory.times[-1],
            'collision': trajectory.collision,
            'drifts': drifts,
        }
        if amplitude == 0:
            deviation = kmd_dynamics.rotation_deviation(trajectory, alpha)
            summary['rotation_deviation'] = float(np.max(deviation))

        self.event_logger('RUN INFO: Conserved-quantity drifts %s' % drifts)
        if trajectory.collision is not None:
            self.event_logger('RUN WARNING: The run ended in a collision %s' % trajectory.collision)

        exports.export(summary, self.root_dir, 'simulate', 'json')
        if 'csv' in self.config.output.formats:
            exports.export(
                kmd_dynamics.trajectory_to_dataframe(trajectory), self.root_dir, 'trajectory', 'csv'
            )
            exports.export(diagnostics, self.root_dir, 'diagnostics', 'csv')


class LandscapeRun(Run):
    '''
    Critical points of a case landscape H_1 to H_5, or of H_N for a generic helical weight
    '''

    operation_modules = (reduced_energy,)

    def generic_critical_points(self, block):
        settings = self.config.optimizer
        num_cores = block['num_cores']
        field = CoefficientField('helical', pitch=block.get('pitch', 1.0))
        ctx = reduced_energy.reduced_energy_context(
            field, WeightProfile(block['alpha'], block['beta']), num_cores
        )
        start = utils.from_complex(np.exp(2j*np.pi*np.arange(num_cores)/num_cores))
        result = self.operations.optimize_h_n(
            ctx, start, mode='max', tol=settings.tol, max_iterations=settings.max_iterations,
            event_logger=self.event_logger
        )
        return [reduced_energy.critical_point_report('generic', block, result)]

    def case_critical_points(self, family):
        settings = self.config.optimizer
        case_ids = {case: case_id for case_id, case in reduced_energy.LANDSCAPE_CASES.items()}
        case_id = self.config.scenario.get('case_id', case_ids[family.case])

        objective, gradient = reduced_energy.landscape_case(case_id, family)
        expected = reduced_energy.landscape_critical_point(family)
        start = expected*(1 + self.config.scenario.get('perturbation', 0.0))

        if settings.multistart:
            results = self.operations.find_critical_multistart(
                objective, gradient, start, mode='max', num_seeds=settings.num_seeds,
                spread=settings.seed_spread, random_seed=settings.random_seed, tol=settings.tol,
                max_iterations=settings.max_iterations
            )
        else:
            results = [self.operations.find_critical(
                objective, gradient, start, mode='max', tol=settings.tol,
                max_iterations=settings.max_iterations, event_logger=self.event_logger
            )]

        reports = []
        for result in results:
            report = reduced_energy.critical_point_report(case_id, dict(family.parameters), result)
            report['expected_point'] = expected.tolist()
            report['point_error'] = float(np.linalg.norm(result.point - expected))
            reports.append(report)
        return reports

    def run(self):
        block = self.config.scenario
        if 'generic' in block:
            reports = self.generic_critical_points(block['generic'])
        else:
            reports = self.case_critical_points(
                _family(block.get('family', run_settings.default_families[0]))
            )

        if not reports:
            self.event_logger('RUN WARNING: No critical point was found')
        for report in reports:
            self.event_logger(
                'RUN INFO: %s critical point %s (gradient norm %0.2e)'
                % (report['classification'], report['point'], report['grad_norm'])
            )
        exports.export({'critical_points': reports}, self.root_dir, 'critical-points', 'json')


class GreenRun(Run):
    '''
    The Green function, its regular part and Robin value at a source,
    and the corrector smoothness probe around it
    '''

    operation_modules = (green,)

    def run(self):
        block = {**run_settings.default_green_scenario, **self.config.scenario}
        field_block = {**run_settings.default_green_scenario['field'], **block['field']}

        grid = Grid(self.config.grid.half_width, self.config.grid.num_points)
        field = CoefficientField(
            field_block['kind'], half_width=grid.half_width, pitch=field_block['pitch']
        )
        linear = self.config.linear
        operator = DiscreteOperator(
            grid, field, method=linear.method, rtol=linear.rtol, max_iterations=linear.max_iterations
        )

        result = self.operations.green_function(
            grid, field, block['source'], operator=operator, event_logger=self.event_logger
        )
        self.event_logger('RUN INFO: Robin value %s at %s' % (result.robin, result.source.tolist()))

        probes = []
        for point in block['probes']:
            index = grid.nearest_node(point)
            probes.append({
                'point': list(point),
                'node': grid.node_position(index).tolist(),
                'G': float(result.G.values[index]),
                'S': float(result.S.values[index]),
            })

        corrector = self.operations.probe_corrector_smoothness(
            grid, field, block['source'], ring_spacings=tuple(block['ring_spacings']),
            green=result, operator=operator
        )
        report = {
            'field': field_block,
            'source': list(block['source']),
            'snapped_source': result.source.tolist(),
            'robin': result.robin,
            'probes': probes,
            'corrector_probe': corrector.to_dict(orient='records'),

            # growth per halving of the ring radius
            'grad_S_ratios': (corrector.grad_S.values[1:]/corrector.grad_S.values[:-1]).tolist(),
            'grad_corrected_ratios': (
                corrector.grad_corrected.values[1:]/corrector.grad_corrected.values[:-1]
            ).tolist(),
        }

        formats = self.config.output.formats
        exports.export(report, self.root_dir, 'green', 'json')
        exports.export_all(result.S, self.root_dir, 'S', formats)
        if 'binary-grid' in formats:
            exports.export(result.G, self.root_dir, 'G', 'binary-grid')


class SolveRun(Run):
    '''
    Solve a clustered scenario and measure its support components
    '''

    operation_modules = (cluster_solver,)

    def run(self):
        scenario = cluster_scenario(self.config)
        summary = scenarios.scenario_summary(scenario)
        self.metadata_logger('scenario', summary)

        u, report = self.operations.solve_clustered(
            scenario,
            picard_settings=self.config.picard,
            linear_settings=self.config.linear,
            qhat_settings=self.config.qhat,
            event_logger=self.event_logger,
            iteration_logger=self.iteration_logger
        )
        self.event_logger(
            'RUN INFO: %d components after %d sweeps' % (report.num_components, report.iterations)
        )

        formats = self.config.output.formats
        exports.export(
            {'scenario': summary, 'report': report.to_dict(), 'expected_components': scenario.num_cores},
            self.root_dir, 'cluster-report', 'json'
        )
        exports.export_all(u, self.root_dir, 'u', formats)

        samples = self.config.scenario.get('lift_samples')
        if samples and 'csv' in formats:
            samples = np.asarray(samples, dtype=float)
            vorticity = cluster_solver.lift_vorticity_3d(
                u, scenario, samples, t=self.config.scenario.get('lift_time', 0.0)
            )
            table = pd.DataFrame(
                np.concatenate([samples, vorticity], axis=1),
                columns=['x1', 'x2', 'x3', 'w1', 'w2', 'w3']
            )
            exports.export(table, self.root_dir, 'lift', 'csv')


class EnergyRun(Run):
    '''
    The discrete energy of the ansatz against the energy expansion over an epsilon ladder
    '''

    operation_modules = (cluster_solver, reduced_energy, profile)

    def ladder_row(self, scenario, table):
        linear = self.config.linear
        operator = DiscreteOperator(
            scenario.grid(), scenario.field, method=linear.method, rtol=linear.rtol,
            max_iterations=linear.max_iterations
        )
        setup = self.operations.prepare_ansatz(
            scenario, operator=operator, table=table, qhat_settings=self.config.qhat,
            event_logger=self.event_logger
        )
        energy = cluster_solver.energy_of_ansatz(scenario, setup=setup)
        expansion, breakdown = self.operations.energy_expansion(
            cluster_solver.expansion_inputs(scenario, setup)
        )
        sign_structure = ansatz.measure_sign_structure(
            ScalarField(setup.grid, ansatz.ansatz_total(setup.result)),
            scenario.field, scenario.profile, setup.params
        )
        eps = scenario.epsilon
        self.event_logger(
            'RUN INFO: eps = %s, ansatz energy %s, expansion %s' % (eps, energy, expansion)
        )
        return {
            'epsilon': eps,
            'ansatz_energy': energy,
            'expansion': expansion,
            **{'expansion_%s' % key: value for key, value in breakdown.items()},
            'scaled_difference': (energy - expansion)/eps**2,
            'sign_structure_L': sign_structure,
            'qhat': np.asarray(setup.params.qhat).tolist(),
            'core_radii': np.asarray(setup.params.core_radii).tolist(),
        }

    def run(self):
        scenario = cluster_scenario(self.config)
        epsilons = sorted(
            self.config.scenario.get('epsilons', [scenario.epsilon]), reverse=True
        )
        table = self.operations.solve_profile(scenario.p, event_logger=self.event_logger)

        rows = [self.ladder_row(scenario.with_epsilon(eps), table) for eps in epsilons]

        betas = np.array([
            species.beta for species in scenario.species for _ in species.positions
        ])
        off_diagonal = np.sum(np.outer(betas, betas)) - np.sum(betas**2)
        report = {
            'scenario': scenarios.scenario_summary(scenario),
            'ladder': rows,

            # E/eps^2 ~ pi sum beta_j^2 |ln eps| - (pi/2) sum_{i != j} beta_i beta_j ln|ln eps|
            'predicted': {
                'leading': float(np.pi*np.sum(betas**2)),
                'loglog': float(-np.pi*off_diagonal/2),
            },
        }
        if len(rows) >= 2:
            report['ansatz_fit'] = reduced_energy.fit_energy_ladder(
                epsilons, [row['ansatz_energy'] for row in rows]
            )
            report['expansion_fit'] = reduced_energy.fit_energy_ladder(
                epsilons, [row['expansion'] for row in rows]
            )

        exports.export(report, self.root_dir, 'energy', 'json')
        if 'csv' in self.config.output.formats:
            table = pd.DataFrame([
                {key: value for key, value in row.items() if not isinstance(value, list)}
                for row in rows
            ])
            exports.export(table, self.root_dir, 'energy', 'csv')


RUNS = {
    'equilibria': EquilibriaRun,
    'simulate': SimulateRun,
    'landscape': LandscapeRun,
    'green': GreenRun,
    'solve': SolveRun,
    'energy': EnergyRun,
}


def run_scenario(config, out_dir, overwrite=False, verbose=True):
    '''
    Execute a validated RunConfig in out_dir and return the exit code
    (0 on success, the error's exit code when a HelicalFilamentsError ends the run)

    Errors that are not HelicalFilamentsErrors propagate after the manifest is written.
    '''
    run = RUNS[config.subcommand](out_dir, config, overwrite=overwrite, verbose=verbose)
    start = time.perf_counter()
    status, exit_code = 'failure', 1

    run.setup()
    try:
        run.run()
        status, exit_code = 'success', 0
    except HelicalFilamentsError as error:
        exit_code = error.exit_code
        payload = error.to_dict()
        run.event_logger('ERROR: %s' % error.message)
        exports.export(payload, run.root_dir, 'error', 'json')
        if verbose:
            print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    finally:
        run.cleanup()
        exports.write_manifest(
            run.root_dir,
            config_hash=config_hash(config),
            subcommand=config.subcommand,
            status=status,
            wall_time=time.perf_counter() - start,
            git_commit=run.git_commit,
        )
    return exit_code
