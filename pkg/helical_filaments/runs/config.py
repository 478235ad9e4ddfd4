'''
The run config: one JSON document {subcommand, scenario, grid, solver, output}

The document is patched with the command-line overrides, validated against RUN_CONFIG_SCHEMA
(whose scenario block depends on the subcommand), and merged with the defaults
in runs.run_settings. Validation failures raise a ValidationError naming the offending key
and, when the key appears in the file, its line number.

'''

import json
import re
from collections import namedtuple

import jsonschema

from helical_filaments import utils
from helical_filaments.cluster.scenarios import SCENARIO_KINDS
from helical_filaments.errors import ValidationError
from helical_filaments.filaments import helical_equilibria
from helical_filaments.runs import run_settings
from helical_filaments.runs.exports import EXPORT_FORMATS

SUBCOMMANDS = ['equilibria', 'simulate', 'landscape', 'green', 'solve', 'energy']

POSITIVE = {'type': 'number', 'exclusiveMinimum': 0}

POSITIVE_OR_NULL = {'type': ['number', 'null'], 'exclusiveMinimum': 0}

POINT = {'type': 'array', 'items': {'type': 'number'}, 'minItems': 2, 'maxItems': 2}

EPSILON = {'type': 'number', 'exclusiveMinimum': 0, 'exclusiveMaximum': 0.5}


FAMILY_SCHEMA = {
    'type': 'object',
    'properties': {

        # one of helical_equilibria.CASE_PARAMETERS
        'case': {'enum': list(helical_equilibria.CASE_PARAMETERS)},

        # the helical pitch h
        'pitch': POSITIVE,

        'global_phase': {'type': 'number'},

        # the case parameters (e.g. n, kappa, radius for 'polygon');
        # a single null parameter is solved from the compatibility condition
        'parameters': {'type': 'object', 'additionalProperties': POSITIVE_OR_NULL},
    },
    'required': ['case', 'parameters'],
    'additionalProperties': False,
}


CLUSTER_SCENARIO_PROPERTIES = {

    # one of cluster.scenarios.SCENARIO_KINDS
    'kind': {'enum': SCENARIO_KINDS},

    'epsilon': EPSILON,

    # the exponent of the nonlinearity
    'p': {'type': 'number', 'exclusiveMinimum': 1, 'exclusiveMaximum': 6},

    'pitch': POSITIVE,

    # family parameters, or alpha, beta and num_cores for kind 'generic'
    'parameters': {'type': 'object'},

    # the indicator radius as a fraction of the smallest unscaled separation
    'rho0_factor': POSITIVE,
}

GENERIC_PARAMETERS_SCHEMA = {
    'type': 'object',
    'properties': {
        'alpha': {'type': 'number'},
        'beta': POSITIVE,
        'num_cores': {'type': 'integer', 'minimum': 1},
    },
    'required': ['alpha', 'beta', 'num_cores'],
    'additionalProperties': False,
}

# the generic kind takes a weight, the family kinds take positive (or null) parameters
CLUSTER_PARAMETERS_RULE = {
    'if': {'properties': {'kind': {'const': 'generic'}}},
    'then': {'properties': {'parameters': GENERIC_PARAMETERS_SCHEMA}},
    'else': {
        'properties': {
            'parameters': {'type': 'object', 'additionalProperties': POSITIVE_OR_NULL}
        }
    },
}


SCENARIO_SCHEMAS = {
    'equilibria': {
        'type': 'object',
        'properties': {'families': {'type': 'array', 'items': FAMILY_SCHEMA, 'minItems': 1}},
        'additionalProperties': False,
    },
    'simulate': {
        'type': 'object',
        'properties': {
            'family': FAMILY_SCHEMA,

            # X_j(s) is multiplied by 1 + amplitude cos(mode*2 pi s/period + j)
            # (zero amplitude keeps the exact rotating solution)
            'perturbation': {
                'type': 'object',
                'properties': {
                    'amplitude': {'type': 'number', 'minimum': 0},
                    'mode': {'type': 'integer', 'minimum': 0},
                },
                'additionalProperties': False,
            },
        },
        'additionalProperties': False,
    },
    'landscape': {
        'type': 'object',
        'properties': {
            'family': FAMILY_SCHEMA,

            # 1 to 5 (defaults to the case matching the family)
            'case_id': {'type': 'integer', 'minimum': 1, 'maximum': 5},

            # relative offset of the start from the family's own radii
            'perturbation': {'type': 'number'},

            # H_N for a generic helical weight instead of a case landscape
            'generic': {
                'type': 'object',
                'properties': {
                    'alpha': {'type': 'number'},
                    'beta': POSITIVE,
                    'num_cores': {'type': 'integer', 'minimum': 2},
                    'pitch': POSITIVE,
                },
                'required': ['alpha', 'beta', 'num_cores'],
                'additionalProperties': False,
            },
        },
        'additionalProperties': False,
    },
    'green': {
        'type': 'object',
        'properties': {
            'field': {
                'type': 'object',
                'properties': {'kind': {'enum': ['helical', 'identity']}, 'pitch': POSITIVE},
                'additionalProperties': False,
            },
            'source': POINT,
            'probes': {'type': 'array', 'items': POINT},

            # ring radii of the corrector probe, in grid spacings (largest first)
            'ring_spacings': {'type': 'array', 'items': {'type': 'integer', 'minimum': 1}},
        },
        'additionalProperties': False,
    },
    'solve': {
        'type': 'object',
        'properties': {
            **CLUSTER_SCENARIO_PROPERTIES,

            # points (x1, x2, x3) at which to sample the lifted vorticity, and the time
            'lift_samples': {
                'type': 'array',
                'items': {'type': 'array', 'items': {'type': 'number'}, 'minItems': 3, 'maxItems': 3},
            },
            'lift_time': {'type': 'number'},
        },
        'required': ['kind', 'epsilon'],
        'additionalProperties': False,
        **CLUSTER_PARAMETERS_RULE,
    },
    'energy': {
        'type': 'object',
        'properties': {
            **CLUSTER_SCENARIO_PROPERTIES,

            # the epsilon ladder (the scenario's epsilon when omitted)
            'epsilons': {'type': 'array', 'items': EPSILON, 'minItems': 1},
        },
        'required': ['kind', 'epsilon'],
        'additionalProperties': False,
        **CLUSTER_PARAMETERS_RULE,
    },
}


def _settings_schema(properties):
    return {'type': 'object', 'properties': properties, 'additionalProperties': False}


RUN_CONFIG_SCHEMA = {
    'type': 'object',
    'properties': {
        'subcommand': {'enum': SUBCOMMANDS},

        # replaced by SCENARIO_SCHEMAS[subcommand] at validation
        'scenario': {'type': 'object'},

        'grid': _settings_schema({
            'half_width': POSITIVE,
            'num_points': {'type': 'integer', 'minimum': 9},
        }),

        'solver': _settings_schema({
            'linear': _settings_schema({
                'method': {'enum': ['cg', 'direct']},
                'rtol': POSITIVE,
                'max_iterations': {'type': ['integer', 'null'], 'minimum': 1},
            }),
            'picard': _settings_schema({
                'damping': {'type': 'number', 'exclusiveMinimum': 0, 'maximum': 1},
                'min_damping': POSITIVE,
                'rtol': POSITIVE,
                'max_sweeps': {'type': 'integer', 'minimum': 1},
                'newton_correction': {'type': 'boolean'},
            }),
            'qhat': _settings_schema({
                'damping': {'type': 'number', 'exclusiveMinimum': 0, 'maximum': 1},
                'rtol': POSITIVE,
                'max_sweeps': {'type': 'integer', 'minimum': 1},
            }),
            'integrator': _settings_schema({
                'dt': POSITIVE,
                'final_time': POSITIVE,
                'save_stride': {'type': 'integer', 'minimum': 1},
                'num_modes': {'type': 'integer', 'minimum': 8},
                'collision_floor': POSITIVE,
            }),
            'optimizer': _settings_schema({
                'tol': POSITIVE,
                'max_iterations': {'type': 'integer', 'minimum': 1},
                'multistart': {'type': 'boolean'},
                'num_seeds': {'type': 'integer', 'minimum': 0},
                'seed_spread': POSITIVE,
                'random_seed': {'type': 'integer', 'minimum': 0},
            }),
        }),

        'output': _settings_schema({

            # ignored when the command line passes --out
            'directory': {'type': 'string'},

            'formats': {
                'type': 'array', 'items': {'enum': EXPORT_FORMATS}, 'uniqueItems': True
            },
        }),
    },
    'required': ['subcommand'],
    'additionalProperties': False,
}


RunConfig = namedtuple('RunConfig', [
    'subcommand', 'scenario', 'grid', 'linear', 'picard', 'qhat', 'integrator', 'optimizer',
    'output', 'document',
])


def _line_of_key(text, path):
    '''
    The 1-based line on which the last key of path appears, following the keys in order
    (None when the key is not in the text, e.g. when it came from an override)
    '''
    if not text:
        return None
    lines = text.splitlines()
    line, found = 0, None
    for key in path:
        if not isinstance(key, str):
            continue
        pattern = re.compile(r'"%s"\s*:' % re.escape(key))
        found = None
        for ind in range(line, len(lines)):
            if pattern.search(lines[ind]):
                found = line = ind
                break
        if found is None:
            return None
    return None if found is None else found + 1


def _offending_path(error):
    '''
    The path of the key a jsonschema error is about
    (for unexpected keys, the path of the first unexpected key)
    '''
    path = list(error.absolute_path)
    if error.validator == 'additionalProperties' and isinstance(error.instance, dict):
        allowed = set(error.schema.get('properties', {}))
        unexpected = sorted(key for key in error.instance if key not in allowed)
        if unexpected:
            path.append(unexpected[0])
    elif error.validator == 'required':
        match = re.match(r"'(.+)' is a required property", error.message)
        if match:
            path.append(match.group(1))
    return path


def config_schema(subcommand):
    schema = dict(RUN_CONFIG_SCHEMA)
    schema['properties'] = dict(schema['properties'])
    if subcommand in SCENARIO_SCHEMAS:
        schema['properties']['scenario'] = SCENARIO_SCHEMAS[subcommand]
    return schema


def validate_document(document, text=None):
    '''
    Validate a config document, raising a ValidationError for the first (deepest) problem
    '''
    if not isinstance(document, dict):
        raise ValidationError('The run config must be a JSON object')

    subcommand = document.get('subcommand')
    validator = jsonschema.Draft7Validator(config_schema(subcommand))
    errors = list(validator.iter_errors(document))
    if errors:
        error = max(errors, key=lambda error: len(error.absolute_path))
        path = _offending_path(error)
        key = '.'.join(str(item) for item in path) or '<root>'
        line = _line_of_key(text, path)
        location = '%s (line %d)' % (key, line) if line else key
        raise ValidationError(
            'Invalid run config at %s: %s' % (location, error.message), key=key, line=line
        )

    num_points = document.get('grid', {}).get('num_points')
    if num_points is not None and (num_points - 1) & (num_points - 2):
        line = _line_of_key(text, ['grid', 'num_points'])
        raise ValidationError(
            'Invalid run config at grid.num_points%s: %d is not a power of two plus one'
            % (' (line %d)' % line if line else '', num_points),
            key='grid.num_points', line=line
        )


def parse_override(override):
    '''
    'a.b.c=value' as (['a', 'b', 'c'], value), with the value parsed as a JSON literal
    and falling back to the raw string
    '''
    if '=' not in override:
        raise ValidationError("Overrides take the form key.path=value (got '%s')" % override)
    key, raw = override.split('=', 1)
    path = [item for item in key.strip().split('.') if item]
    if not path:
        raise ValidationError("Empty key in override '%s'" % override)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return path, value


def apply_overrides(document, overrides):
    document = json.loads(json.dumps(document))
    for override in overrides or []:
        path, value = parse_override(override)
        target = document
        for key in path[:-1]:
            if not isinstance(target.setdefault(key, {}), dict):
                raise ValidationError(
                    "The override '%s' descends into a non-object" % override, key='.'.join(path)
                )
            target = target[key]
        target[path[-1]] = value
    return document


def make_run_config(document):
    '''
    The validated document merged with the default settings
    '''
    solver = document.get('solver', {})
    output = document.get('output', {})
    return RunConfig(
        subcommand=document['subcommand'],
        scenario=document.get('scenario', {}),
        grid=run_settings.grid_settings._replace(**document.get('grid', {})),
        linear=run_settings.linear_solver_settings._replace(**solver.get('linear', {})),
        picard=run_settings.picard_settings._replace(**solver.get('picard', {})),
        qhat=run_settings.qhat_settings._replace(**solver.get('qhat', {})),
        integrator=run_settings.integrator_settings._replace(**solver.get('integrator', {})),
        optimizer=run_settings.optimizer_settings._replace(**solver.get('optimizer', {})),
        output=run_settings.output_settings._replace(
            **{key: value for key, value in output.items() if key == 'formats'}
        ),
        document=document,
    )


def load_config(filepath, overrides=None):
    '''
    Read, patch and validate the run config at filepath
    '''
    with open(filepath, 'r') as file:
        text = file.read()
    return parse_config(text, overrides=overrides)


def parse_config(text, overrides=None):
    try:
        document = json.loads(text)
    except json.JSONDecodeError as error:
        raise ValidationError(
            'The run config is not valid JSON (line %d): %s' % (error.lineno, error.msg),
            line=error.lineno
        )
    document = apply_overrides(document, overrides)
    validate_document(document, text=text)
    return make_run_config(document)


def config_hash(config):
    return utils.config_hash(config.document)


def family_from_block(block):
    '''
    A HelicalFamily from a config family block
    '''
    return helical_equilibria.make_family(
        block['case'],
        pitch=float(block.get('pitch', 1.0)),
        global_phase=float(block.get('global_phase', 0.0)),
        **block['parameters']
    )


def family_to_block(family):
    return {
        'case': family.case,
        'pitch': family.pitch,
        'global_phase': family.global_phase,
        'parameters': utils.to_jsonable(dict(family.parameters)),
    }
