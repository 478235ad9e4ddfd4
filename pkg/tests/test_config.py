import json

import pytest

from helical_filaments.errors import ValidationError
from helical_filaments.filaments import helical_equilibria
from helical_filaments.runs import config, run_settings


SOLVE_CONFIG = '''{
  "subcommand": "solve",
  "scenario": {
    "kind": "polygon",
    "epsilon": 0.04,
    "parameters": {
      "n": 2,
      "kappa": -6.283185307179586,
      "radius": 1.0
    }
  },
  "grid": {"half_width": 1.0, "num_points": 129}
}
'''


def valid_solve_config():
    return SOLVE_CONFIG.replace('-6.28', '6.28')


def test_negative_circulation_names_the_key_and_line():
    with pytest.raises(ValidationError) as excinfo:
        config.parse_config(SOLVE_CONFIG)
    error = excinfo.value
    assert error.exit_code == 2
    assert error.payload['key'] == 'scenario.parameters.kappa'
    assert error.payload['line'] == 8
    assert 'scenario.parameters.kappa (line 8)' in error.message


def test_unknown_keys_are_rejected():
    text = valid_solve_config().replace('"epsilon": 0.04', '"epsilon": 0.04, "epsilom": 0.1')
    with pytest.raises(ValidationError) as excinfo:
        config.parse_config(text)
    assert excinfo.value.payload['key'] == 'scenario.epsilom'
    assert excinfo.value.payload['line'] == 5

    with pytest.raises(ValidationError) as excinfo:
        config.parse_config('{"subcommand": "green", "solver": {"picard": {"sweeps": 3}}}')
    assert excinfo.value.payload['key'] == 'solver.picard.sweeps'


def test_missing_required_key():
    with pytest.raises(ValidationError) as excinfo:
        config.parse_config('{"subcommand": "solve", "scenario": {"kind": "polygon"}}')
    assert excinfo.value.payload['key'] == 'scenario.epsilon'


def test_grid_size_must_be_a_power_of_two_plus_one():
    text = valid_solve_config().replace('129', '128')
    with pytest.raises(ValidationError) as excinfo:
        config.parse_config(text)
    assert excinfo.value.payload['key'] == 'grid.num_points'
    assert excinfo.value.payload['line'] == 12


def test_malformed_json():
    with pytest.raises(ValidationError) as excinfo:
        config.parse_config('{"subcommand": "solve",\n  "scenario": }')
    assert excinfo.value.payload['line'] == 2


def test_unknown_subcommand():
    with pytest.raises(ValidationError) as excinfo:
        config.parse_config('{"subcommand": "plot"}')
    assert excinfo.value.payload['key'] == 'subcommand'


def test_defaults_and_settings_merge():
    run_config = config.parse_config(valid_solve_config())
    assert run_config.subcommand == 'solve'
    assert run_config.grid.num_points == 129
    assert run_config.picard == run_settings.picard_settings
    assert run_config.output.formats == run_settings.output_settings.formats
    assert run_config.scenario['parameters']['kappa'] > 0


def test_overrides():
    run_config = config.parse_config(
        valid_solve_config(),
        overrides=[
            'grid.num_points=65',
            'solver.picard.max_sweeps=20',
            'solver.linear.method=direct',
            'scenario.parameters.n=3',
        ]
    )
    assert run_config.grid.num_points == 65
    assert run_config.picard.max_sweeps == 20
    assert run_config.linear.method == 'direct'
    assert run_config.scenario['parameters']['n'] == 3

    # overrides are validated too, without a line number
    with pytest.raises(ValidationError) as excinfo:
        config.parse_config(valid_solve_config(), overrides=['solver.picard.damping=2'])
    assert excinfo.value.payload['key'] == 'solver.picard.damping'
    assert excinfo.value.payload['line'] is None


def test_parse_override():
    assert config.parse_override('a.b=1e-3') == (['a', 'b'], 1e-3)
    assert config.parse_override('a=[1, 2]') == (['a'], [1, 2])
    assert config.parse_override('a=null') == (['a'], None)
    assert config.parse_override('a.b=cg') == (['a', 'b'], 'cg')
    with pytest.raises(ValidationError):
        config.parse_override('a.b')
    with pytest.raises(ValidationError):
        config.apply_overrides({'grid': 3}, ['grid.num_points=9'])


def test_config_hash_follows_the_document():
    first = config.parse_config(valid_solve_config())
    second = config.parse_config(valid_solve_config(), overrides=['grid.num_points=129'])
    third = config.parse_config(valid_solve_config(), overrides=['grid.num_points=65'])
    assert config.config_hash(first) == config.config_hash(second)
    assert config.config_hash(first) != config.config_hash(third)


def test_default_families_validate():
    document = {
        'subcommand': 'equilibria',
        'scenario': {'families': run_settings.default_families},
    }
    run_config = config.parse_config(json.dumps(document, indent=2))
    assert len(run_config.scenario['families']) == 5


def test_family_blocks_round_trip_through_the_parser():
    for block in run_settings.default_families:
        family = helical_equilibria.complete_family(config.family_from_block(block))
        document = {
            'subcommand': 'equilibria',
            'scenario': {'families': [config.family_to_block(family)]},
        }
        # the JSON form of the completed family is itself a valid config
        run_config = config.parse_config(json.dumps(document))
        (parsed,) = run_config.scenario['families']
        assert config.family_from_block(parsed) == family
