import os
import sys
import json
import argparse

HERE = os.path.abspath(os.path.dirname(__file__))
REPO_ROOT = os.path.join(HERE, os.pardir)

sys.path.insert(0, REPO_ROOT)
from helical_filaments.errors import ValidationError
from helical_filaments.runs import scenario_runs
from helical_filaments.runs.config import load_config


def parse_args(argv=None):
    '''
    '''
    parser = argparse.ArgumentParser(
        description='Run one scenario (equilibria, simulate, landscape, green, solve or energy)'
    )

    # the JSON run config (see doc/run-config-schema.json)
    parser.add_argument('--config', dest='config', type=str, required=True)

    # the run directory (defaults to output.directory in the config)
    parser.add_argument('--out', dest='out', type=str, default=None, required=False)

    # patches of the config document, e.g. --override grid.num_points=129
    parser.add_argument(
        '--override', dest='overrides', type=str, action='append', default=[], required=False
    )

    # CLI args whose presence in the command sets them to True
    action_arg_names = ['overwrite', 'quiet']

    for arg_name in action_arg_names:
        parser.add_argument(
            '--%s' % arg_name.replace('_', '-'),
            dest=arg_name,
            action='store_true',
            required=False
        )

    for arg_name in action_arg_names:
        parser.set_defaults(**{arg_name: False})

    args = parser.parse_args(argv)
    return args


def report_error(error):
    print('ERROR: %s' % error.message, file=sys.stderr)
    print(json.dumps(error.to_dict(), sort_keys=True), file=sys.stderr)
    return error.exit_code


def main(argv=None):

    args = parse_args(argv)

    try:
        config = load_config(args.config, overrides=args.overrides)
    except OSError as error:
        return report_error(ValidationError('Cannot read the run config: %s' % error))
    except ValidationError as error:
        return report_error(error)

    out_dir = args.out or config.document.get('output', {}).get('directory')
    if out_dir is None:
        return report_error(
            ValidationError('No run directory: pass --out or set output.directory', key='output')
        )

    try:
        return scenario_runs.run_scenario(
            config, out_dir, overwrite=args.overwrite, verbose=not args.quiet
        )
    except ValidationError as error:
        return report_error(error)


if __name__ == '__main__':
    sys.exit(main())
