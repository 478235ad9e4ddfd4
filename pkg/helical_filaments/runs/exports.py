'''
Bit-stable artifact writers

JSON floats are written by repr (the shortest string that round-trips the float64 exactly),
CSV floats with 17 significant digits, and grids in the little-endian dump of elliptic.grid.
No writer adds timestamps, so identical inputs give byte-identical files.

'''

import json
import os
import platform

import pandas as pd

from helical_filaments import utils
from helical_filaments.elliptic import grid as grid_io
from helical_filaments.elliptic.grid import ScalarField

EXPORT_FORMATS = ['csv', 'json', 'binary-grid']

EXTENSIONS = {'csv': 'csv', 'json': 'json', 'binary-grid': 'bin'}


def _write_json(obj, filepath):
    with open(filepath, 'w') as file:
        json.dump(utils.to_jsonable(obj), file, indent=2, sort_keys=True, allow_nan=True)
        file.write('\n')


def _write_csv(obj, filepath):
    if isinstance(obj, ScalarField):
        grid_io.write_csv(obj, filepath)
        return
    if not isinstance(obj, pd.DataFrame):
        obj = pd.DataFrame(obj)
    obj.to_csv(filepath, index=False, float_format=utils.FLOAT_FORMAT)


def export(report, out_dir, name, fmt):
    '''
    Write report to out_dir/<name>.<extension> in the given format and return the filepath

    report : a JSON-ready object (json), a DataFrame or list of row dicts (csv),
        or a ScalarField (csv or binary-grid)
    '''
    if fmt not in EXPORT_FORMATS:
        raise ValueError("Unknown export format '%s'" % fmt)

    filepath = os.path.join(out_dir, '%s.%s' % (name, EXTENSIONS[fmt]))
    if fmt == 'json':
        _write_json(report, filepath)
    elif fmt == 'csv':
        _write_csv(report, filepath)
    else:
        if not isinstance(report, ScalarField):
            raise ValueError('Only scalar fields have a binary grid dump')
        grid_io.write_binary_grid(report, filepath)
    return filepath


def export_all(report, out_dir, name, formats):
    '''
    export in each of formats (a list), skipping the formats report has no form for
    '''
    filepaths = []
    for fmt in formats:
        if fmt == 'binary-grid' and not isinstance(report, ScalarField):
            continue
        if fmt == 'json' and isinstance(report, (ScalarField, pd.DataFrame)):
            continue
        filepaths.append(export(report, out_dir, name, fmt))
    return filepaths


def manifest(config_hash, subcommand, status, wall_time, git_commit=None):
    versions = utils.package_versions()
    versions['python'] = platform.python_version()
    return {
        'config_hash': config_hash,
        'git_commit': git_commit,
        'versions': versions,
        'wall_time_seconds': wall_time,
        'subcommand': subcommand,
        'status': status,
    }


def write_manifest(out_dir, **kwargs):
    filepath = os.path.join(out_dir, 'manifest.json')
    _write_json(manifest(**kwargs), filepath)
    return filepath
