import json
import hashlib
import datetime
from importlib import metadata

import git
import numpy as np


def timestamp():
    return datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S')


def null_logger(message, newline=False):
    pass


# 17 significant digits round-trip any float64 exactly
FLOAT_FORMAT = '%.17g'


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(',', ':'))


def config_hash(config):
    '''
    sha256 of the canonical JSON form of a config dict
    '''
    return hashlib.sha256(canonical_json(config).encode('utf-8')).hexdigest()


def current_git_commit(path='.'):
    '''
    The hexsha of the current commit, or None if path is not in a git repo
    '''
    try:
        repo = git.Repo(path, search_parent_directories=True)
        return repo.commit().hexsha
    except Exception:
        return None


def package_versions():
    '''
    The installed versions of the packages the results depend on (None when missing)
    '''
    versions = {}
    for name in ['numpy', 'scipy', 'pandas', 'scikit-image', 'dask', 'jsonschema']:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def as_point(x):
    '''
    Coerce a 2-vector (list, tuple, array, or complex number) to a float array of shape (2,)
    '''
    if isinstance(x, complex):
        return np.array([x.real, x.imag])
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape != (2,):
        raise ValueError('Expected a 2-vector but got shape %s' % (x.shape,))
    return x


def from_complex(z):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    return np.stack([z.real, z.imag], axis=-1)


def to_jsonable(value):
    '''
    Recursively convert numpy scalars and arrays (and complex numbers, as {re, im}) to JSON types
    '''
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return {'re': value.real.tolist(), 'im': value.imag.tolist()}
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    if isinstance(value, (complex, np.complexfloating)):
        return {'re': float(value.real), 'im': float(value.imag)}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    return value
