"""
Common helpers: exception classes, verbose logging and small array utilities.
"""

from __future__ import absolute_import, division, print_function, unicode_literals

import os
import json

import numpy as np

class DMACError(Exception):
    """Base class for all errors raised by the package"""
    pass

class ConfigurationError(DMACError, ValueError):
    """
    Invalid configuration. May carry the offending `key` and the `line`
    of the configuration file where it was found.
    """
    def __init__(self, message, key=None, line=None):
        self.message = message
        self.key = key
        self.line = line

        prefix = []
        if key is not None:
            prefix.append("key '%s'" % key)
        if line is not None:
            prefix.append('line %d' % line)

        if prefix:
            message = '%s: %s' % (', '.join(prefix), message)

        super().__init__(message)

class ParameterError(DMACError, ValueError):
    """Invalid physical parameter of a plant"""
    pass

class DimensionError(DMACError, ValueError):
    """Array shapes do not match"""
    pass

class NumericalBreakdownError(DMACError, ArithmeticError):
    """Recursive least squares normalization became non-positive"""
    def __init__(self, message, gamma=None):
        self.gamma = gamma
        super().__init__(message)

class SynthesisError(DMACError, ArithmeticError):
    """Riccati iteration did not converge"""
    def __init__(self, message, residual=None, iterations=None):
        self.residual = residual
        self.iterations = iterations
        super().__init__(message)

class DivergenceError(DMACError, ArithmeticError):
    """Plant state became non-finite"""
    def __init__(self, message, step=None):
        self.step = step
        super().__init__(message)

def get_log(verbose=False):
    """
    Returns a `print`-like logging function for the `verbose` argument convention
    used throughout the package: `verbose` may be boolean, or a `print`-like function.
    """
    # Simple wrapper around print for logging in verbose mode only
    return (verbose if callable(verbose) else print) if verbose else lambda *args,**kwargs: None

def as_column(vec, length=None, name='vector'):
    """
    Converts the input to 1d float array, optionally checking its length
    """
    vec = np.atleast_1d(np.asarray(vec, dtype=np.double)).ravel()

    if length is not None and vec.shape[0] != length:
        raise DimensionError('%s must have length %d, got %d' % (name, length, vec.shape[0]))

    return vec

def as_matrix(mat, shape=None, name='matrix'):
    """
    Converts the input to 2d float array, optionally checking its shape.
    Scalars become 1x1 matrices.
    """
    mat = np.asarray(mat, dtype=np.double)
    if mat.ndim == 0:
        mat = mat.reshape(1, 1)

    if mat.ndim != 2:
        raise DimensionError('%s must be two-dimensional, got shape %s' % (name, mat.shape))

    if shape is not None and mat.shape != tuple(shape):
        raise DimensionError('%s must have shape %s, got %s' % (name, tuple(shape), mat.shape))

    return mat

def scaled_identity(value, size, name='matrix'):
    """
    Returns `value` times identity of a given size if `value` is a scalar,
    or checks and returns `value` as a `size` x `size` matrix otherwise
    """
    if np.isscalar(value) or np.ndim(value) == 0:
        return float(value)*np.eye(size)
    else:
        return as_matrix(value, shape=(size, size), name=name)

def selector_matrix(indices, size):
    """
    Builds 0/1 selector matrix picking given (0-based) indices out of a vector of length `size`
    """
    indices = list(indices)
    S = np.zeros((len(indices), size))

    for row,idx in enumerate(indices):
        if idx < 0 or idx >= size:
            raise DimensionError('selector index %d out of range for length %d' % (idx, size))
        S[row, idx] = 1

    return S

def is_selector(S):
    """
    Checks whether the matrix has exactly one unit entry per row and zeros elsewhere
    """
    S = np.asarray(S)
    if S.ndim != 2:
        return False

    return bool(np.all((S == 0) | (S == 1)) and np.all(np.sum(S == 1, axis=1) == 1))

def relative_error(a, b, floor=1e-12):
    """
    Frobenius norm of the difference relative to the norm of `b`, with a floor
    """
    a = np.asarray(a, dtype=np.double)
    b = np.asarray(b, dtype=np.double)

    return np.linalg.norm(a - b)/max(np.linalg.norm(b), floor)

def file_write(filename, contents=None, append=False):
    """
    Simple utility for writing some contents into file.
    """

    with open(filename, 'a' if append else 'w') as f:
        if contents is not None:
            f.write(contents)

def json_write(filename, data):
    """
    Writes the dictionary to JSON file, converting NumPy scalars and arrays on the way
    """
    def convert(value):
        if isinstance(value, np.ndarray):
            return value.tolist()
        elif isinstance(value, np.generic):
            return value.item()
        raise TypeError('Cannot serialize %r' % (value,))

    file_write(filename, json.dumps(data, indent=2, sort_keys=True, default=convert) + '\n')

def make_dirs(path):
    """
    Creates the directory if it does not exist yet, and returns its path
    """
    if path and not os.path.exists(path):
        os.makedirs(path)

    return path
