"""
Declarative experiment configuration: YAML files, benchmark presets and command-line overrides.

A configuration is a flat mapping with the keys listed in :data:`KNOWN_KEYS`. It may start from one of
the :data:`PRESETS` (key `preset`), and any key may then be overridden.
"""

from __future__ import absolute_import, division, print_function, unicode_literals

import os
import copy

import numpy as np
import yaml

from .harness import ExperimentSpec, SweepSpec
from .plants import IntegratorConfig
from .utils import ConfigurationError, ParameterError

KNOWN_KEYS = ['preset', 'plant', 'params', 'T_s', 'duration', 'reference',
              'lambda', 'R_theta', 'R_1', 'R_2', 'sigma_v', 'warmup_steps',
              'gain_cadence', 'substeps', 'seed', 'dare_method',
              'sweep_axis', 'sweep_values', 'seed_policy', 'name']

# Values common to all presets
DEFAULTS = {
    'reference': 1.0, # unit step reference in every benchmark
    'sigma_v': 1e-2,
    'warmup_steps': 10,
    'gain_cadence': 1,
    'substeps': 20,
    'seed': 0,
    'dare_method': 'doubling',
    'seed_policy': 'fixed',
}

PRESETS = {
    # Mass-spring-damper
    'mck': {
        'plant': 'mck',
        'params': {'m': 1.0, 'c': 0.5, 'k': 2.0}, # m = 1, c = 0.5, k = 2
        'T_s': 0.1, # control updated every 0.1 s
        'duration': 60.0,
        'lambda': 0.995,
        'R_theta': 100.0, # 10^2 I_3
        'R_1': 1.0, # I_3
        'R_2': 1.0,
    },
    # Three masses in series, output q_3, measured [q_1, q_3, dq_1/dt]
    'three_mass': {
        'plant': 'three_mass',
        'params': {'m': 1.0, 'k': 2.0}, # m = 1, k = 2
        'T_s': 0.1,
        'duration': 100.0,
        'lambda': 0.999,
        'R_theta': 100.0, # 10^2 I_4
        'R_1': 1.0, # I_4
        'R_2': 1.0,
    },
    # Van der Pol oscillator
    'vdp': {
        'plant': 'vdp',
        'params': {'mu': 1.0}, # mu = 1
        'T_s': 0.1,
        'duration': 60.0,
        'lambda': 0.995,
        'R_theta': 100.0, # 10^2 I_3
        'R_1': 1.0, # I_3
        'R_2': 1.0,
    },
    # Viscous Burgers equation on a periodic grid, sparse sensors, single actuator
    'burgers': {
        'plant': 'burgers',
        'params': {'nu': 0.1, 'N': 100, # N = 100, nu = 0.1
                   'sensors': [1, 16, 31, 46, 61, 76, 91],
                   'actuator': 55,
                   'output': 61}, # y = w_61
        'T_s': 0.01, # control updated every 0.01 s
        'duration': 10.0,
        'lambda': 0.9995,
        'R_theta': 100.0, # 10^2 I_8
        'R_1': 10.0, # 10 I_8
        'R_2': 0.1,
    },
}

def get_preset(name):
    """
    Returns the full configuration of the preset, with common defaults filled in
    """
    if name not in PRESETS:
        raise ConfigurationError('unknown preset %r, should be one of %s' % (name, ', '.join(PRESETS)), key='preset')

    config = copy.deepcopy(DEFAULTS)
    config.update(copy.deepcopy(PRESETS[name]))
    config['preset'] = name
    config['name'] = name

    return config

def parse_config_text(text, filename=None):
    """Parses YAML configuration text, rejecting unknown keys.

    :param text: YAML document
    :param filename: File name, only used in diagnostics
    :returns: Tuple of the configuration dictionary and the dictionary mapping keys to their (1-based) lines
    """
    try:
        node = yaml.compose(text)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        raise ConfigurationError('malformed YAML%s: %s' % (' in %s' % filename if filename else '',
                                                           getattr(e, 'problem', None) or e),
                                 line=mark.line + 1 if mark is not None else None)

    if node is None:
        return {}, {}

    if not isinstance(node, yaml.MappingNode):
        raise ConfigurationError('configuration must be a mapping of keys to values', line=node.start_mark.line + 1)

    lines = {}
    for key_node,_ in node.value:
        key = key_node.value
        line = key_node.start_mark.line + 1

        if key not in KNOWN_KEYS:
            raise ConfigurationError('unknown key', key=key, line=line)
        if key in lines:
            raise ConfigurationError('duplicate key', key=key, line=line)

        lines[key] = line

    config = yaml.safe_load(text)

    if 'params' in config and not isinstance(config['params'], dict):
        raise ConfigurationError('plant parameters must be a mapping', key='params', line=lines['params'])

    return config, lines

def parse_override(text):
    """
    Parses `key=value` override, with the value interpreted as YAML scalar or list.
    Returns the tuple of key and value; `params.name` keys address plant parameters.
    """
    if '=' not in text:
        raise ConfigurationError('override %r must have the form key=value' % text)

    key, value = text.split('=', 1)
    key = key.strip()

    base = key.split('.', 1)[0]
    if base not in KNOWN_KEYS or (base != 'params' and '.' in key) or key == 'params':
        raise ConfigurationError('unknown key in override %r' % text, key=key)

    try:
        value = yaml.safe_load(value)
    except yaml.YAMLError:
        raise ConfigurationError('cannot parse value %r' % value, key=key)

    return key, value

def apply_override(config, key, value):
    """
    Sets the value in the configuration dictionary, in place
    """
    if key.startswith('params.'):
        config.setdefault('params', {})[key[len('params.'):]] = value
    else:
        config[key] = value

    return config

def load_config(filename=None, preset=None, overrides=[], text=None):
    """Resolves the configuration from the preset, the configuration file and the overrides.

    The preset may be given either directly or through the `preset` key of the file.
    Plant parameters from the file are merged with the ones of the preset.

    :param filename: Name of YAML configuration file
    :param preset: Name of the preset to start from
    :param overrides: List of `key=value` strings
    :param text: YAML configuration text to be used instead of the file
    :returns: Tuple of the configuration dictionary and the dictionary mapping keys to their lines in the file
    """
    if filename is not None:
        try:
            with open(filename, 'r') as f:
                text = f.read()
        except OSError as e:
            raise ConfigurationError('cannot read configuration file %s: %s' % (filename, e.strerror))

    config, lines = parse_config_text(text, filename) if text is not None else ({}, {})

    preset = config.get('preset', preset)

    if preset is not None:
        result = get_preset(preset)
    else:
        result = copy.deepcopy(DEFAULTS)

    for key,value in config.items():
        if key == 'params':
            result.setdefault('params', {}).update(value)
        else:
            result[key] = value

    for text in overrides:
        key, value = parse_override(text)
        apply_override(result, key, value)

    if 'plant' not in result:
        raise ConfigurationError('plant is not set, and no preset given', key='plant')

    return result, lines

def _number(config, key, lines, kind=float):
    try:
        value = kind(config[key])
    except (TypeError, ValueError):
        raise ConfigurationError('must be a number, got %r' % (config[key],), key=key, line=lines.get(key))

    if kind is int and value != config[key]:
        raise ConfigurationError('must be an integer, got %r' % (config[key],), key=key, line=lines.get(key))

    return value

def _weight(config, key, lines):
    value = config[key]

    if np.ndim(value) == 0:
        return _number(config, key, lines)

    try:
        return np.array(value, dtype=np.double)
    except (TypeError, ValueError):
        raise ConfigurationError('must be a number or a matrix', key=key, line=lines.get(key))

def make_experiment(config, lines={}):
    """
    Converts the resolved configuration to :class:`~dmac.harness.ExperimentSpec`
    """
    config = dict(DEFAULTS, **config)

    for key in ['T_s', 'duration', 'lambda', 'R_theta', 'R_1', 'R_2']:
        if key not in config:
            raise ConfigurationError('required key is missing', key=key)

    try:
        integrator = IntegratorConfig(substeps=_number(config, 'substeps', lines, int))
    except ParameterError as e:
        raise ConfigurationError(str(e), key='substeps', line=lines.get('substeps'))

    return ExperimentSpec(name=str(config.get('name') or config['plant']),
                          plant=config['plant'],
                          params=dict(config.get('params') or {}),
                          T_s=_number(config, 'T_s', lines),
                          duration=_number(config, 'duration', lines),
                          reference=config['reference'],
                          forgetting=_number(config, 'lambda', lines),
                          R_theta=_weight(config, 'R_theta', lines),
                          R_1=_weight(config, 'R_1', lines),
                          R_2=_weight(config, 'R_2', lines),
                          sigma_v=_number(config, 'sigma_v', lines),
                          warmup_steps=_number(config, 'warmup_steps', lines, int),
                          gain_cadence=_number(config, 'gain_cadence', lines, int),
                          dare_method=str(config['dare_method']),
                          integrator=integrator,
                          seed=_number(config, 'seed', lines, int))

def make_sweep(config, lines={}):
    """
    Converts the resolved configuration to :class:`~dmac.harness.SweepSpec`; `sweep_axis` and `sweep_values` must be set
    """
    if not config.get('sweep_axis'):
        raise ConfigurationError('sweep axis is not set', key='sweep_axis')

    values = config.get('sweep_values')
    if values is None or np.ndim(values) == 0:
        values = [values] if values is not None else []
    if not len(values):
        raise ConfigurationError('list of sweep values is empty', key='sweep_values', line=lines.get('sweep_values'))

    return SweepSpec(base=make_experiment(config, lines),
                     axis=str(config['sweep_axis']),
                     values=tuple(values),
                     seed_policy=str(config['seed_policy']))

def locate(error, lines):
    """
    Returns configuration error with the line number filled from `lines` if it was not set
    """
    if error.line is None and error.key in lines:
        return ConfigurationError(error.message, key=error.key, line=lines[error.key])

    return error

def dump_config(config):
    """
    Human-readable YAML representation of the resolved configuration
    """
    return yaml.safe_dump(config, sort_keys=False, default_flow_style=None)

def default_out_dir():
    """
    Default output directory, taken from `DMAC_OUT_DIR` environment variable
    """
    return os.environ.get('DMAC_OUT_DIR', '.')
