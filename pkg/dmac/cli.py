"""
Command-line front end: `dmac run`, `dmac sweep`, `dmac validate` and `dmac list-presets`.

Exit codes: 0 if the run (every run of the sweep) converged, 2 if any run diverged, 3 if runs completed
without reaching the convergence threshold, and 1 on configuration errors.
"""

from __future__ import absolute_import, division, print_function, unicode_literals

import os
import sys
import argparse

from astropy.table import Table

from . import config as dmac_config
from .harness import run_experiment, run_sweep, validate_spec, spec_with_value
from .harness import write_log, write_summary, log_filename
from .utils import ConfigurationError, get_log, make_dirs

EXIT_CONVERGED = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_NOT_CONVERGED = 3

def _warn(message):
    print('warning:', message, file=sys.stderr)

def _resolve(config_path, overrides, preset=None, seed=None):
    overrides = list(overrides or [])
    if seed is not None:
        overrides.append('seed=%d' % seed)

    if config_path is None and preset is None:
        raise ConfigurationError('either --preset or --config must be given')

    return dmac_config.load_config(config_path, preset=preset, overrides=overrides)

def _exit_code(summaries):
    if any(_['diverged'] for _ in summaries):
        return EXIT_DIVERGED
    if all(_['converged'] for _ in summaries):
        return EXIT_CONVERGED

    return EXIT_NOT_CONVERGED

def _summary_table(summaries, values=None, axis=None):
    rows = []
    for i,summary in enumerate(summaries):
        row = {}
        if axis is not None:
            row[axis] = str(values[i])
        row['steps'] = summary['steps']
        row['final_abs_z'] = summary['final_abs_z']
        row['max_abs_u'] = summary['max_abs_u']
        row['settle_step'] = -1 if summary['settle_step'] is None else summary['settle_step']
        row['decay_rate'] = summary['decay_rate']
        row['converged'] = summary['converged']
        row['diverged'] = summary['diverged']
        rows.append(row)

    table = Table(rows=rows)
    for name in ['final_abs_z', 'max_abs_u', 'decay_rate']:
        table[name].format = '.3g'

    return table

def _check_run(result):
    summary = result.meta.get('summary')

    if summary is None:
        summary = dict(steps=0, final_abs_z=float('nan'), max_abs_u=float('nan'), settle_step=None,
                       decay_rate=float('nan'), synthesis_failures=0, diverged=True, converged=False)

    if result.meta['diverged']:
        _warn('%s: run diverged at step %s' % (result.meta['name'], result.meta['divergence_step']))
    if summary['synthesis_failures']:
        _warn('%s: gain synthesis failed at %d steps, previous gains were kept' %
              (result.meta['name'], summary['synthesis_failures']))

    return summary

def cmd_run(config_path=None, overrides=[], out_dir=None, preset=None, seed=None, verbose=False):
    """Runs a single experiment, and writes its log (CSV) and summary (JSON).

    :param config_path: YAML configuration file, or `None` to use the preset only
    :param overrides: List of `key=value` overrides
    :param out_dir: Output directory, `DMAC_OUT_DIR` or current one if not set
    :param preset: Preset name
    :param seed: Random seed, overriding the configured one
    :param verbose: Whether to show verbose messages or not. May be either boolean, or a `print`-like function.
    :returns: Exit code
    """
    log = get_log(verbose)

    config, lines = _resolve(config_path, overrides, preset=preset, seed=seed)
    try:
        spec = dmac_config.make_experiment(config, lines)
        validate_spec(spec)
    except ConfigurationError as e:
        raise dmac_config.locate(e, lines)

    out_dir = make_dirs(out_dir or dmac_config.default_out_dir())

    result = run_experiment(spec, verbose=verbose)
    summary = _check_run(result)

    filename = os.path.join(out_dir, log_filename(spec.name, 'run', 'nominal', spec.seed))
    jsonname = os.path.join(out_dir, log_filename(spec.name, 'run', 'nominal', spec.seed, ext='json'))

    write_log(result, filename)
    write_summary(summary, jsonname, extra=dict(name=spec.name, seed=spec.seed,
                                                   divergence_step=result.meta['divergence_step']))
    log('Run log written to', filename)
    log('Summary written to', jsonname)

    _summary_table([summary]).pprint(max_width=-1)

    return _exit_code([summary])

def cmd_sweep(config_path=None, overrides=[], out_dir=None, preset=None, seed=None, jobs=1, verbose=False):
    """Runs the parameter sweep defined by `sweep_axis` and `sweep_values` keys of the configuration.

    Writes the log and the JSON summary of every run, and the summary table of the sweep.

    :param config_path: YAML configuration file, or `None` to use the preset with overrides only
    :param overrides: List of `key=value` overrides
    :param out_dir: Output directory, `DMAC_OUT_DIR` or current one if not set
    :param preset: Preset name
    :param seed: Random seed, overriding the configured one
    :param jobs: Number of worker processes
    :param verbose: Whether to show verbose messages or not. May be either boolean, or a `print`-like function.
    :returns: Exit code
    """
    log = get_log(verbose)

    config, lines = _resolve(config_path, overrides, preset=preset, seed=seed)
    try:
        sweep = dmac_config.make_sweep(config, lines)
        validate_spec(sweep.base)
    except ConfigurationError as e:
        raise dmac_config.locate(e, lines)

    out_dir = make_dirs(out_dir or dmac_config.default_out_dir())

    logs, table = run_sweep(sweep, jobs=jobs, verbose=verbose)

    summaries = []
    for result,value in zip(logs, sweep.values):
        summary = _check_run(result)
        summaries.append(summary)
        seed = result.meta['seed']

        filename = os.path.join(out_dir, log_filename(sweep.base.name, sweep.axis, value, seed))
        jsonname = os.path.join(out_dir, log_filename(sweep.base.name, sweep.axis, value, seed, ext='json'))

        write_log(result, filename)
        write_summary(summary, jsonname, extra=dict(name=sweep.base.name, seed=seed, axis=sweep.axis, value=value,
                                                   divergence_step=result.meta['divergence_step']))
        log('Run log written to', filename)

    filename = os.path.join(out_dir, '%s_%s_summary.csv' % (sweep.base.name, sweep.axis))
    table.write(filename, format='ascii.csv', overwrite=True)
    log('Sweep summary written to', filename)

    _summary_table(summaries, values=sweep.values, axis=sweep.axis).pprint(max_width=-1, max_lines=-1)

    return _exit_code(summaries)

def cmd_validate(config_path=None, overrides=[], preset=None, seed=None):
    """
    Parses and checks the configuration without running it, and prints the resolved configuration.
    Returns the exit code.
    """
    config, lines = _resolve(config_path, overrides, preset=preset, seed=seed)

    try:
        if config.get('sweep_axis'):
            sweep = dmac_config.make_sweep(config, lines)
            for value in sweep.values:
                validate_spec(spec_with_value(sweep.base, sweep.axis, value))
            spec = sweep.base
        else:
            spec = dmac_config.make_experiment(config, lines)

        plant, _ = validate_spec(spec)
    except ConfigurationError as e:
        raise dmac_config.locate(e, lines)

    print(dmac_config.dump_config(config), end='')
    print('# plant %s: full state %d, measured state %d, input %d, output %d, %d steps' %
          (plant.name, plant.full_state_dim, plant.state_dim, plant.input_dim, plant.output_dim, spec.steps))

    return EXIT_CONVERGED

def cmd_list_presets():
    """
    Prints the table of available presets with their key values
    """
    rows = []
    for name in dmac_config.PRESETS:
        preset = dmac_config.get_preset(name)
        rows.append(dict(preset=name,
                         plant=preset['plant'],
                         params=', '.join('%s=%s' % (k, v) for k,v in preset['params'].items()),
                         T_s=preset['T_s'],
                         duration=preset['duration'],
                         lam=preset['lambda'],
                         R_theta=preset['R_theta'],
                         R_1=preset['R_1'],
                         R_2=preset['R_2']))

    table = Table(rows=rows)
    table.rename_column('lam', 'lambda')
    table.pprint(max_width=-1, max_lines=-1)

    return EXIT_CONVERGED

def make_parser():
    parser = argparse.ArgumentParser(prog='dmac', description='Dynamic mode adaptive control simulator')
    subparsers = parser.add_subparsers(dest='command', metavar='command')
    subparsers.required = True

    def add_common(sub, out=True):
        sub.add_argument('--preset', choices=sorted(dmac_config.PRESETS), help='Preset to start from')
        sub.add_argument('--config', help='YAML configuration file')
        sub.add_argument('--set', dest='overrides', action='append', default=[], metavar='KEY=VALUE',
                         help='Override configuration value, may be repeated; params.NAME sets plant parameter')
        sub.add_argument('--seed', type=int, default=None, help='Random seed')
        if out:
            sub.add_argument('--out', default=None, help='Output directory, $DMAC_OUT_DIR by default')
        sub.add_argument('-v', '--verbose', action='store_true', help='Verbose output')

    add_common(subparsers.add_parser('run', help='Run single experiment'))

    sub = subparsers.add_parser('sweep', help='Run parameter sweep')
    add_common(sub)
    sub.add_argument('--jobs', type=int, default=1, help='Number of worker processes')

    add_common(subparsers.add_parser('validate', help='Check configuration without running it'), out=False)

    subparsers.add_parser('list-presets', help='List available presets')

    return parser

def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == 'run':
            return cmd_run(args.config, args.overrides, args.out, preset=args.preset, seed=args.seed, verbose=args.verbose)
        elif args.command == 'sweep':
            return cmd_sweep(args.config, args.overrides, args.out, preset=args.preset, seed=args.seed,
                             jobs=args.jobs, verbose=args.verbose)
        elif args.command == 'validate':
            return cmd_validate(args.config, args.overrides, preset=args.preset, seed=args.seed)
        else:
            return cmd_list_presets()
    except ConfigurationError as e:
        print('configuration error:', e, file=sys.stderr)
        return EXIT_CONFIG

if __name__ == '__main__':
    sys.exit(main())
