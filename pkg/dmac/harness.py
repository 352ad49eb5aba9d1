"""
Closed-loop sampled-data simulation of plants under the adaptive controller, and parameter sweeps.

The plant is propagated between samples with the control held constant (zero-order hold);
at every sample the measured state is passed to the controller, and everything is logged into
an :class:`astropy.table.Table` with one row per sample.
"""

from __future__ import absolute_import, division, print_function, unicode_literals

import inspect
import dataclasses
from dataclasses import dataclass, field
from multiprocessing import Pool

import numpy as np
from astropy.table import Table
import statsmodels.api as sm

from tqdm.auto import tqdm

from .estimator import EstimatorConfig, covariance_condition, snapshots_from_arrays
from .synthesis import LqrWeights, check_weights
from .controller import ControllerConfig, new_controller, controller_step
from .plants import PLANTS, PlantModel, IntegratorConfig, make_plant, rk4_propagate
from .utils import DMACError, ConfigurationError, ParameterError, DimensionError, DivergenceError, NumericalBreakdownError
from .utils import get_log, json_write

# Names of the hyperparameters that may be swept, mapped to ExperimentSpec fields
HYPERPARAMETERS = {
    'lambda': 'forgetting',
    'R_theta': 'R_theta',
    'R_1': 'R_1',
    'R_2': 'R_2',
    'sigma_v': 'sigma_v',
    'warmup_steps': 'warmup_steps',
    'gain_cadence': 'gain_cadence',
    'T_s': 'T_s',
    'duration': 'duration',
    'seed': 'seed',
}

@dataclass(frozen=True)
class ExperimentSpec:
    """Complete description of a single closed-loop run.

    :param name: Experiment name, used in file names
    :param plant: Plant name (see :func:`dmac.plants.make_plant`), or a :class:`~dmac.plants.PlantModel` instance
    :param params: Plant parameters
    :param T_s: Sample time, seconds
    :param duration: Run duration, seconds
    :param reference: Constant reference, or a list of `(t_start, value)` pairs defining a piecewise constant one
    :param forgetting: RLS forgetting factor :math:`\\lambda`
    :param R_theta: RLS regularization, scalar multiple of identity or matrix
    :param R_1: LQR weight on the augmented state, scalar multiple of identity or matrix
    :param R_2: LQR weight on the input, scalar multiple of identity or matrix
    :param sigma_v: Exploration noise standard deviation
    :param warmup_steps: Number of initial steps without feedback
    :param gain_cadence: Gains are recomputed every that many steps
    :param dare_method: Riccati solver, `doubling` or `iterate`
    :param integrator: :class:`~dmac.plants.IntegratorConfig` for inter-sample propagation
    :param seed: Seed for the initial condition and the exploration noise
    :param x0: Initial full state; drawn from standard normal distribution if not set
    :param record_state: Whether to store full plant state for every sample
    :param converge_tol: Threshold on the final mean absolute tracking error to consider the run converged; `5*sigma_v` (but at least 1e-3) if not set
    """
    name: str = 'experiment'
    plant: object = 'mck'
    params: dict = field(default_factory=dict)
    T_s: float = 0.1
    duration: float = 60.0
    reference: object = 1.0
    forgetting: float = 0.995
    R_theta: object = 100.0
    R_1: object = 1.0
    R_2: object = 1.0
    sigma_v: float = 1e-2
    warmup_steps: int = 10
    gain_cadence: int = 1
    dare_method: str = 'doubling'
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    seed: int = 0
    x0: object = None
    record_state: bool = False
    converge_tol: float = None

    @property
    def steps(self):
        """Number of samples in the run"""
        return int(np.floor(self.duration/self.T_s + 1e-9))

    @property
    def tolerance(self):
        if self.converge_tol is not None:
            return self.converge_tol

        return max(5*self.sigma_v, 1e-3)

@dataclass(frozen=True)
class SweepSpec:
    """
    Sweep over a single parameter: hyperparameter name (`lambda`, `R_theta`, `R_1`, `R_2`, `sigma_v`, ...)
    or plant parameter name (optionally prefixed with `params.`), with all other parameters kept at
    their values in `base`. With `seed_policy='per_value'` every run gets its own seed `base.seed + index`.
    """
    base: ExperimentSpec
    axis: str
    values: tuple
    seed_policy: str = 'fixed'

def make_plant_for(spec):
    """
    Returns the plant model for the experiment
    """
    if isinstance(spec.plant, PlantModel):
        return spec.plant

    try:
        return make_plant(spec.plant, **spec.params)
    except ParameterError as e:
        raise ConfigurationError(str(e), key='params')

def make_controller_config(spec, plant, noise_seed=None):
    """
    Builds :class:`~dmac.controller.ControllerConfig` for the experiment and the plant
    """
    l_xi, l_u, l_y = plant.state_dim, plant.input_dim, plant.output_dim

    try:
        weights = LqrWeights.from_scales(spec.R_1, spec.R_2, l_xi + l_y, l_u)
    except DMACError as e:
        raise ConfigurationError(str(e), key='R_1/R_2')

    return ControllerConfig(estimator=EstimatorConfig(state_dim=l_xi, input_dim=l_u,
                                                      forgetting=spec.forgetting,
                                                      regularization=spec.R_theta),
                            weights=weights,
                            output_selector=plant.output_selector,
                            exploration_std=spec.sigma_v,
                            noise_seed=spec.seed if noise_seed is None else noise_seed,
                            warmup_steps=spec.warmup_steps,
                            gain_cadence=spec.gain_cadence,
                            dare_method=spec.dare_method)

def validate_spec(spec):
    """Checks the experiment specification without running it.

    :param spec: :class:`ExperimentSpec` to check
    :returns: Tuple of the plant model and the controller configuration
    """
    if not spec.T_s > 0:
        raise ConfigurationError('sample time must be positive, got %g' % spec.T_s, key='T_s')
    if not spec.duration >= spec.T_s:
        raise ConfigurationError('duration must not be shorter than the sample time', key='duration')

    plant = make_plant_for(spec)
    config = make_controller_config(spec, plant)

    # Trial construction checks dimensions and definiteness
    try:
        new_controller(config)
        check_weights(config.weights, plant.state_dim + plant.output_dim, plant.input_dim)
    except DimensionError as e:
        raise ConfigurationError(str(e))

    if spec.x0 is not None and np.size(spec.x0) != plant.full_state_dim:
        raise ConfigurationError('initial state must have length %d' % plant.full_state_dim, key='x0')

    if spec.dare_method not in ['doubling', 'iterate']:
        raise ConfigurationError('unknown DARE method %r' % (spec.dare_method,), key='dare_method')

    reference_at(spec.reference, 0.0)

    return plant, config

def reference_at(reference, t):
    """
    Value of the (constant or piecewise constant) reference at time `t`.
    Piecewise constant reference is a list of `(t_start, value)` pairs; it is zero before the first one.
    """
    if np.isscalar(reference) or np.ndim(reference) == 0:
        try:
            return np.atleast_1d(float(reference))
        except (TypeError, ValueError):
            raise ConfigurationError('reference must be a number, got %r' % (reference,), key='reference')

    value = np.zeros(1)
    try:
        for t_start,val in sorted(reference, key=lambda _: _[0]):
            if t >= t_start - 1e-12:
                value = np.atleast_1d(np.asarray(val, dtype=np.double))
    except (TypeError, ValueError):
        raise ConfigurationError('reference must be a number or a list of [t_start, value] pairs', key='reference')

    return value

def _empty_columns(plant, record_state):
    l_xi, l_u, l_y = plant.state_dim, plant.input_dim, plant.output_dim

    names = ['k', 't']
    names += ['y_%d' % i for i in range(l_y)]
    names += ['r_%d' % i for i in range(l_y)]
    names += ['z_%d' % i for i in range(l_y)]
    names += ['u_%d' % i for i in range(l_u)]
    names += ['xi_%d' % i for i in range(l_xi)]
    names += ['theta_%d_%d' % (i, j) for i in range(l_xi) for j in range(l_xi + l_u)]
    names += ['spectral_radius', 'cond_P', 'asym_P', 'status']

    if record_state:
        names += ['x_%d' % i for i in range(plant.full_state_dim)]

    return names

def run_experiment(spec, verbose=False):
    """Runs single closed-loop experiment.

    For every sample `k`: the measured state :math:`\\xi_k` is taken from the plant state at :math:`t = k T_s`,
    the controller produces :math:`u_k`, and the plant is propagated over :math:`[k T_s, (k+1) T_s)` with
    :math:`u_k` held constant. Non-finite plant state or control terminates the run, setting `diverged` flag
    in the log metadata; the records collected so far are kept.

    :param spec: :class:`ExperimentSpec` instance
    :param verbose: Whether to show verbose messages during the run of the function or not. May be either boolean, or a `print`-like function.
    :returns: Run log as :class:`astropy.table.Table` with one row per sample, and run parameters and summary in its `meta`
    """
    log = get_log(verbose)

    plant, _ = validate_spec(spec)

    ic_seq, noise_seq = np.random.SeedSequence(spec.seed).spawn(2)
    config = make_controller_config(spec, plant, noise_seed=noise_seq)
    state = new_controller(config, verbose=verbose)

    if spec.x0 is not None:
        x = np.array(spec.x0, dtype=np.double).ravel()
    else:
        x = np.random.default_rng(ic_seq).standard_normal(plant.full_state_dim)

    substeps = plant.substeps(spec.T_s, spec.integrator.substeps)
    K = spec.steps

    log('Running %s on %s plant: %d steps of %g s, at least %d substeps per step' %
        (spec.name, plant.name, K, spec.T_s, substeps))

    rows = []
    diverged = False
    divergence_step = None

    for k in range(K):
        t = k*spec.T_s
        xi = plant.measure(x)
        r = reference_at(spec.reference, t)*np.ones(plant.output_dim)

        try:
            u, state = controller_step(state, xi, r, verbose=verbose)
        except (NumericalBreakdownError, FloatingPointError, np.linalg.LinAlgError) as e:
            log('Step %d: controller failed: %s' % (k, e))
            diverged, divergence_step = True, k
            break

        y = config.output_selector @ xi
        gains = state.gains

        row = [k, t]
        row += list(y)
        row += list(r)
        row += list(y - r)
        row += list(u)
        row += list(xi)
        row += list(state.estimator.theta.ravel())
        row += [gains.spectral_radius, covariance_condition(state.estimator), state.estimator.asymmetry, state.status]

        if spec.record_state:
            row += list(x)

        rows.append(row)

        if not np.all(np.isfinite(u)) or not np.all(np.isfinite(xi)):
            log('Step %d: non-finite control or state, stopping the run' % k)
            diverged, divergence_step = True, k
            break

        try:
            if plant.discrete_step is not None:
                x = np.asarray(plant.discrete_step(x, u), dtype=np.double)
                if not np.all(np.isfinite(x)):
                    raise DivergenceError('Non-finite state', step=0)
            else:
                n = plant.substeps(spec.T_s, spec.integrator.substeps, x=x)
                x = rk4_propagate(plant.rhs, x, u, spec.T_s, substeps=n, t0=t)
        except DivergenceError as e:
            log('Step %d: plant diverged, stopping the run: %s' % (k, e))
            diverged, divergence_step = True, k
            break

    names = _empty_columns(plant, spec.record_state)
    if rows:
        result = Table(rows=rows, names=names)
    else:
        result = Table(names=names, dtype=[str if _ == 'status' else (int if _ == 'k' else float) for _ in names])

    result.meta['name'] = spec.name
    result.meta['plant'] = plant.name
    result.meta['params'] = dict(plant.params)
    result.meta['seed'] = spec.seed
    result.meta['T_s'] = spec.T_s
    result.meta['sigma_v'] = spec.sigma_v
    result.meta['warmup_steps'] = spec.warmup_steps
    result.meta['converge_tol'] = spec.tolerance
    result.meta['dims'] = dict(state=plant.state_dim, input=plant.input_dim, output=plant.output_dim)
    result.meta['diverged'] = diverged
    result.meta['divergence_step'] = divergence_step

    if len(result):
        result.meta['summary'] = summarize(result)

    log('Run finished: %d records%s' % (len(result), ', diverged at step %d' % divergence_step if diverged else ''))

    return result

def log_columns(log, prefix):
    """
    Stacks scalar columns `prefix_0`, `prefix_1`, ... of the run log into 2d array with one row per sample
    """
    names = [_ for _ in log.colnames if _.startswith(prefix + '_') and _[len(prefix) + 1:].isdigit()]
    names = sorted(names, key=lambda _: int(_[len(prefix) + 1:]))

    return np.array([log[_] for _ in names], dtype=np.double).T.reshape(len(log), len(names))

def log_theta(log):
    """
    Estimates :math:`\\Theta_k` from the run log, as an array of shape `(steps, l_xi, l_xi + l_u)`
    """
    l_xi = log.meta['dims']['state']
    l_u = log.meta['dims']['input']
    names = ['theta_%d_%d' % (i, j) for i in range(l_xi) for j in range(l_xi + l_u)]

    return np.array([log[_] for _ in names], dtype=np.double).T.reshape(len(log), l_xi, l_xi + l_u)

def snapshots_from_log(log):
    """
    Snapshot matrices of measured states and inputs of the run, for offline batch fitting
    """
    return snapshots_from_arrays(log_columns(log, 'xi'), log_columns(log, 'u'))

def summarize(log, threshold=1e-2, window=0.1, converge_tol=None):
    """Computes the summary metrics of the run.

    :param log: Run log from :func:`run_experiment`
    :param threshold: Threshold on absolute tracking error for the settling step
    :param window: Fraction of the final steps to average the tracking error over
    :param converge_tol: Threshold on the final mean absolute error to consider the run converged. Taken from the log metadata if not set
    :returns: Dictionary with `steps`, `final_abs_z` (mean absolute tracking error over the final window), `max_abs_u`, `settle_step` (first step after which the absolute error stays below `threshold`, or `None`), `decay_rate` (geometric decay rate of the error, or NaN), number of `synthesis_failures`, and `diverged` and `converged` flags
    """
    n = len(log)
    if not n:
        raise DMACError('Cannot summarize empty run log')

    z = np.max(np.abs(log_columns(log, 'z')), axis=1)
    u = log_columns(log, 'u')

    nwin = max(1, int(np.ceil(window*n)))
    final = float(np.mean(z[-nwin:]))

    below = z < threshold
    settle = None
    if below[-1]:
        # Last step where the error is above the threshold
        above = np.where(~below)[0]
        settle = int(above[-1] + 1) if len(above) else 0

    if converge_tol is None:
        converge_tol = log.meta.get('converge_tol', 1e-3)

    diverged = bool(log.meta.get('diverged', False))

    return dict(steps=n,
                final_abs_z=final,
                max_abs_u=float(np.max(np.abs(u))) if u.size else 0.0,
                settle_step=settle,
                decay_rate=decay_rate(z, start=log.meta.get('warmup_steps', 0), stop=settle),
                synthesis_failures=int(np.sum(np.asarray(log['status']) == 'failed')) if 'status' in log.colnames else 0,
                diverged=diverged,
                converged=bool(not diverged and np.isfinite(final) and final < converge_tol))

def decay_rate(z, start=0, stop=None, min_points=5):
    """
    Geometric decay rate :math:`\\rho` of the absolute tracking error, :math:`|z_k| \\propto \\rho^k`,
    estimated by robust linear fit of :math:`\\log |z_k|` between `start` and `stop` steps
    """
    z = np.abs(np.asarray(z, dtype=np.double))
    idx = np.arange(len(z))

    good = (idx >= start) & np.isfinite(z) & (z > 0)
    if stop is not None:
        good &= idx <= stop

    if np.sum(good) < min_points:
        return np.nan

    X = sm.add_constant(idx[good].astype(np.double))
    logz = np.log(z[good])

    C = sm.OLS(logz, X).fit()
    if np.max(np.abs(C.resid)) > 1e-10*max(1, np.max(np.abs(logz))):
        # Robust fit is undefined for exactly geometric sequence (zero residual scale)
        C = sm.RLM(logz, X).fit()

    return float(np.exp(C.params[1]))

def spec_with_value(spec, axis, value):
    """
    Returns the copy of experiment specification with one hyperparameter or plant parameter replaced
    """
    if axis in HYPERPARAMETERS:
        return dataclasses.replace(spec, **{HYPERPARAMETERS[axis]: value})

    name = axis[len('params.'):] if axis.startswith('params.') else axis

    plant_params = dict(spec.params)
    if not isinstance(spec.plant, PlantModel):

        known = inspect.signature(PLANTS.get(spec.plant, lambda: None)).parameters
        if name not in known:
            raise ConfigurationError('unknown sweep axis %r' % axis, key='sweep_axis')

    plant_params[name] = value

    return dataclasses.replace(spec, params=plant_params)

def _run_cell(args):
    # Top-level so that it may be pickled for worker processes
    spec, axis, value = args
    result = run_experiment(spec)
    result.meta['axis'] = axis
    result.meta['value'] = value

    return result

def run_sweep(sweep, jobs=1, verbose=False):
    """Runs the experiment for every value of the sweep axis.

    The runs are independent, and with `jobs > 1` are distributed over a pool of worker processes.

    :param sweep: :class:`SweepSpec` instance
    :param jobs: Number of worker processes
    :param verbose: Whether to show verbose messages during the run of the function or not. May be either boolean, or a `print`-like function.
    :returns: Tuple of the list of run logs (in the order of values), and summary table with one row per value
    """
    log = get_log(verbose)

    if sweep.seed_policy not in ['fixed', 'per_value']:
        raise ConfigurationError('seed policy must be either fixed or per_value', key='seed_policy')

    values = list(sweep.values)
    if not values:
        raise ConfigurationError('no values to sweep over', key='sweep_values')

    tasks = []
    for i,value in enumerate(values):
        spec = spec_with_value(sweep.base, sweep.axis, value)
        if sweep.seed_policy == 'per_value':
            spec = dataclasses.replace(spec, seed=sweep.base.seed + i)
        validate_spec(spec)
        tasks.append((spec, sweep.axis, value))

    log('Sweeping %s over %d values: %s' % (sweep.axis, len(values), values))

    if jobs > 1 and len(tasks) > 1:
        with Pool(min(jobs, len(tasks))) as pool:
            iterator = pool.imap(_run_cell, tasks)
            logs = list(tqdm(iterator, total=len(tasks), disable=not verbose))
    else:
        logs = [_run_cell(_) for _ in tqdm(tasks, disable=not verbose)]

    summary = sweep_summary(logs, sweep.axis)

    for row in summary:
        log('%s = %s: final |z| = %.3g, %s' % (sweep.axis, row['value'], row['final_abs_z'],
                                              'diverged' if row['diverged'] else ('converged' if row['converged'] else 'not converged')))

    return logs, summary

def sweep_summary(logs, axis):
    """
    Summary table with one row per sweep run
    """
    rows = []
    for result in logs:
        summary = result.meta.get('summary') or dict(final_abs_z=np.nan, max_abs_u=np.nan, settle_step=None,
                                                     decay_rate=np.nan, converged=False)
        rows.append([axis, str(result.meta.get('value')), result.meta['seed'], len(result),
                     summary['final_abs_z'], summary['max_abs_u'],
                     -1 if summary['settle_step'] is None else summary['settle_step'],
                     summary['decay_rate'], bool(summary['converged']), bool(result.meta['diverged'])])

    return Table(rows=rows, names=['axis', 'value', 'seed', 'steps', 'final_abs_z', 'max_abs_u',
                                   'settle_step', 'decay_rate', 'converged', 'diverged'])

def log_filename(name, axis, value, seed, ext='csv'):
    """
    File name for the run log: `<experiment>_<axis>_<value>_<seed>.<ext>`
    """
    if isinstance(value, float):
        value = '%g' % value

    return '%s_%s_%s_%s.%s' % (name, axis, value, seed, ext)

def write_log(log, filename):
    """
    Writes the run log to CSV file with a header naming every column and floats with 17 significant digits
    """
    formats = {name: '%.17g' for name in log.colnames if log[name].dtype.kind == 'f'}

    log.write(filename, format='ascii.csv', formats=formats, overwrite=True)

def read_log(filename):
    """
    Reads the run log back from CSV file
    """
    return Table.read(filename, format='ascii.csv')

def write_summary(summary, filename, extra=None):
    """
    Writes the run summary dictionary (optionally with extra fields) to JSON file
    """
    data = dict(summary)
    if extra:
        data.update(extra)

    json_write(filename, data)
