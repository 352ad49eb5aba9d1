"""
Dynamic mode adaptive controller.

Every sample the controller updates the matrix RLS estimate of :math:`\\Theta = [A\\ B]`
with the newly measured state, recomputes the feedback and integrator gains for the
identified model, and forms the control :math:`u_k = K_\\xi \\xi_k + K_q q_k + v_k`
with a white exploration noise :math:`v_k` keeping the regressor persistently excited.
"""

from __future__ import absolute_import, division, print_function, unicode_literals

import dataclasses
from dataclasses import dataclass

import numpy as np

from .estimator import EstimatorConfig, new_estimator, rls_update, make_regressor, split_theta
from .synthesis import LqrWeights, build_augmented, compute_gains, zero_gains
from .utils import ConfigurationError, SynthesisError, DimensionError
from .utils import as_column, as_matrix, is_selector, get_log

@dataclass(frozen=True)
class ControllerConfig:
    """Configuration of the adaptive controller.

    :param estimator: :class:`~dmac.estimator.EstimatorConfig` for the model identification
    :param weights: :class:`~dmac.synthesis.LqrWeights` for the gain synthesis
    :param output_selector: Output matrix `C` mapping the measured state to the output
    :param exploration_std: Standard deviation :math:`\\sigma_v` of the exploration noise, in units of the input
    :param noise_seed: Seed (integer or :class:`numpy.random.SeedSequence`) for the exploration noise
    :param warmup_steps: Number of initial steps with zero gains (exploration noise only)
    :param gain_cadence: Gains are recomputed every `gain_cadence` steps after the warm-up
    :param selector: Whether `output_selector` is declared to be a 0/1 selector and should be checked as such
    :param dare_method: Riccati solver, `doubling` or `iterate`
    :param dare_tol: Riccati solver tolerance
    :param dare_max_iters: Riccati solver iterations limit
    """
    estimator: EstimatorConfig
    weights: LqrWeights
    output_selector: np.ndarray
    exploration_std: float = 1e-2
    noise_seed: object = 0
    warmup_steps: int = 10
    gain_cadence: int = 1
    selector: bool = True
    dare_method: str = 'doubling'
    dare_tol: float = 1e-9
    dare_max_iters: int = 10000

    @property
    def state_dim(self):
        return self.estimator.state_dim

    @property
    def input_dim(self):
        return self.estimator.input_dim

    @property
    def output_dim(self):
        return np.shape(self.output_selector)[0]

@dataclass(frozen=True)
class ControllerState:
    """
    Controller state: estimator, current gains, integrator `q`, previous regressor, state of the noise
    bit generator, step counter and the status of the latest gain synthesis (`warmup`, `ok`, `held` or `failed`).

    States are values: stepping the same state twice gives the same control.
    """
    config: ControllerConfig
    estimator: object
    gains: object
    q: np.ndarray
    prev_phi: object
    rng_state: dict
    step: int = 0
    status: str = 'warmup'

def check_controller_config(config):
    """
    Validates the controller configuration, raising :class:`~dmac.utils.ConfigurationError` on problems
    """
    C = as_matrix(config.output_selector, name='output_selector')

    if C.shape[1] != config.state_dim or C.shape[0] < 1:
        raise ConfigurationError('output selector must have shape (l_y, %d), got %s' % (config.state_dim, C.shape), key='output_selector')

    if config.selector and not is_selector(C):
        raise ConfigurationError('output selector must have exactly one unit entry per row', key='output_selector')

    if not config.exploration_std >= 0:
        raise ConfigurationError('exploration noise std must be non-negative, got %g' % config.exploration_std, key='sigma_v')

    if int(config.warmup_steps) < 0:
        raise ConfigurationError('warm-up steps must be non-negative, got %d' % config.warmup_steps, key='warmup_steps')

    if int(config.gain_cadence) < 1:
        raise ConfigurationError('gain cadence must be positive, got %d' % config.gain_cadence, key='gain_cadence')

    return C

def new_controller(config, verbose=False):
    """Creates the initial controller state.

    :param config: :class:`ControllerConfig` instance
    :param verbose: Whether to show verbose messages during the run of the function or not. May be either boolean, or a `print`-like function.
    :returns: :class:`ControllerState` with zero integrator and freshly initialized estimator
    """
    check_controller_config(config)

    estimator = new_estimator(config.estimator, verbose=verbose)

    return ControllerState(config=config,
                           estimator=estimator,
                           gains=None,
                           q=np.zeros(config.output_dim),
                           prev_phi=None,
                           rng_state=np.random.default_rng(config.noise_seed).bit_generator.state,
                           step=0,
                           status='warmup')

def integrator_advance(q, r, y):
    """
    Integrator of the tracking error, :math:`q_{k+1} = q_k + (r_k - y_k)`
    """
    q = as_column(q)

    return q + (as_column(r, len(q), name='reference') - as_column(y, len(q), name='output'))

def noise_generator(rng_state):
    """
    Re-creates the noise generator from the stored state of its bit generator
    """
    bit_generator = getattr(np.random, rng_state['bit_generator'])()
    bit_generator.state = rng_state

    return np.random.Generator(bit_generator)

def exploration_noise(rng, std, size):
    """Draws zero-mean Gaussian exploration noise.

    :param rng: :class:`numpy.random.Generator` to draw from; it is advanced in place
    :param std: Standard deviation of the noise
    :param size: Number of independent components
    :returns: Tuple of noise vector and the (advanced) generator
    """
    if std == 0:
        return np.zeros(size), rng

    return std*rng.standard_normal(size), rng

def _synthesize(state, log):
    # Identified model -> augmented model -> gains, keeping previous gains on failure
    config = state.config
    A, B = split_theta(state.estimator.theta, config.state_dim, config.input_dim)
    model = build_augmented(A, B, config.output_selector)

    kwargs = dict(tol=config.dare_tol, max_iters=config.dare_max_iters, method=config.dare_method)
    if config.dare_method == 'iterate' and state.gains is not None and np.any(state.gains.riccati_P):
        kwargs['P0'] = state.gains.riccati_P

    try:
        return compute_gains(model, config.weights, **kwargs), 'ok'
    except SynthesisError as e:
        log('Step %d: gain synthesis failed (%s), keeping previous gains' % (state.step, e))

        if state.gains is None:
            return zero_gains(config.state_dim, config.output_dim, config.input_dim), 'failed'

        return state.gains, 'failed'

def controller_step(state, xi, r, verbose=False):
    """Single step of the adaptive controller.

    In order: (1) update the estimate with the previous regressor and the new state, (2) recompute
    the gains from the identified model (zero during the warm-up, kept on failure), (3) compute the
    tracking error, (4) form the control with exploration noise, (5) advance the integrator, and
    (6) store the new regressor.

    :param state: Current :class:`ControllerState`
    :param xi: Measured state :math:`\\xi_k`
    :param r: Reference :math:`r_k`, scalar or vector of output dimension
    :param verbose: Whether to show verbose messages during the run of the function or not. May be either boolean, or a `print`-like function.
    :returns: Tuple of control :math:`u_k` and updated :class:`ControllerState`
    """
    log = get_log(verbose)
    config = state.config

    xi = as_column(xi, config.state_dim, name='state')
    r = as_column(r)
    if r.shape[0] == 1 and config.output_dim > 1:
        r = np.repeat(r, config.output_dim)
    elif r.shape[0] != config.output_dim:
        raise DimensionError('reference must have length %d, got %d' % (config.output_dim, r.shape[0]))

    estimator = state.estimator
    if state.prev_phi is not None:
        estimator = rls_update(estimator, state.prev_phi, xi)
    state = dataclasses.replace(state, estimator=estimator)

    if state.step < config.warmup_steps:
        gains = zero_gains(config.state_dim, config.output_dim, config.input_dim)
        status = 'warmup'
    elif (state.step - config.warmup_steps) % config.gain_cadence == 0:
        if state.step == config.warmup_steps:
            log('Step %d: warm-up finished, starting feedback' % state.step)
        gains, status = _synthesize(state, log)
    else:
        gains, status = state.gains, 'held'

    y = config.output_selector @ xi

    v, rng = exploration_noise(noise_generator(state.rng_state), config.exploration_std, config.input_dim)
    u = gains.K_xi @ xi + gains.K_q @ state.q + v

    q = integrator_advance(state.q, r, y)

    phi = make_regressor(xi, u)

    return u, dataclasses.replace(state, gains=gains, q=q, prev_phi=phi, rng_state=rng.bit_generator.state, step=state.step + 1, status=status)
