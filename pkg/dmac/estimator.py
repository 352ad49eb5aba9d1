"""
Online identification of linear state-space models using matrix recursive least squares.

The model :math:`\\xi_{k+1} = A \\xi_k + B u_k` is rewritten as :math:`\\xi_{k+1} = \\Theta \\phi_k`
with :math:`\\Theta = [A\\ B]` and :math:`\\phi_k = [\\xi_k; u_k]`, and :math:`\\Theta` is estimated by
minimizing the exponentially forgetting, regularized least squares cost. Batch solvers of the
same cost are provided for offline (DMD-like) fitting and for checking the recursion.
"""

from __future__ import absolute_import, division, print_function, unicode_literals

import dataclasses
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, lstsq, LinAlgError

from .utils import ConfigurationError, DimensionError, NumericalBreakdownError
from .utils import as_column, as_matrix, scaled_identity, get_log

@dataclass(frozen=True)
class EstimatorConfig:
    """
    Hyperparameters of the matrix RLS estimator.

    :param state_dim: Dimension of the measured state :math:`l_\\xi`
    :param input_dim: Dimension of the input :math:`l_u`
    :param forgetting: Forgetting factor :math:`0 < \\lambda \\le 1`
    :param regularization: Regularization matrix :math:`R_\\Theta` of the regressor dimension, or a scalar multiplier of identity
    """
    state_dim: int
    input_dim: int
    forgetting: float = 1.0
    regularization: object = 1.0

    @property
    def regressor_dim(self):
        return self.state_dim + self.input_dim

    def regularization_matrix(self):
        return scaled_identity(self.regularization, self.regressor_dim, name='R_theta')

@dataclass(frozen=True)
class EstimatorState:
    """
    Current state of the matrix RLS: estimate `theta`, covariance `P`, number of processed samples,
    and the relative asymmetry of `P` observed before the last symmetrization.
    """
    config: EstimatorConfig
    theta: np.ndarray
    P: np.ndarray
    step_count: int = 0
    asymmetry: float = 0.0

@dataclass(frozen=True)
class SnapshotBatch:
    """
    Snapshot matrices: states `X` (columns :math:`\\xi_1 \\ldots \\xi_k`), inputs `U`,
    and successor states `X_next` (columns :math:`\\xi_2 \\ldots \\xi_{k+1}`).
    """
    X: np.ndarray
    U: np.ndarray
    X_next: np.ndarray

    def __post_init__(self):
        if self.X.ndim != 2 or self.U.ndim != 2 or self.X_next.ndim != 2:
            raise DimensionError('Snapshot matrices must be two-dimensional')
        if not (self.X.shape[1] == self.U.shape[1] == self.X_next.shape[1]):
            raise DimensionError('Snapshot matrices must have equal number of columns, got %d, %d, %d' %
                                 (self.X.shape[1], self.U.shape[1], self.X_next.shape[1]))
        if self.X.shape[0] != self.X_next.shape[0]:
            raise DimensionError('States and successors must have equal dimensions')

    @property
    def size(self):
        return self.X.shape[1]

    @property
    def regressors(self):
        """Stacked regressor matrix :math:`[X; U]`"""
        return np.vstack([self.X, self.U])

def check_config(config):
    """
    Validates the estimator configuration and returns the regularization matrix.

    :param config: :class:`EstimatorConfig` to check
    :returns: Regularization matrix :math:`R_\\Theta` as a NumPy array
    """
    if int(config.state_dim) < 1 or int(config.input_dim) < 1:
        raise ConfigurationError('state and input dimensions must be positive, got %s and %s' %
                                 (config.state_dim, config.input_dim), key='dimensions')

    if not (0 < config.forgetting <= 1):
        raise ConfigurationError('forgetting factor must be in (0, 1], got %g' % config.forgetting, key='lambda')

    R = config.regularization_matrix()
    check_positive_definite(R, name='R_theta', key='R_theta')

    return R

def check_positive_definite(R, name='matrix', key=None, tol=1e-12):
    """
    Checks that the matrix is symmetric positive definite, with eigenvalues above `tol` relative to the largest one
    """
    R = np.asarray(R, dtype=np.double)

    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise ConfigurationError('%s must be a square matrix, got shape %s' % (name, R.shape), key=key)

    if not np.all(np.isfinite(R)):
        raise ConfigurationError('%s must be finite' % name, key=key)

    scale = max(np.max(np.abs(R)), 1e-300)
    if np.max(np.abs(R - R.T)) > 1e-10*scale:
        raise ConfigurationError('%s must be symmetric' % name, key=key)

    eig = np.linalg.eigvalsh(0.5*(R + R.T))
    if eig[-1] <= 0 or eig[0] <= tol*eig[-1]:
        raise ConfigurationError('%s must be positive definite, smallest eigenvalue is %g' % (name, eig[0]), key=key)

def new_estimator(config, verbose=False):
    """Creates initial state of the matrix RLS estimator.

    The estimate starts from zero, and covariance from the inverse of the regularization matrix.

    :param config: :class:`EstimatorConfig` with dimensions and hyperparameters
    :param verbose: Whether to show verbose messages during the run of the function or not. May be either boolean, or a `print`-like function.
    :returns: :class:`EstimatorState` with :math:`\\Theta_0 = 0` and :math:`P_0 = R_\\Theta^{-1}`
    """
    log = get_log(verbose)

    R = check_config(config)
    n = config.regressor_dim

    P0 = cho_solve(cho_factor(R), np.eye(n))
    P0 = 0.5*(P0 + P0.T)

    log('Matrix RLS estimator: l_xi = %d, l_u = %d, lambda = %g' %
        (config.state_dim, config.input_dim, config.forgetting))

    return EstimatorState(config=config,
                          theta=np.zeros((config.state_dim, n)),
                          P=P0,
                          step_count=0)

def make_regressor(xi, u):
    """
    Stacks the state over the input to form the regressor vector :math:`\\phi = [\\xi; u]`
    """
    return np.concatenate([as_column(xi), as_column(u)])

def rls_update(state, phi_prev, xi_next):
    """Single step of the matrix RLS recursion.

    Uses the regressor :math:`\\phi_{k-1}` of the previous step and the newly measured state :math:`\\xi_k`.
    The covariance is symmetrized after the update.

    :param state: Current :class:`EstimatorState`
    :param phi_prev: Previous regressor, length :math:`l_\\xi + l_u`
    :param xi_next: New measured state, length :math:`l_\\xi`
    :returns: Updated :class:`EstimatorState`
    """
    config = state.config
    lam = config.forgetting

    phi = as_column(phi_prev, config.regressor_dim, name='regressor')
    xi = as_column(xi_next, config.state_dim, name='state')

    Pphi = state.P @ phi
    gamma = lam + phi @ Pphi

    if not gamma > 0:
        raise NumericalBreakdownError('RLS normalization gamma = %g is not positive' % gamma, gamma=gamma)

    P = (state.P - np.outer(Pphi, Pphi)/gamma)/lam

    norm = np.linalg.norm(P)
    asymmetry = np.linalg.norm(P - P.T)/norm if norm > 0 else 0.0
    P = 0.5*(P + P.T)

    innovation = xi - state.theta @ phi
    theta = state.theta + np.outer(innovation, P @ phi)

    return dataclasses.replace(state, theta=theta, P=P, step_count=state.step_count + 1, asymmetry=asymmetry)

def covariance_condition(state):
    """
    Condition number of the current covariance matrix, growing large when the regressor lacks excitation
    """
    return np.linalg.cond(state.P)

def snapshots_from_arrays(xi, u):
    """Builds snapshot matrices out of sequences of states and inputs.

    :param xi: Array of measured states, shape `(k+1, l_xi)` - one row per sample
    :param u: Array of inputs, shape `(k, l_u)` or `(k+1, l_u)` - the last input is ignored in the latter case
    :returns: :class:`SnapshotBatch` with `k` columns
    """
    xi = np.asarray(xi, dtype=np.double)
    u = np.asarray(u, dtype=np.double)

    if xi.ndim == 1:
        xi = xi[:, None]
    if u.ndim == 1:
        u = u[:, None]

    k = max(xi.shape[0] - 1, 0)

    if u.shape[0] not in [k, k + 1]:
        raise DimensionError('Expected %d or %d inputs for %d states, got %d' % (k, k + 1, xi.shape[0], u.shape[0]))

    return SnapshotBatch(X=xi[:k].T.copy(), U=u[:k].T.copy(), X_next=xi[1:k+1].T.copy())

def _solve_normal(Phi, X_next, R, weights=None, reg_weight=1.0):
    # Solve Theta (sum w phi phi^T + c R) = sum w xi_next phi^T through Cholesky factorization,
    # falling back to the minimum norm solution when underflowed weights leave the normal matrix singular
    if weights is None:
        weights = np.ones(Phi.shape[1])

    G = (Phi*weights) @ Phi.T + reg_weight*R
    H = (X_next*weights) @ Phi.T

    try:
        factor = cho_factor(0.5*(G + G.T))
    except LinAlgError:
        return lstsq(G, H.T)[0].T

    return cho_solve(factor, H.T).T

def batch_fit(batch, reg):
    """Batch regularized least squares fit of :math:`\\Theta` to the snapshot matrices.

    Minimizes :math:`\\|X^+ - \\Theta [X; U]\\|_F^2 + {\\rm tr}(\\Theta^T R_\\Theta \\Theta)`, i.e. the classical
    DMD-with-control cost with Tikhonov regularization.

    :param batch: :class:`SnapshotBatch` with the data
    :param reg: Regularization matrix :math:`R_\\Theta`, or a scalar multiplier of identity
    :returns: Estimate of :math:`\\Theta = [A\\ B]`
    """
    n = batch.X.shape[0] + batch.U.shape[0]
    R = scaled_identity(reg, n, name='R_theta')

    return _solve_normal(batch.regressors, batch.X_next, R)

def batch_fit_weighted(batch, forgetting, reg):
    """Batch minimizer of the exponentially weighted cost that the RLS recursion minimizes.

    Sample `i` (1-based, out of `k`) is weighted by :math:`\\lambda^{k-i}`, and the regularization term by :math:`\\lambda^k`.
    When the weights underflow and leave the normal matrix singular, the minimum norm least squares solution is returned.

    :param batch: :class:`SnapshotBatch` with the data
    :param forgetting: Forgetting factor :math:`\\lambda`
    :param reg: Regularization matrix :math:`R_\\Theta`, or a scalar multiplier of identity
    :returns: Estimate of :math:`\\Theta = [A\\ B]`
    """
    n = batch.X.shape[0] + batch.U.shape[0]
    R = scaled_identity(reg, n, name='R_theta')
    k = batch.size

    weights = forgetting**np.arange(k - 1, -1, -1, dtype=np.double)

    return _solve_normal(batch.regressors, batch.X_next, R, weights=weights, reg_weight=forgetting**k)

def split_theta(theta, state_dim, input_dim):
    """
    Splits :math:`\\Theta` into the state matrix `A` (first `state_dim` columns) and input matrix `B` (last `input_dim` columns)
    """
    theta = as_matrix(theta, name='theta')

    if theta.shape != (state_dim, state_dim + input_dim):
        raise DimensionError('theta must have shape %s, got %s' % ((state_dim, state_dim + input_dim), theta.shape))

    return theta[:, :state_dim].copy(), theta[:, state_dim:].copy()
