"""
Synthesis of full-state feedback with integral action for an identified linear model.

The identified pair (A, B) is augmented with the integrator of the tracking error
:math:`q_{k+1} = q_k + r_k - C \\xi_k`, and the gains :math:`K_a = [K_\\xi\\ K_q]` are computed by
infinite-horizon discrete LQR so that :math:`A_a + B_a K_a` is Schur stable.
"""

from __future__ import absolute_import, division, print_function, unicode_literals

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, eigvals, solve, LinAlgError

from .utils import ConfigurationError, DimensionError, SynthesisError
from .utils import as_matrix, as_column, scaled_identity

@dataclass(frozen=True)
class AugmentedModel:
    """
    Model augmented with the integrator state: :math:`x_{a,k+1} = A_a x_{a,k} + B_a u_k + B_r r_k`, :math:`y_k = C_a x_{a,k}`
    """
    A_a: np.ndarray
    B_a: np.ndarray
    B_r: np.ndarray
    C_a: np.ndarray

    @property
    def output_dim(self):
        return self.C_a.shape[0]

    @property
    def state_dim(self):
        return self.A_a.shape[0] - self.C_a.shape[0]

    @property
    def input_dim(self):
        return self.B_a.shape[1]

@dataclass(frozen=True)
class LqrWeights:
    """
    LQR weights: `R_1` on the augmented state (symmetric positive semi-definite),
    `R_2` on the input (symmetric positive definite)
    """
    R_1: np.ndarray
    R_2: np.ndarray

    @classmethod
    def from_scales(cls, R_1, R_2, augmented_dim, input_dim):
        """
        Builds the weights from scalars (multipliers of identity) or explicit matrices
        """
        return cls(R_1=scaled_identity(R_1, augmented_dim, name='R_1'),
                   R_2=scaled_identity(R_2, input_dim, name='R_2'))

@dataclass(frozen=True)
class GainPair:
    """
    Feedback gain `K_xi`, integrator gain `K_q`, Riccati solution they were computed from,
    and the spectral radius of the resulting augmented closed loop
    """
    K_xi: np.ndarray
    K_q: np.ndarray
    riccati_P: np.ndarray
    spectral_radius: float
    iterations: int = 0

    @property
    def K_a(self):
        return np.hstack([self.K_xi, self.K_q])

def zero_gains(state_dim, output_dim, input_dim):
    """
    Gains that produce no feedback at all, used before the model is identified
    """
    return GainPair(K_xi=np.zeros((input_dim, state_dim)),
                    K_q=np.zeros((input_dim, output_dim)),
                    riccati_P=np.zeros((state_dim + output_dim, state_dim + output_dim)),
                    spectral_radius=np.nan)

def build_augmented(A, B, C):
    """Builds the model augmented with the integrator of the tracking error.

    :param A: State matrix, :math:`l_\\xi \\times l_\\xi`
    :param B: Input matrix, :math:`l_\\xi \\times l_u`
    :param C: Output matrix (usually a selector), :math:`l_y \\times l_\\xi`
    :returns: :class:`AugmentedModel` with :math:`A_a = [[A, 0], [-C, I]]`, :math:`B_a = [B; 0]`, :math:`B_r = [0; I]` and :math:`C_a = [C, 0]`
    """
    A = as_matrix(A, name='A')
    n = A.shape[0]

    if A.shape[1] != n:
        raise DimensionError('A must be square, got shape %s' % (A.shape,))

    B = as_matrix(B, name='B')
    if B.shape[0] != n:
        raise DimensionError('B must have %d rows, got shape %s' % (n, B.shape))

    C = as_matrix(C, name='C')
    if C.shape[1] != n:
        raise DimensionError('C must have %d columns, got shape %s' % (n, C.shape))

    ny = C.shape[0]
    nu = B.shape[1]

    A_a = np.block([[A, np.zeros((n, ny))],
                    [-C, np.eye(ny)]])
    B_a = np.vstack([B, np.zeros((ny, nu))])
    B_r = np.vstack([np.zeros((n, ny)), np.eye(ny)])
    C_a = np.hstack([C, np.zeros((ny, ny))])

    return AugmentedModel(A_a=A_a, B_a=B_a, B_r=B_r, C_a=C_a)

def check_weights(weights, augmented_dim, input_dim):
    """
    Validates the shapes and definiteness of LQR weights
    """
    R_1 = as_matrix(weights.R_1, name='R_1')
    R_2 = as_matrix(weights.R_2, name='R_2')

    if R_1.shape != (augmented_dim, augmented_dim):
        raise DimensionError('R_1 must have shape %s, got %s' % ((augmented_dim, augmented_dim), R_1.shape))
    if R_2.shape != (input_dim, input_dim):
        raise DimensionError('R_2 must have shape %s, got %s' % ((input_dim, input_dim), R_2.shape))

    for name,R in [['R_1', R_1], ['R_2', R_2]]:
        if not np.all(np.isfinite(R)) or np.max(np.abs(R - R.T)) > 1e-10*max(np.max(np.abs(R)), 1e-300):
            raise ConfigurationError('%s must be finite and symmetric' % name, key=name)

    eig1 = np.linalg.eigvalsh(R_1)
    if eig1[0] < -1e-12*max(abs(eig1[-1]), 1):
        raise ConfigurationError('R_1 must be positive semi-definite', key='R_1')

    eig2 = np.linalg.eigvalsh(R_2)
    if eig2[0] <= 0:
        raise ConfigurationError('R_2 must be positive definite', key='R_2')

    return R_1, R_2

def dare_map(P, A, B, R_1, R_2):
    """
    Riccati map :math:`R_1 + A^T P A - A^T P B (R_2 + B^T P B)^{-1} B^T P A`, symmetrized
    """
    PA = P @ A
    PB = P @ B
    S = R_2 + B.T @ PB
    S = 0.5*(S + S.T)

    K = cho_solve(cho_factor(S), PB.T @ A)
    result = R_1 + A.T @ PA - (A.T @ PB) @ K

    return 0.5*(result + result.T)

def dare_residual(P, A, B, R_1, R_2):
    """
    Relative Frobenius norm of the DARE residual :math:`\\|{\\rm map}(P) - P\\| / \\max(\\|P\\|, 1)`
    """
    return np.linalg.norm(dare_map(P, A, B, R_1, R_2) - P)/max(np.linalg.norm(P), 1.0)

# Norm of the iterate beyond which the iterations are considered diverging
DIVERGENCE_NORM = 1e100

def _diverging(norm):
    return not np.isfinite(norm) or norm > DIVERGENCE_NORM

def _safe_residual(P, A, B, R_1, R_2):
    if not np.all(np.isfinite(P)) or _diverging(np.linalg.norm(P)):
        return np.inf

    try:
        return dare_residual(P, A, B, R_1, R_2)
    except (LinAlgError, ValueError):
        return np.inf

def _iterate_dare(A, B, R_1, R_2, P, tol, max_iters):
    # Fixed-point iteration of the Riccati map
    for iteration in range(1, max_iters + 1):
        try:
            P_new = dare_map(P, A, B, R_1, R_2)
        except (LinAlgError, ValueError):
            return P, iteration, False

        norm = np.linalg.norm(P_new)
        if not np.all(np.isfinite(P_new)) or _diverging(norm):
            return P, iteration, False

        inc = np.linalg.norm(P_new - P)/max(norm, 1e-300)
        P = P_new

        if inc < tol:
            return P, iteration, True

    return P, max_iters, False

def _doubling_dare(A, B, R_1, R_2, tol, max_iters):
    # Structure-preserving doubling: H_k converges to the stabilizing solution quadratically
    n = A.shape[0]
    I = np.eye(n)

    Ak = A.copy()
    Gk = B @ cho_solve(cho_factor(R_2), B.T)
    Gk = 0.5*(Gk + Gk.T)
    Hk = R_1.copy()

    for iteration in range(1, max_iters + 1):
        W = I + Gk @ Hk

        try:
            WA = solve(W, Ak)
            WG = solve(W, Gk)
        except (LinAlgError, ValueError):
            return Hk, iteration, False

        H_new = Hk + Ak.T @ Hk @ WA
        G_new = Gk + Ak @ WG @ Ak.T
        Ak = Ak @ WA

        H_new = 0.5*(H_new + H_new.T)
        Gk = 0.5*(G_new + G_new.T)

        if not np.all(np.isfinite(H_new)) or not np.all(np.isfinite(Gk)) or not np.all(np.isfinite(Ak)):
            return Hk, iteration, False

        norm = np.linalg.norm(H_new)
        if _diverging(norm):
            return Hk, iteration, False

        inc = np.linalg.norm(H_new - Hk)/max(norm, 1e-300)
        Hk = H_new

        if inc < tol:
            return Hk, iteration, True

    return Hk, max_iters, False

def solve_dare(A_a, B_a, weights, tol=1e-9, max_iters=10000, method='doubling', P0=None, full_output=False):
    """Solves the discrete algebraic Riccati equation of the LQR problem.

    .. math::

       P = R_1 + A_a^T P A_a - A_a^T P B_a (R_2 + B_a^T P B_a)^{-1} B_a^T P A_a

    Two algorithms are available: `iterate` is the fixed-point Riccati recursion starting from :math:`P = R_1`
    (or from `P0` if given), and `doubling` is the structure-preserving doubling algorithm that converges
    quadratically. Both stop when the relative change of `P` drops below `tol`, and the DARE residual of the
    result is then checked against the same tolerance. Iterates whose norm exceeds :data:`DIVERGENCE_NORM`
    are treated as diverging, so that unstabilizable pairs are reported as failures.

    :param A_a: State matrix
    :param B_a: Input matrix
    :param weights: :class:`LqrWeights` instance
    :param tol: Relative tolerance for convergence and for the final residual
    :param max_iters: Maximal number of iterations
    :param method: Either `doubling` or `iterate`
    :param P0: Initial guess for `iterate` method, e.g. the solution from the previous time step
    :param full_output: If set, the number of iterations used is also returned
    :returns: Riccati solution `P`, or tuple of `P` and the number of iterations if `full_output` is set
    """
    A_a = as_matrix(A_a, name='A_a')
    B_a = as_matrix(B_a, name='B_a')

    if A_a.shape[0] != A_a.shape[1] or B_a.shape[0] != A_a.shape[0]:
        raise DimensionError('Inconsistent shapes of A_a %s and B_a %s' % (A_a.shape, B_a.shape))

    R_1, R_2 = check_weights(weights, A_a.shape[0], B_a.shape[1])

    if method not in ['iterate', 'doubling']:
        raise ConfigurationError('Unknown DARE method %r' % (method,), key='dare_method')

    # Diverging iterations are detected explicitly
    with np.errstate(over='ignore', invalid='ignore'):
        if method == 'iterate':
            P = R_1.copy() if P0 is None else as_matrix(P0, shape=A_a.shape, name='P0')
            P, iterations, converged = _iterate_dare(A_a, B_a, R_1, R_2, P, tol, max_iters)
        else:
            P, iterations, converged = _doubling_dare(A_a, B_a, R_1, R_2, tol, max_iters)

        residual = _safe_residual(P, A_a, B_a, R_1, R_2)

        if converged and residual >= tol:
            # Polish the solution with a few plain iterations
            P, extra, _ = _iterate_dare(A_a, B_a, R_1, R_2, P, tol, 100)
            iterations += extra
            residual = _safe_residual(P, A_a, B_a, R_1, R_2)

    if not converged or not residual < tol:
        raise SynthesisError('DARE did not converge after %d iterations, residual %g' % (iterations, residual),
                             residual=residual, iterations=iterations)

    if full_output:
        return P, iterations

    return P

def spectral_radius(M):
    """
    Maximal modulus of the eigenvalues of a square matrix
    """
    M = as_matrix(M, name='matrix')
    if M.shape[0] != M.shape[1]:
        raise DimensionError('Matrix must be square, got shape %s' % (M.shape,))

    if M.shape[0] == 0:
        return 0.0

    return float(np.max(np.abs(eigvals(M))))

def compute_gains(model, weights, **kwargs):
    """Computes the stabilizing feedback and integrator gains for the augmented model.

    The gain is :math:`K_a = -(R_2 + B_a^T P B_a)^{-1} B_a^T P A_a`, so that the closed loop is :math:`A_a + B_a K_a`.

    :param model: :class:`AugmentedModel` instance
    :param weights: :class:`LqrWeights` instance
    :param \\**kwargs: Passed directly to :func:`solve_dare`
    :returns: :class:`GainPair` with the gains, the Riccati solution and the closed-loop spectral radius
    :raises SynthesisError: if the Riccati equation has no stabilizing solution, or the resulting closed loop is not Schur stable
    """
    A_a, B_a = model.A_a, model.B_a

    P, iterations = solve_dare(A_a, B_a, weights, full_output=True, **kwargs)

    S = weights.R_2 + B_a.T @ P @ B_a
    S = 0.5*(S + S.T)
    K_a = -cho_solve(cho_factor(S), B_a.T @ P @ A_a)

    n = model.state_dim
    rho = spectral_radius(A_a + B_a @ K_a)

    if not rho < 1:
        raise SynthesisError('Closed loop is not Schur stable, spectral radius %g' % rho,
                             residual=dare_residual(P, A_a, B_a, weights.R_1, weights.R_2), iterations=iterations)

    return GainPair(K_xi=K_a[:, :n], K_q=K_a[:, n:], riccati_P=P, spectral_radius=rho, iterations=iterations)

def simulate_tracking(A, B, C, gains, r, steps, xi0=None, q0=None):
    """Simulates the linear model in closed loop with the given gains and a constant reference.

    :param A: State matrix of the model
    :param B: Input matrix of the model
    :param C: Output matrix
    :param gains: :class:`GainPair` to use, :math:`u_k = K_\\xi \\xi_k + K_q q_k`
    :param r: Constant reference, scalar or vector of output dimension
    :param steps: Number of steps to simulate
    :param xi0: Initial state, zero by default
    :param q0: Initial integrator state, zero by default
    :returns: Array of tracking errors :math:`z_k = C \\xi_k - r`, shape `(steps, l_y)`
    """
    model = build_augmented(A, B, C)
    n, ny = model.state_dim, model.output_dim

    r = as_column(r)*np.ones(ny)
    xi = np.zeros(n) if xi0 is None else as_column(xi0, n, name='xi0')
    q = np.zeros(ny) if q0 is None else as_column(q0, ny, name='q0')

    x_a = np.concatenate([xi, q])
    closed = model.A_a + model.B_a @ gains.K_a

    z = np.zeros((steps, ny))
    for k in range(steps):
        z[k] = model.C_a @ x_a - r
        x_a = closed @ x_a + model.B_r @ r

    return z

def plant_closed_loop_radius(A_d, B_d, S, C, gains):
    """Spectral radius of a linear plant with partially measured state in closed loop with the gains.

    The plant is :math:`x_{k+1} = A_d x_k + B_d u_k` with measured state :math:`\\xi_k = S x_k` and output
    :math:`y_k = C \\xi_k`, and the control is :math:`u_k = K_\\xi \\xi_k + K_q q_k`. For gains computed from
    a model of the measured state alone, the result may exceed one while `gains.spectral_radius` does not.

    :param A_d: Discrete-time state matrix of the full plant
    :param B_d: Discrete-time input matrix of the full plant
    :param S: Selector of the measured state, :math:`l_\\xi \\times l_x`
    :param C: Output matrix acting on the measured state
    :param gains: :class:`GainPair` to apply
    :returns: Spectral radius of the closed loop of the plant augmented with the integrator
    """
    A_d = as_matrix(A_d, name='A_d')
    B_d = as_matrix(B_d, name='B_d')
    S = as_matrix(S, name='S')
    C = as_matrix(C, name='C')

    n = A_d.shape[0]
    if A_d.shape[1] != n or B_d.shape[0] != n or S.shape[1] != n:
        raise DimensionError('Inconsistent plant shapes: A_d %s, B_d %s, S %s' % (A_d.shape, B_d.shape, S.shape))

    ny = C.shape[0]

    M = np.block([[A_d + B_d @ gains.K_xi @ S, B_d @ gains.K_q],
                  [-C @ S, np.eye(ny)]])

    return spectral_radius(M)
