"""
Continuous-time benchmark plants and fixed-step integration under zero-order hold.

Every plant is described by a :class:`PlantModel` holding the right-hand side function
`rhs(t, x, u)`, the selector of the measured part of the state and the selector of the output
within the measured state.
"""

from __future__ import absolute_import, division, print_function, unicode_literals

import functools
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .utils import ParameterError, DimensionError, DivergenceError
from .utils import as_matrix, selector_matrix

# Upper limit on the state-dependent growth of the number of substeps per sample
MAX_SUBSTEP_FACTOR = 100

@dataclass(frozen=True)
class PlantModel:
    """
    Continuous-time plant :math:`\\dot x = f(t, x, u)` with measured state :math:`\\xi = S x`
    and output :math:`y = C \\xi`.

    `max_step` is an optional upper limit on the integration step required for stability
    of explicit integration (e.g. for diffusion terms). `step_limit(x)`, if set, gives the
    state-dependent limit (e.g. for convection terms), evaluated at the start of every sample interval.

    If `discrete_step(x, u)` is set, the plant is a discrete-time one: the state at the next
    sample is given directly by this map, and `rhs` is not used.
    """
    name: str
    full_state_dim: int
    input_dim: int
    rhs: object
    measured_selector: np.ndarray
    output_selector: np.ndarray
    params: dict = field(default_factory=dict)
    max_step: float = None
    step_limit: object = None
    discrete_step: object = None

    @property
    def state_dim(self):
        """Dimension of the measured state"""
        return self.measured_selector.shape[0]

    @property
    def output_dim(self):
        return self.output_selector.shape[0]

    def measure(self, x):
        """Measured portion of the full state"""
        return self.measured_selector @ x

    def output(self, x):
        """Output corresponding to the full state"""
        return self.output_selector @ (self.measured_selector @ x)

    def substeps(self, T_s, substeps=20, x=None):
        """Number of integration substeps per sample, at least `substeps` and enough to respect `max_step`.

        If the state `x` is given, the count is also increased to respect `step_limit(x)`, up to
        :data:`MAX_SUBSTEP_FACTOR` times the state-independent count.

        :raises DivergenceError: If the state requires more substeps than that
        """
        if self.max_step is not None:
            substeps = max(substeps, int(np.ceil(T_s/self.max_step)))

        if self.step_limit is not None and x is not None:
            h = self.step_limit(x)

            if not h > 0:
                raise DivergenceError('Integration step limit %g is not positive' % h)

            needed = int(np.ceil(T_s/h)) if np.isfinite(h) else 1
            if needed > MAX_SUBSTEP_FACTOR*substeps:
                raise DivergenceError('State requires %d substeps per sample, more than %d allowed' %
                                      (needed, MAX_SUBSTEP_FACTOR*substeps))

            substeps = max(substeps, needed)

        return substeps

@dataclass(frozen=True)
class IntegratorConfig:
    """
    Fixed-step integration settings: number of RK4 substeps per sample interval
    """
    substeps: int = 20

    def __post_init__(self):
        if int(self.substeps) < 1:
            raise ParameterError('Number of substeps must be positive, got %s' % self.substeps)

# Right-hand sides

def mck_rhs(t, x, u, m=1.0, c=0.5, k=2.0):
    """
    Mass-damper-spring :math:`m \\ddot q + c \\dot q + k q = u` with state :math:`x = [q, \\dot q]`
    """
    if m <= 0:
        raise ParameterError('Mass must be positive, got %g' % m)

    q, dq = x[0], x[1]
    u = np.ravel(u)[0]

    return np.array([dq, (u - c*dq - k*q)/m])

def three_mass_rhs(t, x, u, m=1.0, k=2.0):
    """
    Three equal masses connected in series by equal springs between two walls, force applied to the first one.
    State is :math:`x = [q_1, q_2, q_3, \\dot q_1, \\dot q_2, \\dot q_3]`
    """
    if m <= 0:
        raise ParameterError('Mass must be positive, got %g' % m)

    q1, q2, q3 = x[0], x[1], x[2]
    u = np.ravel(u)[0]

    a1 = (-k*q1 + k*(q2 - q1) + u)/m
    a2 = (-k*(q2 - q1) + k*(q3 - q2))/m
    a3 = (-k*(q3 - q2) - k*q3)/m

    return np.array([x[3], x[4], x[5], a1, a2, a3])

def vdp_rhs(t, x, u, mu=1.0):
    """
    Forced Van der Pol oscillator :math:`\\ddot q - \\mu (1 - q^2) \\dot q + q = u` with state :math:`x = [q, \\dot q]`
    """
    q, dq = x[0], x[1]
    u = np.ravel(u)[0]

    return np.array([dq, u + mu*(1 - q*q)*dq - q])

def burgers_rhs(t, w, u, nu=0.1, actuator_node=55):
    """Viscous Burgers equation on :math:`[0, 2\\pi]` discretized by central differences with periodic wrap.

    The node spacing is :math:`\\Delta x = 2\\pi/(N-1)`, and the wrap uses :math:`w_0 = w_N`, :math:`w_{N+1} = w_1`.

    :param t: Time (unused)
    :param w: Field values at the `N` nodes
    :param u: Scalar control applied at the actuator node
    :param nu: Viscosity
    :param actuator_node: 1-based index of the node where the control is applied
    :returns: Time derivative of the field
    """
    N = len(w)
    if N < 3:
        raise ParameterError('At least 3 nodes required, got %d' % N)

    dx = 2*np.pi/(N - 1)

    wp = np.roll(w, -1) # w_{i+1}
    wm = np.roll(w, 1) # w_{i-1}

    dw = -w*(wp - wm)/(2*dx) + nu*(wp - 2*w + wm)/dx**2
    dw[actuator_node - 1] += np.ravel(u)[0]

    return dw

def burgers_step_limit(w, dx):
    """
    Largest stable RK4 step for the convective term of the discretized Burgers equation, :math:`0.5 \\Delta x/\\max|w|`
    """
    speed = np.max(np.abs(w))
    if not np.isfinite(speed):
        return 0.0

    return 0.5*dx/speed if speed > 0 else np.inf

# Plant factories

def mck_plant(m=1.0, c=0.5, k=2.0):
    """
    Mass-damper-spring plant, measuring both position and velocity, with position as output
    """
    if m <= 0:
        raise ParameterError('Mass must be positive, got %g' % m)

    return PlantModel(name='mck', full_state_dim=2, input_dim=1,
                      rhs=functools.partial(mck_rhs, m=m, c=c, k=k),
                      measured_selector=np.eye(2),
                      output_selector=selector_matrix([0], 2),
                      params=dict(m=m, c=c, k=k))

def three_mass_plant(m=1.0, k=2.0):
    """
    Three-mass plant, measuring :math:`[q_1, q_3, \\dot q_1]`, with :math:`q_3` as output
    """
    if m <= 0:
        raise ParameterError('Mass must be positive, got %g' % m)

    return PlantModel(name='three_mass', full_state_dim=6, input_dim=1,
                      rhs=functools.partial(three_mass_rhs, m=m, k=k),
                      measured_selector=selector_matrix([0, 2, 3], 6),
                      output_selector=selector_matrix([1], 3),
                      params=dict(m=m, k=k))

def vdp_plant(mu=1.0):
    """
    Van der Pol plant, measuring position and velocity, with position as output
    """
    return PlantModel(name='vdp', full_state_dim=2, input_dim=1,
                      rhs=functools.partial(vdp_rhs, mu=mu),
                      measured_selector=np.eye(2),
                      output_selector=selector_matrix([0], 2),
                      params=dict(mu=mu))

def burgers_plant(nu=0.1, N=100, sensors=(1, 16, 31, 46, 61, 76, 91), actuator=55, output=61):
    """Discretized Burgers equation plant with sparse sensors and a single actuator.

    Node numbers are 1-based, as in the usual numbering :math:`i = 1 \\ldots N` of the grid.

    :param nu: Viscosity
    :param N: Number of grid nodes
    :param sensors: Nodes where the field is measured
    :param actuator: Node where the control is applied
    :param output: Node used as the output; must be among `sensors`
    :returns: :class:`PlantModel` instance
    """
    N = int(N)
    if N < 3:
        raise ParameterError('At least 3 nodes required, got %d' % N)
    if nu < 0:
        raise ParameterError('Viscosity must be non-negative, got %g' % nu)

    sensors = [int(_) for _ in sensors]
    for node in sensors + [int(actuator), int(output)]:
        if node < 1 or node > N:
            raise ParameterError('Node %d is outside of the grid 1..%d' % (node, N))

    if output not in sensors:
        raise ParameterError('Output node %d is not among the sensors %s' % (output, sensors))

    dx = 2*np.pi/(N - 1)

    return PlantModel(name='burgers', full_state_dim=N, input_dim=1,
                      rhs=functools.partial(burgers_rhs, nu=nu, actuator_node=int(actuator)),
                      measured_selector=selector_matrix([_ - 1 for _ in sensors], N),
                      output_selector=selector_matrix([sensors.index(output)], len(sensors)),
                      params=dict(nu=nu, N=N, sensors=sensors, actuator=int(actuator), output=int(output)),
                      max_step=0.2*dx**2/nu if nu > 0 else None,
                      step_limit=functools.partial(burgers_step_limit, dx=dx))

PLANTS = {
    'mck': mck_plant,
    'three_mass': three_mass_plant,
    'vdp': vdp_plant,
    'burgers': burgers_plant,
}

def make_plant(name, **params):
    """
    Creates the plant by its name (one of `mck`, `three_mass`, `vdp`, `burgers`) and parameters
    """
    if name not in PLANTS:
        raise ParameterError('Unknown plant %r, should be one of %s' % (name, ', '.join(PLANTS)))

    try:
        return PLANTS[name](**params)
    except TypeError as e:
        raise ParameterError('Wrong parameters for plant %s: %s' % (name, e))

def linear_discrete_plant(A, B, C, name='linear'):
    """
    Discrete-time linear plant :math:`x_{k+1} = A x_k + B u_k` with fully measured state and output `C x`
    """
    A = as_matrix(A, name='A')
    B = as_matrix(B, name='B')
    C = as_matrix(C, name='C')

    return PlantModel(name=name, full_state_dim=A.shape[0], input_dim=B.shape[1],
                      rhs=None,
                      measured_selector=np.eye(A.shape[0]),
                      output_selector=C,
                      params=dict(),
                      discrete_step=functools.partial(_linear_step, A=A, B=B))

def _linear_step(x, u, A=None, B=None):
    return A @ x + B @ np.ravel(u)

# Linear models and energies, mostly for checking the simulations

def mck_matrices(m=1.0, c=0.5, k=2.0):
    """
    Continuous-time state-space matrices of the mass-damper-spring plant
    """
    A = np.array([[0, 1], [-k/m, -c/m]])
    B = np.array([[0], [1/m]])

    return A, B

def three_mass_matrices(m=1.0, k=2.0):
    """
    Continuous-time state-space matrices of the three-mass plant
    """
    K = k/m*np.array([[-2, 1, 0], [1, -2, 1], [0, 1, -2]])
    A = np.block([[np.zeros((3, 3)), np.eye(3)], [K, np.zeros((3, 3))]])
    B = np.array([[0], [0], [0], [1/m], [0], [0]])

    return A, B

def mck_energy(x, m=1.0, k=2.0):
    """Mechanical energy of the mass-spring system"""
    return 0.5*m*x[1]**2 + 0.5*k*x[0]**2

def three_mass_energy(x, m=1.0, k=2.0):
    """Mechanical energy of the three-mass system"""
    q1, q2, q3 = x[0], x[1], x[2]

    return 0.5*m*np.sum(np.asarray(x[3:6])**2) + 0.5*k*(q1**2 + (q2 - q1)**2 + (q3 - q2)**2 + q3**2)

# Integration

def rk4_step(rhs, t, x, u, h):
    """
    Single classical 4th order Runge-Kutta step with the input held constant
    """
    k1 = rhs(t, x, u)
    k2 = rhs(t + 0.5*h, x + 0.5*h*k1, u)
    k3 = rhs(t + 0.5*h, x + 0.5*h*k2, u)
    k4 = rhs(t + h, x + h*k3, u)

    return x + (h/6.0)*(k1 + 2*k2 + 2*k3 + k4)

def rk4_propagate(rhs, x, u_held, T_s, substeps=20, t0=0.0):
    """Propagates the state over one sample interval with the input held constant (zero-order hold).

    :param rhs: Right-hand side function `rhs(t, x, u)`
    :param x: State at the beginning of the interval
    :param u_held: Input held over the interval
    :param T_s: Interval length
    :param substeps: Number of RK4 steps per interval
    :param t0: Time at the beginning of the interval
    :returns: State at the end of the interval
    """
    if substeps < 1:
        raise ParameterError('Number of substeps must be positive, got %d' % substeps)
    if not T_s > 0:
        raise ParameterError('Sample time must be positive, got %g' % T_s)

    x = np.array(x, dtype=np.double)
    h = T_s/substeps

    for i in range(substeps):
        x = rk4_step(rhs, t0 + i*h, x, u_held, h)

        if not np.all(np.isfinite(x)):
            raise DivergenceError('Non-finite state after substep %d' % i, step=i)

    return x

def zoh_discretize_exact(A_c, B_c, T_s):
    """Exact zero-order hold discretization of a linear continuous-time model.

    Uses the matrix exponential of the augmented matrix :math:`[[A_c, B_c], [0, 0]] T_s`.

    :param A_c: Continuous-time state matrix
    :param B_c: Continuous-time input matrix
    :param T_s: Sample time
    :returns: Tuple of discrete-time matrices `A_d`, `B_d`
    """
    A_c = as_matrix(A_c, name='A_c')
    n = A_c.shape[0]

    if A_c.shape[1] != n:
        raise DimensionError('A_c must be square, got shape %s' % (A_c.shape,))

    B_c = as_matrix(B_c, name='B_c')
    if B_c.shape[0] != n:
        raise DimensionError('B_c must have %d rows, got shape %s' % (n, B_c.shape))

    nu = B_c.shape[1]

    M = np.zeros((n + nu, n + nu))
    M[:n, :n] = A_c
    M[:n, n:] = B_c

    E = expm(M*T_s)

    return E[:n, :n], E[:n, n:]
