import numpy as np
import pytest

from dmac.plants import mck_rhs, three_mass_rhs, vdp_rhs, burgers_rhs
from dmac.plants import mck_plant, three_mass_plant, vdp_plant, burgers_plant, make_plant, linear_discrete_plant
from dmac.plants import mck_matrices, three_mass_matrices, mck_energy, three_mass_energy
from dmac.plants import rk4_step, rk4_propagate, zoh_discretize_exact, IntegratorConfig
from dmac.utils import ParameterError, DimensionError, DivergenceError

class TestRightHandSides:
    def test_mck(self):
        np.testing.assert_allclose(mck_rhs(0, [1.0, 0.0], 0.0), [0.0, -2.0])
        np.testing.assert_allclose(mck_rhs(0, [0.0, 1.0], 1.0, m=2.0, c=0.5, k=2.0), [1.0, 0.25])

    def test_mck_matches_matrices(self):
        A, B = mck_matrices(m=1.5, c=0.3, k=4.0)
        x = np.array([0.7, -0.2])

        np.testing.assert_allclose(mck_rhs(0, x, 0.4, m=1.5, c=0.3, k=4.0), A @ x + B[:, 0]*0.4)

    def test_mck_zero_mass(self):
        with pytest.raises(ParameterError):
            mck_rhs(0, [1.0, 0.0], 0.0, m=0.0)

    def test_three_mass(self):
        dx = three_mass_rhs(0, [1.0, 0, 0, 0, 0, 0], 0.0)

        np.testing.assert_allclose(dx, [0, 0, 0, -4.0, 2.0, 0.0])

    def test_three_mass_matches_matrices(self):
        A, B = three_mass_matrices(m=2.0, k=3.0)
        x = np.array([0.1, -0.3, 0.5, 1.0, 0.0, -1.0])

        np.testing.assert_allclose(three_mass_rhs(0, x, 0.7, m=2.0, k=3.0), A @ x + B[:, 0]*0.7)

    def test_vdp(self):
        np.testing.assert_allclose(vdp_rhs(0, [0.0, 1.0], 0.0, mu=1.0), [1.0, 1.0])
        np.testing.assert_allclose(vdp_rhs(0, [2.0, 1.0], 0.5, mu=1.0), [1.0, 0.5 - 3.0 - 2.0])

    def test_burgers_constant_field(self):
        w = 0.7*np.ones(100)

        assert np.all(burgers_rhs(0, w, 0.0) == 0)

    def test_burgers_actuator(self):
        dw = burgers_rhs(0, np.zeros(10), 2.0, actuator_node=3)

        assert dw[2] == 2.0
        assert np.sum(dw != 0) == 1

    def test_burgers_periodic_wrap(self):
        N = 11
        dx = 2*np.pi/(N - 1)
        w = np.zeros(N)
        w[0] = 1.0

        dw = burgers_rhs(0, w, 0.0, nu=1.0, actuator_node=5)

        # w_{N+1} = w_1, so the last node sees the first one as its right neighbour
        assert dw[-1] == pytest.approx(1/dx**2)
        assert dw[1] == pytest.approx(1/dx**2)
        assert dw[0] == pytest.approx(-2/dx**2)

    def test_burgers_inviscid_sine(self):
        N = 100
        dx = 2*np.pi/(N - 1)
        x = dx*np.arange(N)

        dw = burgers_rhs(0, np.sin(x), 0.0, nu=0.0)

        # The wrap pairs the coinciding end nodes, so only the interior follows the smooth field
        np.testing.assert_allclose(dw[1:-1], (-np.sin(x)*np.cos(x))[1:-1], atol=dx**2)

    def test_burgers_diffusion_sums_to_zero(self):
        w = np.random.default_rng(1).standard_normal(100)

        diffusion = burgers_rhs(0, w, 0.0, nu=1.0) - burgers_rhs(0, w, 0.0, nu=0.0)

        assert abs(np.sum(diffusion)) < 1e-9

    def test_burgers_too_small(self):
        with pytest.raises(ParameterError):
            burgers_rhs(0, np.zeros(2), 0.0)

class TestPlants:
    def test_mck(self):
        plant = mck_plant()

        assert (plant.full_state_dim, plant.state_dim, plant.input_dim, plant.output_dim) == (2, 2, 1, 1)
        np.testing.assert_array_equal(plant.output([0.3, 0.1]), [0.3])

    def test_three_mass_measurement(self):
        plant = three_mass_plant()
        x = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])

        np.testing.assert_array_equal(plant.measure(x), [1.0, 3.0, 4.0])
        np.testing.assert_array_equal(plant.output(x), [3.0])

    def test_vdp(self):
        assert vdp_plant(mu=2.0).params == {'mu': 2.0}

    def test_burgers_sensors(self):
        plant = burgers_plant()
        w = np.arange(1.0, 101.0)

        assert plant.state_dim == 7
        np.testing.assert_array_equal(plant.measure(w), [1, 16, 31, 46, 61, 76, 91])
        np.testing.assert_array_equal(plant.output(w), [61])

    def test_burgers_substeps(self):
        plant = burgers_plant(nu=10.0)
        dx = 2*np.pi/99

        n = plant.substeps(0.01, 20)
        assert 0.01/n <= 0.2*dx**2/10.0
        assert burgers_plant().substeps(0.01, 20) == 20

    def test_burgers_convective_substeps(self):
        plant = burgers_plant()
        dx = 2*np.pi/99

        assert plant.substeps(0.01, 20, x=np.ones(100)) == 20

        n = plant.substeps(0.01, 20, x=400*np.ones(100))
        assert n > 20
        assert 0.01/n <= 0.5*dx/400

        assert burgers_plant(nu=0.0).substeps(0.01, 20, x=np.zeros(100)) == 20

    @pytest.mark.parametrize('value', [1e6, np.inf, np.nan])
    def test_burgers_substeps_exhausted(self, value):
        w = np.zeros(100)
        w[10] = value

        with pytest.raises(DivergenceError):
            burgers_plant().substeps(0.01, 20, x=w)

    @pytest.mark.parametrize('kwargs', [dict(sensors=(1, 16, 200)), dict(actuator=0), dict(output=62), dict(N=2)])
    def test_burgers_bad_nodes(self, kwargs):
        with pytest.raises(ParameterError):
            burgers_plant(**kwargs)

    def test_make_plant(self):
        assert make_plant('mck', k=20.0).params['k'] == 20.0

        with pytest.raises(ParameterError):
            make_plant('pendulum')
        with pytest.raises(ParameterError):
            make_plant('mck', mu=1.0)
        with pytest.raises(ParameterError):
            make_plant('three_mass', m=-1.0)

    def test_linear_discrete(self):
        plant = linear_discrete_plant([[0.5, 0.1], [0.0, 0.9]], [[0.0], [1.0]], [[1.0, 0.0]])

        np.testing.assert_allclose(plant.discrete_step(np.array([1.0, 1.0]), [2.0]), [0.6, 2.9])

def test_integrator_config():
    assert IntegratorConfig().substeps == 20

    with pytest.raises(ParameterError):
        IntegratorConfig(substeps=0)

class TestIntegration:
    def test_rk4_fourth_order(self):
        rhs = lambda t, x, u: -x
        exact = np.exp(-1.0)

        err1 = abs(rk4_propagate(rhs, [1.0], 0.0, 1.0, substeps=10)[0] - exact)
        err2 = abs(rk4_propagate(rhs, [1.0], 0.0, 1.0, substeps=20)[0] - exact)

        assert err1/err2 == pytest.approx(16, abs=2)

    def test_rk4_step_linear_input(self):
        # Exact for polynomial solutions of low degree
        rhs = lambda t, x, u: np.array([u])

        np.testing.assert_allclose(rk4_step(rhs, 0.0, np.array([1.0]), 3.0, 0.5), [2.5])

    def test_zoh_fidelity_mck(self):
        A_c, B_c = mck_matrices()
        A_d, B_d = zoh_discretize_exact(A_c, B_c, 0.1)
        plant = mck_plant()

        x = np.array([0.3, -1.2])
        u = np.array([0.8])

        np.testing.assert_allclose(rk4_propagate(plant.rhs, x, u, 0.1, substeps=20), A_d @ x + B_d @ u, atol=1e-6)

    def test_zoh_fidelity_three_mass(self):
        A_c, B_c = three_mass_matrices()
        A_d, B_d = zoh_discretize_exact(A_c, B_c, 0.1)
        plant = three_mass_plant()

        x = np.array([0.3, -1.2, 0.5, 0.0, 1.0, -0.4])
        u = np.array([-0.5])

        np.testing.assert_allclose(rk4_propagate(plant.rhs, x, u, 0.1, substeps=20), A_d @ x + B_d @ u, atol=1e-6)

    def test_energy_conservation_mck(self):
        plant = mck_plant(c=0.0)
        x = np.array([1.0, 0.5])
        e0 = mck_energy(x)

        for i in range(100):
            x = rk4_propagate(plant.rhs, x, 0.0, 0.1, substeps=20, t0=0.1*i)

        assert abs(mck_energy(x) - e0) <= 1e-6

    def test_energy_conservation_three_mass(self):
        plant = three_mass_plant()
        x = np.array([1.0, 0.0, -0.5, 0.0, 0.3, 0.0])
        e0 = three_mass_energy(x)

        for i in range(100):
            x = rk4_propagate(plant.rhs, x, 0.0, 0.1, substeps=20)

        assert abs(three_mass_energy(x) - e0) <= 1e-6

    def test_vdp_harmonic_period(self):
        plant = vdp_plant(mu=0.0)
        x0 = np.array([1.0, -0.5])
        T_s = 2*np.pi/100

        x = x0
        for i in range(100):
            x = rk4_propagate(plant.rhs, x, 0.0, T_s, substeps=20, t0=T_s*i)

        np.testing.assert_allclose(x, x0, atol=1e-3)

    def test_vdp_limit_cycle(self):
        plant = vdp_plant(mu=1.0)
        x = np.array([0.5, 0.0])

        q = []
        for i in range(500):
            x = rk4_propagate(plant.rhs, x, 0.0, 0.1, substeps=20, t0=0.1*i)
            q.append(x[0])

        amplitude = np.max(np.abs(q[300:]))

        assert 1.9 <= amplitude <= 2.1

    def test_burgers_energy_decays(self):
        plant = burgers_plant(nu=0.1)
        dx = 2*np.pi/99
        x = dx*np.arange(100)
        w = 0.1*np.sin(x) + 0.05*np.cos(2*x)

        energy = [np.sum(w**2)]
        for i in range(50):
            w = rk4_propagate(plant.rhs, w, 0.0, 0.01, substeps=plant.substeps(0.01, 20, x=w))
            energy.append(np.sum(w**2))

        assert np.all(np.diff(energy) <= 0)
        assert energy[-1] < energy[0]

    def test_burgers_fixpoint(self):
        plant = burgers_plant()
        w = 1.3*np.ones(100)

        np.testing.assert_array_equal(rk4_propagate(plant.rhs, w, 0.0, 0.01, substeps=20), w)

    def test_divergence(self):
        rhs = lambda t, x, u: x**3

        with pytest.raises(DivergenceError):
            rk4_propagate(rhs, [100.0], 0.0, 1.0, substeps=20)

    def test_bad_arguments(self):
        with pytest.raises(ParameterError):
            rk4_propagate(lambda t, x, u: x, [1.0], 0.0, 0.1, substeps=0)
        with pytest.raises(ParameterError):
            rk4_propagate(lambda t, x, u: x, [1.0], 0.0, -0.1)

class TestZohExact:
    def test_scalar(self):
        A_d, B_d = zoh_discretize_exact(-1.0, 1.0, 1.0)

        assert A_d[0, 0] == pytest.approx(np.exp(-1))
        assert B_d[0, 0] == pytest.approx(1 - np.exp(-1))

    def test_integrator(self):
        A_d, B_d = zoh_discretize_exact(np.zeros((1, 1)), np.ones((1, 1)), 0.5)

        np.testing.assert_allclose(A_d, [[1.0]])
        np.testing.assert_allclose(B_d, [[0.5]])

    def test_shapes(self):
        with pytest.raises(DimensionError):
            zoh_discretize_exact(np.ones((2, 3)), np.ones((2, 1)), 0.1)
        with pytest.raises(DimensionError):
            zoh_discretize_exact(np.eye(2), np.ones((3, 1)), 0.1)
