import numpy as np
import pytest

from oscchain import (
    ChainParams,
    LatticeState,
    Trajectory,
    WindowedPropagator,
    evolve_full,
    evolve_unperturbed,
    evolve_whole_line,
    green_kernel,
    shift_trajectory,
)
from oscchain.chain import hamiltonian
from oscchain.dynamics import fundamental_kernel, required_half_width, theta_grid
from oscchain.errors import (
    QuadratureGridError,
    StabilityError,
    SupportError,
    WindowOverrunError,
)


def localized_state(window, reach, seed=7):
    rng = np.random.default_rng(seed)
    state = LatticeState.zeros(window)
    lo, hi = state.index(-reach), state.index(reach)
    state.u[lo: hi + 1] = rng.standard_normal(2 * reach + 1)
    state.v[lo: hi + 1] = rng.standard_normal(2 * reach + 1)
    return state


class TestThetaGrid:
    def test_midpoint_avoids_zero_and_pi(self):
        grid = theta_grid(256)
        assert np.abs(grid).min() > 1e-6
        assert np.abs(np.abs(grid) - np.pi).min() > 1e-6

    def test_reflection_symmetric(self):
        grid = theta_grid(128)
        assert np.allclose(grid, -grid[::-1])

    def test_rejects_odd_size(self):
        with pytest.raises(QuadratureGridError):
            theta_grid(129)


class TestGreenKernel:
    def test_time_zero_identity(self, mixed_params):
        gk = green_kernel(0.0, "right", mixed_params, range(0, 8), range(0, 8))
        expected = np.eye(8)
        expected[0, 0] = 0.0  # mirror cancels the origin
        assert np.abs(gk.values[:, :, 0, 0] - expected).max() < 1e-10
        assert np.abs(gk.values[:, :, 1, 1] - expected).max() < 1e-10
        assert np.abs(gk.values[:, :, 0, 1]).max() < 1e-10
        assert np.abs(gk.values[:, :, 1, 0]).max() < 1e-10

    def test_origin_row_exactly_zero(self, mixed_params):
        gk = green_kernel(5.0, "left", mixed_params, [0, -1, -2], [0, -1, -2, -3])
        assert np.all(gk.values[gk.x.tolist().index(0)] == 0.0)
        assert np.all(gk.values[:, gk.y.tolist().index(0)] == 0.0)

    @pytest.mark.parametrize("side,x,y", [("right", 3, 2), ("left", -4, -1)])
    def test_matches_dense_eigen_oracle(self, side, x, y):
        # Dirichlet wall at 0 on a 512-site half lattice, exact propagation
        params = ChainParams(1.0, 1.0, kappa_minus=0.5, kappa_plus=0.5)
        t = 5.0
        window = (1, 512) if side == "right" else (-512, -1)
        prop = WindowedPropagator(params, window)
        pos = abs(x) - 1 if side == "left" else x - 1
        src = abs(y) - 1 if side == "left" else y - 1
        if side == "left":
            pos = 512 - abs(x)
            src = 512 - abs(y)
        e = np.zeros(512)
        e[src] = 1.0
        zeros = np.zeros(512)
        u_u, v_u = prop.propagate(e, zeros, t)
        u_v, v_v = prop.propagate(zeros, e, t)
        block = green_kernel(t, side, params, [x], [y]).at(x, y)
        assert block[0, 0] == pytest.approx(u_u[pos], abs=1e-12)
        assert block[0, 1] == pytest.approx(u_v[pos], abs=1e-12)
        assert block[1, 0] == pytest.approx(v_u[pos], abs=1e-12)
        assert block[1, 1] == pytest.approx(v_v[pos], abs=1e-12)

    def test_fundamental_kernel_unshifted_grid_needs_pinning(self):
        params = ChainParams(1.0, 1.0)  # unpinned
        with pytest.raises(QuadratureGridError):
            fundamental_kernel([1.0], "right", params, 4, n_theta=256, midpoint=False)
        fundamental_kernel([1.0], "right", params, 4, n_theta=256)  # shifted grid fine

    def test_rejects_small_or_odd_grid(self, mixed_params):
        with pytest.raises(QuadratureGridError):
            green_kernel(1.0, "right", mixed_params, [1], [1], n_theta=32)

    def test_rejects_wrong_side_sites(self, mixed_params):
        with pytest.raises(Exception):
            green_kernel(1.0, "right", mixed_params, [-1], [2])


class TestEvolveUnperturbed:
    def test_zero_stays_zero(self, mixed_params):
        out = evolve_unperturbed(LatticeState.zeros((-32, 32)), 3.0, mixed_params)
        assert np.all(out.u == 0.0) and np.all(out.v == 0.0)

    def test_group_property(self, mixed_params):
        y0 = localized_state((-128, 128), 10)
        one = evolve_unperturbed(evolve_unperturbed(y0, 3.7, mixed_params), 2.3, mixed_params)
        two = evolve_unperturbed(y0, 6.0, mixed_params)
        scale = max(np.abs(two.u).max(), np.abs(two.v).max())
        assert np.abs(one.u - two.u).max() <= 1e-8 * scale
        assert np.abs(one.v - two.v).max() <= 1e-8 * scale

    def test_time_reversal(self, mixed_params):
        y0 = localized_state((-96, 96), 8)
        back = evolve_unperturbed(evolve_unperturbed(y0, 5.0, mixed_params), -5.0, mixed_params)
        ref = y0.copy()
        ref.u[ref.index(0)] = 0.0
        ref.v[ref.index(0)] = 0.0
        assert np.abs(back.u - ref.u).max() < 1e-8
        assert np.abs(back.v - ref.v).max() < 1e-8

    def test_origin_pinned_to_zero(self, mixed_params):
        y0 = localized_state((-64, 64), 6)
        y0.u[y0.index(0)] = 1.7  # ignored by the decoupled dynamics
        out = evolve_unperturbed(y0, 4.0, mixed_params)
        assert out.u[out.index(0)] == 0.0 and out.v[out.index(0)] == 0.0

    def test_linearity(self, mixed_params):
        a = localized_state((-64, 64), 5, seed=1)
        b = localized_state((-64, 64), 5, seed=2)
        combo = LatticeState(-64, 2.0 * a.u - 0.5 * b.u, 2.0 * a.v - 0.5 * b.v)
        za = evolve_unperturbed(a, 3.0, mixed_params)
        zb = evolve_unperturbed(b, 3.0, mixed_params)
        zc = evolve_unperturbed(combo, 3.0, mixed_params)
        assert np.abs(zc.u - (2.0 * za.u - 0.5 * zb.u)).max() < 1e-12

    def test_window_overrun_reports_required_l(self, mixed_params):
        y0 = localized_state((-40, 40), 10)
        with pytest.raises(WindowOverrunError) as err:
            evolve_unperturbed(y0, 50.0, mixed_params)
        assert err.value.required_l == required_half_width(10, 50.0, mixed_params)

    def test_mirror_antisymmetry(self):
        # odd extension evolved on the whole line reproduces the half-line solve
        params = ChainParams(1.5, 1.5, 0.8, 0.8, 0.8)
        rng = np.random.default_rng(3)
        y0 = LatticeState.zeros((-64, 64))
        y0.u[y0.index(1): y0.index(9) + 1] = rng.standard_normal(9)
        y0.v[y0.index(1): y0.index(9) + 1] = rng.standard_normal(9)
        odd = y0.copy()
        for x in range(1, 65):
            odd.u[odd.index(-x)] = -odd.u[odd.index(x)]
            odd.v[odd.index(-x)] = -odd.v[odd.index(x)]
        half = evolve_unperturbed(y0, 6.0, params)
        whole = evolve_whole_line(odd, 6.0, params)
        sl = slice(half.index(1), None)
        assert np.abs(half.u[sl] - whole.u[sl]).max() < 1e-10
        assert np.abs(half.v[sl] - whole.v[sl]).max() < 1e-10


class TestEvolveFull:
    def test_zero_initial_data(self, mixed_params):
        traj = evolve_full(LatticeState.zeros((-64, 64)), np.arange(0.0, 2.0, 0.5),
                           mixed_params, 1e-2)
        assert np.all(traj.data == 0.0)

    def test_single_site_matches_whole_line_spectral(self, homogeneous_params):
        y0 = LatticeState.zeros((-64, 64))
        y0.u[y0.index(0)] = 1.0
        traj = evolve_full(y0, np.arange(0.0, 21.0, 5.0), homogeneous_params, 1e-3)
        worst = 0.0
        for k, t in enumerate(traj.times):
            ref = evolve_whole_line(y0, float(t), homogeneous_params)
            worst = max(worst, np.abs(traj.data[k, :, 0] - ref.u).max(),
                        np.abs(traj.data[k, :, 1] - ref.v).max())
        assert worst <= 1e-6

    def test_energy_conservation_probe(self, homogeneous_params):
        y0 = localized_state((-96, 96), 20, seed=5)
        traj = evolve_full(y0, np.arange(0.0, 11.0, 2.0), homogeneous_params, 1e-3, x_obs=0)
        h = np.array([hamiltonian(traj.state(k), homogeneous_params)
                      for k in range(traj.n_times)])
        assert np.abs(h - h[0]).max() <= 1e-8 * h[0]

    def test_matches_windowed_propagator(self, mixed_params):
        y0 = localized_state((-72, 72), 12, seed=9)
        grid = np.arange(0.0, 8.5, 0.5)
        traj = evolve_full(y0, grid, mixed_params, 2e-3, x_obs=12)
        prop = WindowedPropagator(mixed_params, y0.window)
        worst = 0.0
        for k, t in enumerate(grid):
            u, v = prop.propagate(y0.u, y0.v, float(t))
            worst = max(worst, np.abs(traj.data[k, :, 0] - u).max(),
                        np.abs(traj.data[k, :, 1] - v).max())
        assert worst <= 1e-6

    def test_rejects_oversized_step(self, mixed_params):
        y0 = LatticeState.zeros((-32, 32))
        with pytest.raises(ValueError):
            evolve_full(y0, np.arange(0.0, 1.0, 0.1), mixed_params,
                        0.2 / mixed_params.a_max)

    def test_instability_check_fires_for_coarse_verlet(self, mixed_params):
        y0 = localized_state((-72, 72), 8, seed=2)
        dt = 0.1 / mixed_params.a_max  # admissible but energy error ~1e-3 for order 2
        with pytest.raises(StabilityError):
            evolve_full(y0, np.arange(0.0, 9.0, 1.0), mixed_params, dt,
                        scheme="verlet", x_obs=8)

    def test_window_overrun(self, mixed_params):
        y0 = LatticeState.zeros((-32, 32))
        with pytest.raises(WindowOverrunError):
            evolve_full(y0, np.arange(0.0, 30.0, 1.0), mixed_params, 1e-2, x_obs=4)

    def test_unknown_scheme(self, mixed_params):
        with pytest.raises(ValueError):
            evolve_full(LatticeState.zeros((-20, 20)), [0.0], mixed_params, 1e-2,
                        scheme="rk4")

    def test_half_line_window_is_dirichlet(self):
        # a window of strictly positive sites steps the wall condition exactly
        params = ChainParams(1.0, 2.0, 0.5, 1.0, 2.0)
        rng = np.random.default_rng(13)
        y0 = LatticeState.zeros((1, 96))
        y0.u[:12] = rng.standard_normal(12)
        y0.v[:12] = rng.standard_normal(12)
        traj = evolve_full(y0, np.array([0.0, 6.0]), params, 1e-3, x_obs=None)
        ref = LatticeState.zeros((-96, 96))
        ref.u[ref.index(1): ref.index(12) + 1] = y0.u[:12]
        ref.v[ref.index(1): ref.index(12) + 1] = y0.v[:12]
        spectral = evolve_unperturbed(ref, 6.0, params)
        sl = slice(spectral.index(1), None)
        assert np.abs(traj.data[1, :, 0] - spectral.u[sl]).max() < 1e-7


class TestTrajectory:
    def make(self, mixed_params):
        data = np.arange(5 * 7 * 2, dtype=float).reshape(5, 7, 2)
        return Trajectory(params=mixed_params, x_min=-3, t0=0.0, dt=0.5, data=data)

    def test_shift_zero_is_identity(self, mixed_params):
        traj = self.make(mixed_params)
        assert np.array_equal(shift_trajectory(traj, 0.0).data, traj.data)

    def test_shift_composition(self, mixed_params):
        traj = self.make(mixed_params)
        once = shift_trajectory(shift_trajectory(traj, 0.5), 1.0)
        direct = shift_trajectory(traj, 1.5)
        assert np.array_equal(once.data, direct.data)

    def test_shift_off_grid_rejected(self, mixed_params):
        with pytest.raises(SupportError):
            shift_trajectory(self.make(mixed_params), 0.3)

    def test_shift_outside_range_rejected(self, mixed_params):
        with pytest.raises(SupportError):
            shift_trajectory(self.make(mixed_params), 3.0)

    def test_time_index_lookup(self, mixed_params):
        traj = self.make(mixed_params)
        assert traj.time_index(1.5) == 3
        with pytest.raises(SupportError):
            traj.time_index(0.3)
        with pytest.raises(SupportError):
            traj.time_index(9.0)
