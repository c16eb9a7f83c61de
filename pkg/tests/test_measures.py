import numpy as np
import pytest

from oscchain import ChainParams, sample_initial, theoretical_covariance, white_measure
from oscchain.chain import dispersion
from oscchain.dynamics import theta_grid
from oscchain.measures import (
    GLUE_NONE,
    HalfMeasureSpec,
    InitialMeasureSpec,
    gibbs_half,
    gibbs_measure,
)

SHARED = HalfMeasureSpec(c0=(0.3, 1.0, 0.5), c1=(0.0, 0.8, -0.3), shared_driver=True)
PLAIN = HalfMeasureSpec(c0=(1.0, 0.4, 0.1), c1=(0.5,))


def _sample_matrix(spec, window, n, seed=0):
    us = np.empty((n, window[1] - window[0] + 1))
    vs = np.empty_like(us)
    for m in range(n):
        st = sample_initial(spec, window, (seed, m))
        us[m] = st.u
        vs[m] = st.v
    return us, vs


class TestKernelCovariance:
    def test_direct_convolution_oracle(self):
        q = SHARED.covariance_lags()
        c = [np.asarray(SHARED.c0), np.asarray(SHARED.c1)]
        r = SHARED.r_supp
        for i in (0, 1):
            for j in (0, 1):
                for x in range(-2 * r, 2 * r + 1):
                    direct = sum(
                        c[i][k + x + r] * c[j][k + r]
                        for k in range(-r, r + 1)
                        if -r <= k + x <= r
                    )
                    assert q[i, j][x + 2 * r] == pytest.approx(direct, abs=1e-15)

    def test_symmetry_relations(self):
        for half in (SHARED, PLAIN):
            q = half.covariance_lags()
            assert np.allclose(q[0, 0], q[0, 0][::-1])     # q00(-x) = q00(x)
            assert np.allclose(q[1, 1], q[1, 1][::-1])
            assert np.allclose(q[1, 0], q[0, 1][::-1])     # q10(x) = q01(-x)

    def test_independent_channels_have_zero_cross(self):
        q = PLAIN.covariance_lags()
        assert np.all(q[0, 1] == 0.0) and np.all(q[1, 0] == 0.0)

    def test_white_noise_delta(self):
        half = HalfMeasureSpec(c0=(1.0,), c1=(0.0,))
        q = half.covariance_lags()
        assert q[0, 0].tolist() == [1.0]
        assert q[1, 1].tolist() == [0.0]

    def test_spectral_density_nonnegative(self):
        theta = theta_grid(512)
        for half in (SHARED, PLAIN):
            qhat = half.spectral_density(theta)
            assert np.all(qhat[0, 0].real >= -1e-14)
            assert np.all(qhat[1, 1].real >= -1e-14)
            assert np.abs(qhat[0, 0].imag).max() < 1e-13

    def test_compact_support(self):
        q = SHARED.covariance_lags()
        assert q.shape[-1] == 4 * SHARED.r_supp + 1  # nothing beyond 2 r_supp


class TestSampling:
    def test_bit_identical_for_same_seed(self):
        spec = InitialMeasureSpec(left=SHARED, right=PLAIN)
        a = sample_initial(spec, (-12, 12), (42, 3))
        b = sample_initial(spec, (-12, 12), (42, 3))
        assert np.array_equal(a.u, b.u) and np.array_equal(a.v, b.v)

    def test_window_restriction_invariance(self):
        spec = InitialMeasureSpec(left=SHARED, right=PLAIN)
        big = sample_initial(spec, (-12, 12), (42, 3))
        small = sample_initial(spec, (-4, 9), (42, 3))
        assert np.array_equal(small.u, big.u[8:22])
        assert np.array_equal(small.v, big.v[8:22])

    def test_zero_mean(self):
        spec = InitialMeasureSpec(left=SHARED, right=SHARED)
        us, vs = _sample_matrix(spec, (-3, 3), 4000)
        n = us.shape[0]
        for col in range(us.shape[1]):
            assert abs(us[:, col].mean()) < 4.0 * us[:, col].std() / np.sqrt(n)
            assert abs(vs[:, col].mean()) < 4.0 * max(vs[:, col].std(), 1e-12) / np.sqrt(n)

    def test_empirical_covariance_matches_design(self):
        spec = InitialMeasureSpec(left=SHARED, right=SHARED)
        q = SHARED.covariance_lags()
        r = SHARED.r_supp
        us, vs = _sample_matrix(spec, (1, 12), 20000)
        n = us.shape[0]
        for lag in range(0, 2 * r + 1):
            prod = us[:, lag] * us[:, 0]   # sites 1 + lag and 1
            expected = q[0, 0][lag + 2 * r]
            se = prod.std(ddof=1) / np.sqrt(n)
            assert abs(prod.mean() - expected) < 4 * se
        for lag in (2 * r + 1, 2 * r + 3):  # exactly-zero-consistent beyond support
            prod = us[:, lag] * us[:, 0]
            se = prod.std(ddof=1) / np.sqrt(n)
            assert abs(prod.mean()) < 4 * se

    def test_cross_half_independence(self):
        spec = InitialMeasureSpec(left=SHARED, right=SHARED)
        r = SHARED.r_supp
        n = 20000
        left = np.empty(n)
        right = np.empty(n)
        for m in range(n):
            st = sample_initial(spec, (-r - 2, r + 2), (5, m))
            left[m] = st.u[st.index(-r - 1)]
            right[m] = st.u[st.index(r + 1)]
        prod = left * right
        assert abs(prod.mean()) < 4 * prod.std(ddof=1) / np.sqrt(n)

    def test_fourth_moment_wick(self):
        spec = InitialMeasureSpec(left=SHARED, right=SHARED)
        us, _ = _sample_matrix(spec, (2, 4), 30000)
        q0 = SHARED.covariance_lags()[0, 0][2 * SHARED.r_supp]
        fourth = us[:, 0] ** 4
        se = fourth.std(ddof=1) / np.sqrt(len(fourth))
        assert abs(fourth.mean() - 3.0 * q0**2) < 5 * se

    def test_shared_driver_cross_covariance(self):
        spec = InitialMeasureSpec(left=SHARED, right=SHARED)
        q = SHARED.covariance_lags()
        r = SHARED.r_supp
        us, vs = _sample_matrix(spec, (1, 6), 20000)
        prod = us[:, 1] * vs[:, 0]  # E[u(2) v(1)] = q01(1)
        se = prod.std(ddof=1) / np.sqrt(len(prod))
        assert abs(prod.mean() - q[0, 1][1 + 2 * r]) < 4 * se

    def test_glue_none_is_stationary_across_origin(self):
        spec = InitialMeasureSpec(left=SHARED, right=SHARED, glue=GLUE_NONE)
        q = SHARED.covariance_lags()
        r = SHARED.r_supp
        us, _ = _sample_matrix(spec, (-2, 2), 20000)
        prod = us[:, 1] * us[:, 3]  # sites -1 and +1: lag 2 straddling the origin
        se = prod.std(ddof=1) / np.sqrt(len(prod))
        assert abs(prod.mean() - q[0, 0][2 + 2 * r]) < 4 * se

    def test_glue_none_needs_identical_halves(self):
        with pytest.raises(ValueError):
            InitialMeasureSpec(left=SHARED, right=PLAIN, glue=GLUE_NONE)


class TestStockSpecs:
    def test_gibbs_spectrum_shape(self):
        p = ChainParams(1.0, 2.0, 0.5, 1.0, 2.0)
        temperature = 1.3
        half = gibbs_half(p, "right", temperature)
        theta = theta_grid(1024)
        phi = dispersion(theta, "right", p)
        qhat = half.spectral_density(theta)
        assert np.abs(qhat[0, 0].real - temperature / phi**2).max() < 1e-9
        assert np.abs(qhat[1, 1].real - temperature).max() < 1e-14
        assert np.all(qhat[0, 1] == 0)

    def test_gibbs_requires_pinning(self):
        with pytest.raises(ValueError):
            gibbs_half(ChainParams(1.0, 1.0), "right")

    def test_energy_bound(self):
        spec = white_measure(sigma_u=2.0, sigma_v=1.0)
        assert spec.mean_energy_bound == pytest.approx(4.0)

    def test_theoretical_covariance_returns_halves(self):
        spec = gibbs_measure(ChainParams(1.0, 2.0, 0.5, 1.0, 2.0))
        left, right = theoretical_covariance(spec)
        assert left.r_supp > 0 and right.r_supp > 0
        assert left is spec.left and right is spec.right

    def test_kernel_length_must_be_odd(self):
        with pytest.raises(ValueError):
            HalfMeasureSpec(c0=(1.0, 0.5), c1=(0.0,))
