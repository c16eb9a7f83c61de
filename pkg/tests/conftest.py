"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest

from oscchain import ChainParams
from oscchain.dynamics import fundamental_kernel


@pytest.fixture
def mixed_params():
    """Pinned, asymmetric halves; admissible origin pinning."""
    return ChainParams(1.0, 2.0, 0.5, 1.0, 2.0)


@pytest.fixture
def homogeneous_params():
    return ChainParams(1.0, 1.0, 0.5, 0.5, 0.5)


def dense_equal_time_cov(spec, params, window_l, t, probes, n_theta=None):
    """Exact finite-time covariance via dense kernel sandwich, per side.

    Builds the initial covariance matrix of each half from the kernel lags,
    propagates it through the dense mirror Green matrix, and reads the probe
    entries.  Sites on opposite halves are independent at all times, so
    cross-sign probes return exactly zero.
    """
    cache = {}

    def side_matrix(side):
        if side in cache:
            return cache[side]
        half = spec.left if side == "left" else spec.right
        q = half.covariance_lags()
        r = half.r_supp
        idx = np.arange(1, window_l + 1)
        lag = idx[:, None] - idx[None, :]
        q0 = np.zeros((2 * window_l, 2 * window_l))
        for i in (0, 1):
            for j in (0, 1):
                block = np.where(
                    np.abs(lag) <= 2 * r, q[i, j][np.clip(lag + 2 * r, 0, 4 * r)], 0.0
                )
                q0[i * window_l:(i + 1) * window_l, j * window_l:(j + 1) * window_l] = block
        kern = fundamental_kernel([t], side, params, 2 * window_l + 2, n_theta=n_theta)[0]
        diff = np.abs(idx[:, None] - idx[None, :])
        summ = idx[:, None] + idx[None, :]
        g = np.zeros((2 * window_l, 2 * window_l))
        for i in (0, 1):
            for j in (0, 1):
                g[i * window_l:(i + 1) * window_l, j * window_l:(j + 1) * window_l] = (
                    kern[:, i, j][diff] - kern[:, i, j][summ]
                )
        cache[side] = g @ q0 @ g.T
        return cache[side]

    out = {}
    for (i, x, j, y) in probes:
        if x * y <= 0:
            out[(i, x, j, y)] = 0.0
            continue
        side = "right" if x > 0 else "left"
        qt = side_matrix(side)
        a, b = abs(x) - 1, abs(y) - 1
        out[(i, x, j, y)] = qt[i * window_l + a, j * window_l + b]
    return out
