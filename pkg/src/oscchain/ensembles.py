"""Ensemble generation: many independent realizations, streamed in batches.

Members are keyed by (master_seed, member index), so any partition of the
index range over workers reproduces the same realizations bit for bit.
Trajectories are recorded on a small probe window only; the simulation
window is sized by the signal-cone rule so the truncation never reaches the
probes within the simulated horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chain import LEFT, RIGHT, ChainParams, hamiltonian
from .dynamics import (
    LatticeState,
    Trajectory,
    WindowedPropagator,
    _SWEEPS,
    auto_n_theta,
    force_coefficients,
    fundamental_kernel,
    required_half_width,
)
from .errors import StabilityError, WindowOverrunError
from .measures import InitialMeasureSpec, sample_initial
from .rng import normal_stream

BATCH = 256  # fixed batch size; results must not depend on worker partitioning


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    dt: float
    n: int

    def __post_init__(self):
        if self.dt <= 0 or self.n < 1:
            raise ValueError("need dt > 0 and at least one sample")
        ratio = self.t0 / self.dt
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("t0 must be a multiple of dt (keeps oracle grids aligned)")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (self.n - 1)


def _check_window(window_l: int, probe_extent: int, t_end: float, params: ChainParams):
    need = required_half_width(probe_extent, t_end, params)
    if window_l < need:
        raise WindowOverrunError(need)


def states_batch(spec: InitialMeasureSpec, window: tuple[int, int],
                 master_seed: int, members) -> np.ndarray:
    """Initial data for the given member indices, shape (m, 2, n_sites)."""
    n = window[1] - window[0] + 1
    out = np.empty((len(members), 2, n))
    for i, member in enumerate(members):
        state = sample_initial(spec, window, (master_seed, int(member)))
        out[i, 0] = state.u
        out[i, 1] = state.v
    return out


def _member_chunks(stop: int, start: int = 0):
    """Member index blocks aligned to absolute multiples of BATCH.

    Alignment keeps every matrix product's shape independent of how member
    ranges are split over workers, which keeps results bit-identical.
    ``start`` must sit on a batch boundary.
    """
    if start % BATCH:
        raise ValueError(f"member ranges must start on multiples of {BATCH}")
    for lo in range(start, stop, BATCH):
        yield np.arange(lo, min(lo + BATCH, stop))


def _emit(params, probe_window, grid: TimeGrid, block, master_seed, members, provenance):
    for i, member in enumerate(members):
        yield Trajectory(
            params=params, x_min=probe_window[0], t0=grid.t0, dt=grid.dt,
            data=block[i], provenance=provenance, seed=(master_seed, int(member)),
        )


# --- decoupled (zero condition at the origin), exact spectral --------------------

def _half_tensor(side: str, params: ChainParams, times, probes_abs: np.ndarray,
                 window_l: int, n_theta: int | None):
    """Green rows: (n_t, n_p, 2, 2, window_l) over source labels y = 1..window_l."""
    extent = int(probes_abs.max()) + window_l
    if n_theta is None:
        n_theta = auto_n_theta(extent, float(np.abs(times).max()), params)
    kern = fundamental_kernel(times, side, params, extent, n_theta=n_theta)
    y = np.arange(1, window_l + 1)
    diff = np.abs(probes_abs[:, None] - y[None, :])
    summ = probes_abs[:, None] + y[None, :]
    rows = kern[:, diff] - kern[:, summ]          # (n_t, n_p, L, 2, 2)
    return rows.transpose(0, 1, 3, 4, 2)          # (n_t, n_p, 2, 2, L)


def decoupled_ensemble(spec: InitialMeasureSpec, params: ChainParams, window_l: int,
                       probe_window: tuple[int, int], grid: TimeGrid, n_members: int,
                       master_seed: int, n_theta: int | None = None, start: int = 0):
    """Trajectories of the decoupled problem on the probe window (lazy).

    Evolution is the exact mirror-kernel application; with the cone-sized
    simulation window the recorded values match the infinite chain to
    roundoff.
    """
    probes = np.arange(probe_window[0], probe_window[1] + 1)
    _check_window(window_l, int(np.abs(probes).max()), grid.t_end, params)
    times = grid.times
    n_p = len(probes)

    ops = []
    for side, sgn in ((LEFT, -1), (RIGHT, 1)):
        mask = sgn * probes >= 1
        if not mask.any():
            continue
        rows = _half_tensor(side, params, times, np.abs(probes[mask]), window_l, n_theta)
        mat = rows.reshape(grid.n * mask.sum() * 2, 2 * window_l)
        ops.append((side, mask, mat))

    for members in _member_chunks(n_members, start):
        states = states_batch(spec, (-window_l, window_l), master_seed, members)
        block = np.zeros((len(members), grid.n, n_p, 2))
        for side, mask, mat in ops:
            if side == RIGHT:
                src = states[:, :, window_l + 1:]                  # y = 1..L
            else:
                src = states[:, :, window_l - 1::-1]               # y = -1..-L mirrored
            z = mat @ src.reshape(len(members), 2 * window_l).T    # (t*p*2, m)
            z = z.reshape(grid.n, int(mask.sum()), 2, len(members))
            block[:, :, mask, :] = z.transpose(3, 0, 1, 2)
        yield from _emit(params, probe_window, grid, block, master_seed, members, "spectral")


# --- homogeneous whole line, exact spectral ---------------------------------------

def whole_line_ensemble(spec: InitialMeasureSpec, params: ChainParams, window_l: int,
                        probe_window: tuple[int, int], grid: TimeGrid, n_members: int,
                        master_seed: int, n_theta: int | None = None, start: int = 0):
    """Whole-line trajectories of the homogeneous chain on the probe window."""
    if not params.homogeneous:
        raise ValueError("whole-line ensemble requires homogeneous parameters")
    probes = np.arange(probe_window[0], probe_window[1] + 1)
    _check_window(window_l, int(np.abs(probes).max()), grid.t_end, params)
    times = grid.times

    extent = int(np.abs(probes).max()) + window_l
    if n_theta is None:
        n_theta = auto_n_theta(extent, float(np.abs(times).max()), params)
    kern = fundamental_kernel(times, RIGHT, params, extent, n_theta=n_theta)
    y = np.arange(-window_l, window_l + 1)
    rows = kern[:, np.abs(probes[:, None] - y[None, :])]   # (n_t, n_p, n_y, 2, 2)
    mat = rows.transpose(0, 1, 3, 4, 2).reshape(grid.n * len(probes) * 2, 2 * len(y))

    for members in _member_chunks(n_members, start):
        states = states_batch(spec, (-window_l, window_l), master_seed, members)
        z = mat @ states.reshape(len(members), -1).T
        block = z.reshape(grid.n, len(probes), 2, len(members)).transpose(3, 0, 1, 2)
        yield from _emit(params, probe_window, grid, block, master_seed, members, "spectral")


# --- coupled chain on a clamped window ---------------------------------------------

def coupled_ensemble(spec: InitialMeasureSpec, params: ChainParams, window_l: int,
                     probe_window: tuple[int, int], grid: TimeGrid, n_members: int,
                     master_seed: int, engine: str = "modal", dt_internal: float | None = None,
                     scheme: str = "yoshida4", start: int = 0):
    """Trajectories of the full coupled chain on the probe window (lazy).

    ``engine='modal'`` diagonalizes the clamped windowed operator once and
    propagates exactly; ``engine='stepping'`` runs the symplectic stepper
    (slower, used for cross-validation and for hash-stable outputs).
    """
    probes = np.arange(probe_window[0], probe_window[1] + 1)
    _check_window(window_l, int(np.abs(probes).max()), grid.t_end, params)
    window = (-window_l, window_l)
    probe_idx = probes + window_l

    if engine == "modal":
        prop = WindowedPropagator(params, window)
        for members in _member_chunks(n_members, start):
            states = states_batch(spec, window, master_seed, members)
            cu, cv = prop.modal(states[:, 0], states[:, 1])
            block = np.empty((len(members), grid.n, len(probes), 2))
            for k, t in enumerate(grid.times):
                u, v = prop.read_out(cu, cv, float(t), site_index=probe_idx)
                block[:, k, :, 0] = u
                block[:, k, :, 1] = v
            yield from _emit(params, probe_window, grid, block, master_seed, members, "spectral")
    elif engine == "stepping":
        if dt_internal is None:
            dt_internal = 0.02 / params.a_max
        steps_per_rec = max(1, int(math.ceil(grid.dt / dt_internal - 1e-12)))
        dt = grid.dt / steps_per_rec
        sweep = _SWEEPS[scheme]
        coeffs = force_coefficients(params, np.arange(-window_l, window_l + 1))
        lead = int(round(grid.t0 / grid.dt))
        for members in _member_chunks(n_members, start):
            states = states_batch(spec, window, master_seed, members)
            u = states[:, 0].copy()
            v = states[:, 1].copy()
            h0 = hamiltonian(LatticeState(-window_l, u[0], v[0]), params)
            a_buf = np.empty_like(u)
            block = np.empty((len(members), grid.n, len(probes), 2))
            for k in range(lead):
                sweep(u, v, coeffs, dt, steps_per_rec, a_buf)
            for k in range(grid.n):
                if k:
                    sweep(u, v, coeffs, dt, steps_per_rec, a_buf)
                block[:, k, :, 0] = u[:, probe_idx]
                block[:, k, :, 1] = v[:, probe_idx]
            h1 = hamiltonian(LatticeState(-window_l, u[0], v[0]), params)
            if h0 > 0 and abs(h1 - h0) > 1e-6 * h0:
                raise StabilityError(f"energy deviation {abs(h1 - h0) / h0:.3e} in ensemble stepping")
            yield from _emit(params, probe_window, grid, block, master_seed, members, "stepping")
    else:
        raise ValueError(f"unknown engine {engine!r}")


# --- equal-time states ---------------------------------------------------------------

def decoupled_states_at(spec: InitialMeasureSpec, params: ChainParams, window_l: int,
                        probe_window: tuple[int, int], t: float, n_members: int,
                        master_seed: int, n_theta: int | None = None, start: int = 0):
    """States of the decoupled problem at one time, restricted to the probe window."""
    probes = np.arange(probe_window[0], probe_window[1] + 1)
    _check_window(window_l, int(np.abs(probes).max()), t, params)
    times = np.array([float(t)])
    n_p = len(probes)
    ops = []
    for side, sgn in ((LEFT, -1), (RIGHT, 1)):
        mask = sgn * probes >= 1
        if not mask.any():
            continue
        rows = _half_tensor(side, params, times, np.abs(probes[mask]), window_l, n_theta)
        ops.append((side, mask, rows.reshape(mask.sum() * 2, 2 * window_l)))
    for members in _member_chunks(n_members, start):
        states = states_batch(spec, (-window_l, window_l), master_seed, members)
        block = np.zeros((len(members), n_p, 2))
        for side, mask, mat in ops:
            if side == RIGHT:
                src = states[:, :, window_l + 1:]
            else:
                src = states[:, :, window_l - 1::-1]
            z = mat @ src.reshape(len(members), 2 * window_l).T
            z = z.reshape(int(mask.sum()), 2, len(members))
            block[:, mask, :] = z.transpose(2, 0, 1)
        for i in range(len(members)):
            yield LatticeState(probe_window[0], block[i, :, 0], block[i, :, 1])


# --- synthetic ensembles (estimator calibration and negative controls) ----------------

def synthetic_gaussian_ensemble(params: ChainParams, probe_window: tuple[int, int],
                                grid: TimeGrid, n_members: int, master_seed: int,
                                sigma: float = 1.0, cube: bool = False):
    """White-in-space-and-time Gaussian trajectories (optionally cubed).

    Not a chain solution: every recorded value is independent N(0, sigma^2).
    Exactly Gaussian input for estimator null tests; ``cube=True`` cubes the
    displacement channel, a deliberately non-Gaussian control with known
    excess kurtosis.
    """
    n_p = probe_window[1] - probe_window[0] + 1
    count = grid.n * n_p * 2
    for member in range(n_members):
        flat = sigma * normal_stream(master_seed, (int(member), 9, 0), 0, count)
        data = flat.reshape(grid.n, n_p, 2)
        if cube:
            data = data.copy()
            data[:, :, 0] = data[:, :, 0] ** 3
        yield Trajectory(params=params, x_min=probe_window[0], t0=grid.t0, dt=grid.dt,
                         data=data, provenance="spectral", seed=(master_seed, member))
