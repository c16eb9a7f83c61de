"""Random initial data: two stationary Gaussian moving-average fields glued at 0.

Each half of the measure is specified by finitely supported filter kernels
for the displacement and velocity channels.  Compact kernel support makes
the required decay and mixing properties exact rather than asymptotic: the
covariance vanishes beyond twice the kernel radius, and samples farther
apart than that are independent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import RIGHT, ChainParams, dispersion
from .dynamics import LatticeState, theta_grid
from .errors import WindowError
from .rng import normal_stream

GLUE_ORIGIN = "origin"
GLUE_NONE = "none"


@dataclass(frozen=True)
class HalfMeasureSpec:
    """Moving-average filters of one translation-invariant half.

    ``c0``/``c1`` hold the displacement/velocity kernels on taps
    k = -r .. r (odd length 2r + 1, zero-padded as needed).  When
    ``shared_driver`` is set both channels are driven by the same white
    noise, which produces nonzero cross-channel covariance; otherwise the
    channels are independent.
    """

    c0: tuple
    c1: tuple
    shared_driver: bool = False

    def __post_init__(self):
        c0 = np.asarray(self.c0, dtype=float)
        c1 = np.asarray(self.c1, dtype=float)
        r = max((len(c0) - 1) // 2, (len(c1) - 1) // 2, 0)
        c0 = _center_taps(c0, r)
        c1 = _center_taps(c1, r)
        if not (np.all(np.isfinite(c0)) and np.all(np.isfinite(c1))):
            raise ValueError("kernel taps must be finite")
        object.__setattr__(self, "c0", tuple(c0))
        object.__setattr__(self, "c1", tuple(c1))

    @property
    def r_supp(self) -> int:
        return (len(self.c0) - 1) // 2

    def kernel(self, channel: int) -> np.ndarray:
        return np.asarray(self.c0 if channel == 0 else self.c1, dtype=float)

    def covariance_lags(self) -> np.ndarray:
        """q^{ij}(x) = sum_k c^i(k + x) c^j(k) for lags x = -2r .. 2r.

        Returns shape (2, 2, 4r + 1); cross entries are identically zero
        when the channel drivers are independent.
        """
        r = self.r_supp
        out = np.zeros((2, 2, 4 * r + 1))
        kernels = [self.kernel(0), self.kernel(1)]
        for i in (0, 1):
            for j in (0, 1):
                if i != j and not self.shared_driver:
                    continue
                # correlate(a, b, 'full')[m] = sum_k a(k + m - 2r) b(k): lags -2r..2r
                out[i, j] = np.correlate(kernels[i], kernels[j], mode="full")
        return out

    def spectral_density(self, theta) -> np.ndarray:
        """q_hat^{ij}(theta) = sum_x q^{ij}(x) e^{i theta x}, shape (2, 2, n)."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        r = self.r_supp
        lags = np.arange(-2 * r, 2 * r + 1)
        phase = np.exp(1j * np.outer(lags, theta))
        q = self.covariance_lags()
        return np.einsum("ijx,xt->ijt", q, phase)


def _center_taps(c: np.ndarray, r: int) -> np.ndarray:
    if len(c) % 2 == 0:
        raise ValueError("kernels use centered taps; length must be odd")
    pad = r - (len(c) - 1) // 2
    if pad:
        c = np.concatenate([np.zeros(pad), c, np.zeros(pad)])
    return c


@dataclass(frozen=True)
class InitialMeasureSpec:
    """Glued two-sided initial measure.

    Sites x >= 0 take the right half's kernels, x < 0 the left's; the two
    halves are driven by independent noise.  ``glue='none'`` instead drives
    the whole line from a single stream (requires identical halves) and
    yields an exactly translation-invariant field, useful for the
    homogeneous chain.
    """

    left: HalfMeasureSpec
    right: HalfMeasureSpec
    glue: str = GLUE_ORIGIN

    def __post_init__(self):
        if self.glue not in (GLUE_ORIGIN, GLUE_NONE):
            raise ValueError(f"unknown glue rule {self.glue!r}")
        if self.glue == GLUE_NONE and self.left != self.right:
            raise ValueError("glue='none' requires identical half specifications")

    @property
    def r_supp(self) -> int:
        return max(self.left.r_supp, self.right.r_supp)

    @property
    def mean_energy_bound(self) -> float:
        """e0 = max over sides and channels of q^{ii}(0)."""
        vals = []
        for half in (self.left, self.right):
            q = half.covariance_lags()
            mid = q.shape[-1] // 2
            vals += [q[0, 0, mid], q[1, 1, mid]]
        return float(max(vals))

    def half(self, side: str) -> HalfMeasureSpec:
        return self.right if side == RIGHT else self.left


def theoretical_covariance(spec: InitialMeasureSpec):
    """Asymptotic covariances of the glued field, as (left, right) halves.

    Each entry exposes ``covariance_lags`` and ``spectral_density``; the
    symmetry relations q^{ii}(-x) = q^{ii}(x) and q^{10}(x) = q^{01}(-x)
    hold by construction and are exercised by the test suite.
    """
    return spec.left, spec.right


def _member_streams(spec: InitialMeasureSpec, seed, side_id: int):
    """Spawn keys for the (up to two) noise drivers of one side."""
    half = spec.left if side_id == 0 else spec.right
    if spec.glue == GLUE_NONE:
        side_id = 1  # single whole-line stream; both sides read the right driver
    key0 = (side_id, 0)
    key1 = key0 if half.shared_driver else (side_id, 1)
    return key0, key1


def _seed_tuple(seed) -> tuple:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(s) for s in seed)


def sample_initial(spec: InitialMeasureSpec, window: tuple[int, int], seed) -> LatticeState:
    """Draw Y0 on the window: Y0^i(x) = sum_k c^i_side(x)(x - k) xi(k).

    ``seed`` is an int or a tuple lineage such as (master_seed, member).
    The driving noise is indexed by absolute lattice position, so the same
    seed yields the same field restricted to any window, bit for bit,
    independent of how members are partitioned over workers.
    """
    x_min, x_max = int(window[0]), int(window[1])
    if x_max < x_min:
        raise WindowError("empty sampling window")
    lineage = _seed_tuple(seed)
    master, spawn_base = lineage[0], lineage[1:]

    u = np.zeros(x_max - x_min + 1)
    v = np.zeros_like(u)
    segments = []
    if spec.glue == GLUE_NONE:
        segments.append((1, x_min, x_max))
    else:
        if x_min < 0:
            segments.append((0, x_min, min(x_max, -1)))
        if x_max >= 0:
            segments.append((1, max(x_min, 0), x_max))

    for side_id, lo, hi in segments:
        half = spec.left if side_id == 0 else spec.right
        r = half.r_supp
        key0, key1 = _member_streams(spec, seed, side_id)
        xi = {}
        for key in {key0, key1}:
            xi[key] = normal_stream(master, spawn_base + key, lo - r, hi - lo + 1 + 2 * r)
        for channel, key in ((0, key0), (1, key1)):
            taps = half.kernel(channel)
            if not taps.any():
                continue
            # convolution: y(x) = sum_j taps(j) xi(x - j), taps indexed -r..r
            seg = np.convolve(xi[key], taps, mode="valid")
            (u if channel == 0 else v)[lo - x_min: hi - x_min + 1] = seg
    return LatticeState(x_min, u, v)


# --- stock specifications ----------------------------------------------------

def white_half(sigma_u: float = 1.0, sigma_v: float = 1.0) -> HalfMeasureSpec:
    """Independent site noise: q^00(x) = sigma_u^2 delta(x), q^11 likewise."""
    return HalfMeasureSpec(c0=(sigma_u,), c1=(sigma_v,))


def gibbs_half(params: ChainParams, side: str, temperature: float = 1.0,
               tail_tol: float = 1e-12, n_fft: int = 4096) -> HalfMeasureSpec:
    """Equilibrium-like half: q_hat^00 = T/phi^2, q_hat^11 = T, channels independent.

    Requires kappa_side > 0 (the displacement spectrum must be integrable).
    The displacement kernel is the inverse transform of sqrt(T)/phi,
    truncated where the exponentially decaying taps drop below ``tail_tol``
    relative to the peak; the realized covariance is exactly that of the
    truncated kernel, and oracle comparisons use the same kernels.
    """
    if params.kappa(side) <= 0:
        raise ValueError("equilibrium-like spectrum needs kappa > 0 on this side")
    theta = theta_grid(n_fft)
    amp = np.sqrt(temperature) / dispersion(theta, side, params)
    # inverse transform of an even real function: c(x) = (1/n) sum amp cos(x theta);
    # only lags below n/2 are alias-free, which is ample for exponential tails
    lags = np.arange(n_fft // 2)
    taps = np.cos(np.outer(lags, theta)) @ amp / n_fft
    peak = abs(taps[0])
    keep = np.nonzero(np.abs(taps) > tail_tol * peak)[0]
    r = int(keep.max()) if keep.size else 0
    if r >= n_fft // 4:
        raise ValueError("kernel tail did not decay; raise n_fft or the pinning")
    c0 = np.concatenate([taps[r:0:-1], taps[: r + 1]])
    return HalfMeasureSpec(c0=tuple(c0), c1=(np.sqrt(temperature),))


def empirical_covariance_rows(spec: InitialMeasureSpec, n_samples: int, master_seed: int,
                              extra_lags: int = 2):
    """Empirical vs designed covariance, deep inside each half.

    Samples the field at base sites far enough from the glue point that the
    statistics are purely one half's, and compares every channel pair at
    lags up to twice the kernel radius plus ``extra_lags`` (where the
    designed covariance is exactly zero).  Returns rows of
    (side, lag, channel-pair, theoretical, empirical, stderr).
    """
    rows = []
    for side, sgn in (("left", -1), ("right", 1)):
        half = spec.half(side)
        r = half.r_supp
        span = 2 * r + extra_lags
        base = sgn * (2 * r + 1)
        lo, hi = sorted((base, base + sgn * span))
        q = half.covariance_lags()
        fields = np.empty((n_samples, 2, hi - lo + 1))
        for m in range(n_samples):
            state = sample_initial(spec, (lo, hi), (master_seed, m))
            fields[m, 0] = state.u
            fields[m, 1] = state.v
        b = base - lo
        for lag in range(0, span + 1):
            for i in (0, 1):
                for j in (0, 1):
                    prod = fields[:, i, b + sgn * lag] * fields[:, j, b]
                    theory = q[i, j][sgn * lag + 2 * r] if lag <= 2 * r else 0.0
                    se = float(prod.std(ddof=1) / np.sqrt(n_samples))
                    rows.append((side, sgn * lag, f"{i}{j}", float(theory),
                                 float(prod.mean()), se))
    return rows


def white_measure(sigma_u: float = 1.0, sigma_v: float = 1.0) -> InitialMeasureSpec:
    half = white_half(sigma_u, sigma_v)
    return InitialMeasureSpec(left=half, right=half)


def gibbs_measure(params: ChainParams, temperature: float = 1.0,
                  tail_tol: float = 1e-12) -> InitialMeasureSpec:
    return InitialMeasureSpec(
        left=gibbs_half(params, "left", temperature, tail_tol),
        right=gibbs_half(params, "right", temperature, tail_tol),
    )
