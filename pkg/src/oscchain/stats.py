"""Monte Carlo estimation of space-time correlations and limit diagnostics.

Estimators consume iterables of trajectories in a single pass, keep only
per-member pairing values, and reduce with a frozen pairwise summation
tree, so results are bit-identical however the ensemble is partitioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .chain import LEFT, RIGHT
from .dynamics import Trajectory
from .errors import InsufficientSamplesError, SupportError
from .limits import LimitSpectrum

SIGMA_THRESHOLD = 4.0  # single-comparison acceptance band, in standard errors


# --- deterministic reductions -------------------------------------------------

def pairwise_sum(values) -> float:
    """Sum by a fixed halving tree over the given order.

    Independent of numpy version and of how the values were produced in
    parallel; the traversal is frozen by the index order alone.
    """
    a = np.asarray(values, dtype=float).ravel()

    def rec(lo: int, hi: int) -> float:
        if hi - lo <= 8:
            total = 0.0
            for i in range(lo, hi):
                total += float(a[i])
            return total
        mid = (lo + hi) // 2
        return rec(lo, mid) + rec(mid, hi)

    return rec(0, len(a)) if len(a) else 0.0


def mean_and_stderr(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=float).ravel()
    n = len(a)
    if n < 2:
        raise InsufficientSamplesError("need at least 2 samples")
    mean = pairwise_sum(a) / n
    var = pairwise_sum((a - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


# --- test functions ------------------------------------------------------------

def bump(s):
    """C-infinity bump exp(1 - 1/(1 - s^2)) on |s| < 1, zero outside."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - si * si))
    return out


@dataclass(frozen=True)
class TestFunction:
    """Separable space-time probe v(x, t) = w(x) g(t).

    ``sites``/``weights`` give the finite spatial support; the temporal
    profile is a smooth bump of the given center and width, scaled by
    ``scale``, and is sampled on whatever trajectory grid the pairing uses.
    """

    __test__ = False  # not a pytest class, despite the name

    sites: tuple
    weights: tuple
    center: float
    width: float
    scale: float = 1.0
    label: str = ""

    def __post_init__(self):
        if len(self.sites) != len(self.weights) or not self.sites:
            raise ValueError("sites and weights must be matching nonempty tuples")
        if self.width <= 0:
            raise ValueError("temporal width must be positive")
        object.__setattr__(self, "sites", tuple(int(x) for x in self.sites))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    def profile(self, t) -> np.ndarray:
        return self.scale * bump(2.0 * (np.asarray(t, dtype=float) - self.center) / self.width)

    @property
    def t_support(self) -> tuple[float, float]:
        return (self.center - self.width / 2.0, self.center + self.width / 2.0)

    def time_samples(self, t0: float, dt: float, n_times: int | None = None):
        """Grid indices and Simpson-weighted profile samples on a trajectory grid.

        Returns (first_index, weighted_profile); the index range covers the
        support, extended by at most one grid point so the point count is
        odd (the profile vanishes there, so the value is unchanged).
        """
        lo, hi = self.t_support
        j0 = int(math.ceil((lo - t0) / dt - 1e-9))
        j1 = int(math.floor((hi - t0) / dt + 1e-9))
        if j1 <= j0:
            raise SupportError("temporal support shorter than the grid step")
        if (j1 - j0) % 2 == 1:
            j1 += 1
        if n_times is not None and (j0 < 0 or j1 >= n_times):
            raise SupportError(
                f"temporal support [{lo}, {hi}] not inside the recorded range"
            )
        g = self.profile(t0 + dt * np.arange(j0, j1 + 1))
        return j0, g * simpson_weights(j1 - j0 + 1, dt)

    def normalized(self, dt: float, t0: float = 0.0) -> "TestFunction":
        """Rescale so the sampled profile has unit Simpson mass on this grid."""
        _, wg = self.time_samples(t0, dt)
        return replace(self, scale=self.scale / float(wg.sum()))


def simpson_weights(n: int, dt: float) -> np.ndarray:
    """Composite Simpson weights for n (odd) uniformly spaced samples."""
    if n < 3 or n % 2 == 0:
        raise ValueError("Simpson rule needs an odd number of samples >= 3")
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (dt / 3.0)


def pair(traj: Trajectory, v: TestFunction) -> float:
    """Space-time pairing sum_x integral u(x, t) v(x, t) dt.

    Exact sum over the spatial support, composite Simpson in time on the
    trajectory grid.
    """
    j0, wg = v.time_samples(traj.t0, traj.dt, traj.n_times)
    cols = np.array([traj.site_index(x) for x in v.sites])
    block = traj.data[j0: j0 + len(wg), cols, 0]
    return float(np.asarray(v.weights) @ (wg @ block))


# --- single-pass pairing collection --------------------------------------------

def collect_pairings(ensemble, vs, taus) -> np.ndarray:
    """Per-member pairings [S_tau u, v] for every v and tau, one ensemble pass.

    Returns shape (n_members, len(vs), len(taus)).  Shifting by tau is an
    index offset on the shared grid, so the result is bit-identical to
    pairing explicitly shifted trajectories.
    """
    taus = list(taus)
    rows = []
    meta = None
    for traj in ensemble:
        if meta is None:
            meta = (traj.t0, traj.dt, traj.x_min, traj.n_times, traj.n_sites)
            plan = []
            for v in vs:
                j0, wg = v.time_samples(traj.t0, traj.dt)
                cols = np.array([traj.site_index(x) for x in v.sites])
                w = np.asarray(v.weights)
                offs = []
                for tau in taus:
                    steps = tau / traj.dt
                    k = int(round(steps))
                    if abs(steps - k) > 1e-9 * max(1.0, abs(steps)):
                        raise SupportError(f"shift {tau} not a multiple of the grid step")
                    if j0 + k < 0 or j0 + k + len(wg) > traj.n_times:
                        raise SupportError(
                            f"support of shifted probe (tau={tau}) outside recorded range"
                        )
                    offs.append(j0 + k)
                plan.append((cols, w, wg, offs))
        elif meta != (traj.t0, traj.dt, traj.x_min, traj.n_times, traj.n_sites):
            raise ValueError("ensemble members must share one grid and window")
        row = np.empty((len(vs), len(taus)))
        for a, (cols, w, wg, offs) in enumerate(plan):
            for b, start in enumerate(offs):
                block = traj.data[start: start + len(wg), cols, 0]
                row[a, b] = w @ (wg @ block)
        rows.append(row)
    if not rows:
        raise InsufficientSamplesError("empty ensemble")
    return np.array(rows)


# --- estimators -----------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationEstimate:
    """Empirical second moment of a pairing pair at one shift."""

    pair_id: str
    tau: float
    value: float
    stderr: float
    n: int
    mean1: float = 0.0
    mean2: float = 0.0

    def z_against(self, reference: float) -> float:
        return (self.value - reference) / self.stderr if self.stderr > 0 else math.inf


def _estimate_from_products(pair_id, tau, l1, l2) -> CorrelationEstimate:
    prod = l1 * l2
    value, stderr = mean_and_stderr(prod)
    return CorrelationEstimate(
        pair_id=pair_id, tau=float(tau), value=value, stderr=stderr, n=len(prod),
        mean1=pairwise_sum(l1) / len(l1), mean2=pairwise_sum(l2) / len(l2),
    )


def estimate_q_p(ensemble, v1: TestFunction, v2: TestFunction, tau: float,
                 pair_id: str = "") -> CorrelationEstimate:
    """Ensemble mean of [S_tau u, v1][S_tau u, v2] with its standard error."""
    ell = collect_pairings(ensemble, [v1, v2], [tau])
    return _estimate_from_products(pair_id or _default_pair_id(v1, v2), tau,
                                   ell[:, 0, 0], ell[:, 1, 0])


def _default_pair_id(v1, v2):
    a = v1.label or f"v@{v1.sites}"
    b = v2.label or f"v@{v2.sites}"
    return f"{a}*{b}"


@dataclass(frozen=True)
class ConvergenceTable:
    estimates: tuple
    cauchy_ratio: float
    cauchy_taus: tuple
    passed: bool


def convergence_track(ensemble, v1: TestFunction, v2: TestFunction, taus,
                      threshold: float = SIGMA_THRESHOLD) -> ConvergenceTable:
    """Estimates along increasing shifts plus a Cauchy stabilization indicator.

    The indicator takes the larger half of the shifts and reports the
    maximal pairwise difference in units of the combined standard errors.
    """
    taus = sorted(taus)
    ell = collect_pairings(ensemble, [v1, v2], taus)
    pid = _default_pair_id(v1, v2)
    estimates = tuple(
        _estimate_from_products(pid, tau, ell[:, 0, b], ell[:, 1, b])
        for b, tau in enumerate(taus)
    )
    top = estimates[len(estimates) // 2:] if len(estimates) > 1 else estimates
    ratio = 0.0
    for i in range(len(top)):
        for j in range(i + 1, len(top)):
            combined = math.hypot(top[i].stderr, top[j].stderr)
            if combined > 0:
                ratio = max(ratio, abs(top[i].value - top[j].value) / combined)
    return ConvergenceTable(
        estimates=estimates,
        cauchy_ratio=ratio,
        cauchy_taus=tuple(e.tau for e in top),
        passed=ratio <= threshold,
    )


# --- Gaussianity ------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianityReport:
    n: int
    tau: float
    z_fourth: tuple     # (quadruple, z) for the pair-factorization checks
    z_third: tuple      # (triple, z) for vanishing odd moments
    threshold: float
    passed: bool


def wick_fourth_z(l1, l2, l3, l4) -> float:
    """z-score of E[l1 l2 l3 l4] - (b12 b34 + b13 b24 + b14 b23).

    The standard error accounts for the estimated pair covariances through
    the delta method (influence function of the plug-in statistic).
    """
    cols = [np.asarray(c, dtype=float) for c in (l1, l2, l3, l4)]
    n = len(cols[0])
    prod = cols[0] * cols[1] * cols[2] * cols[3]
    m4 = pairwise_sum(prod) / n

    def pm(i, j):
        q = cols[i] * cols[j]
        return q, pairwise_sum(q) / n

    q12, b12 = pm(0, 1)
    q34, b34 = pm(2, 3)
    q13, b13 = pm(0, 2)
    q24, b24 = pm(1, 3)
    q14, b14 = pm(0, 3)
    q23, b23 = pm(1, 2)
    theta = m4 - (b12 * b34 + b13 * b24 + b14 * b23)
    influence = (
        prod - m4
        - b34 * (q12 - b12) - b12 * (q34 - b34)
        - b24 * (q13 - b13) - b13 * (q24 - b24)
        - b23 * (q14 - b14) - b14 * (q23 - b23)
    )
    var = pairwise_sum(influence**2) / (n - 1)
    se = math.sqrt(var / n)
    return theta / se if se > 0 else math.inf


def gaussianity_test(ensemble, vs, tau: float, min_samples: int = 1000,
                     threshold: float = SIGMA_THRESHOLD) -> GaussianityReport:
    """Moment-based Gaussianity check of the shifted pairings.

    Verifies the pair-partition identity for all site quadruples of the
    given probes and that all third moments vanish, reporting z-scores.
    Requires at least four probes and ``min_samples`` members.
    """
    if len(vs) < 4:
        raise ValueError("need at least 4 test functions")
    ell = collect_pairings(ensemble, vs, [tau])[:, :, 0]
    n = ell.shape[0]
    if n < min_samples:
        raise InsufficientSamplesError(f"need at least {min_samples} members, got {n}")

    from itertools import combinations_with_replacement

    # repeated indices matter: distinct independent probes satisfy the
    # factorization trivially, while kurtosis violations live on diagonals
    z_fourth = []
    for quad in combinations_with_replacement(range(len(vs)), 4):
        z = wick_fourth_z(*(ell[:, i] for i in quad))
        z_fourth.append((quad, z))
    z_third = []
    for trip in combinations_with_replacement(range(len(vs)), 3):
        prod = ell[:, trip[0]] * ell[:, trip[1]] * ell[:, trip[2]]
        mean, se = mean_and_stderr(prod)
        z_third.append((trip, mean / se if se > 0 else math.inf))

    zs = [abs(z) for _, z in z_fourth] + [abs(z) for _, z in z_third]
    return GaussianityReport(
        n=n, tau=float(tau),
        z_fourth=tuple(z_fourth), z_third=tuple(z_third),
        threshold=threshold, passed=max(zs) <= threshold,
    )


# --- mixing -----------------------------------------------------------------------

@dataclass(frozen=True)
class MixingRow:
    tau: float
    value: float
    stderr: float
    n: int
    z_zero: float
    oracle: float | None = None
    z_oracle: float | None = None


def mixing_diagnostic(ensemble, v1: TestFunction, v2: TestFunction, taus,
                      tau_base: float, oracle=None) -> tuple:
    """Decay of E[[S_{tau_base+tau} u, v1][S_{tau_base} u, v2]] toward zero.

    ``tau_base`` anchors the second factor at a large shift where the
    statistics are near-stationary.  ``oracle``, when given, maps tau to the
    analytic value (the decoupled-problem quadrature) and adds a z-score
    against it.
    """
    taus = list(taus)
    ell = collect_pairings(ensemble, [v1, v2], [tau_base + tau for tau in taus] + [tau_base])
    base = ell[:, 1, -1]
    rows = []
    for b, tau in enumerate(taus):
        est = _estimate_from_products(_default_pair_id(v1, v2), tau, ell[:, 0, b], base)
        oracle_value = None if oracle is None else float(oracle(tau))
        rows.append(MixingRow(
            tau=float(tau), value=est.value, stderr=est.stderr, n=est.n,
            z_zero=est.value / est.stderr if est.stderr > 0 else math.inf,
            oracle=oracle_value,
            z_oracle=None if oracle_value is None else est.z_against(oracle_value),
        ))
    return tuple(rows)


# --- point estimators ---------------------------------------------------------------

def estimate_point_correlation(ensemble, x1: int, t1: float, x2: int, t2: float) -> CorrelationEstimate:
    """Mean of u(x1, t1) u(x2, t2) over the ensemble (grid-aligned times)."""
    products = []
    l1 = []
    l2 = []
    for traj in ensemble:
        k1, k2 = traj.time_index(t1), traj.time_index(t2)
        a = traj.data[k1, traj.site_index(x1), 0]
        b = traj.data[k2, traj.site_index(x2), 0]
        products.append(a * b)
        l1.append(a)
        l2.append(b)
    if len(products) < 2:
        raise InsufficientSamplesError("empty ensemble")
    value, stderr = mean_and_stderr(products)
    return CorrelationEstimate(
        pair_id=f"u({x1},{t1})*u({x2},{t2})", tau=0.0, value=value, stderr=stderr,
        n=len(products), mean1=pairwise_sum(l1) / len(l1), mean2=pairwise_sum(l2) / len(l2),
    )


def estimate_state_covariance(states, probes) -> tuple:
    """Equal-time covariance estimates for channel/site probes.

    ``probes`` is an iterable of (i, x, j, y) with channels i, j in {0, 1};
    returns one CorrelationEstimate per probe, all from a single pass.
    """
    probes = list(probes)
    samples = [[] for _ in probes]
    for state in states:
        fields = (state.u, state.v)
        for p, (i, x, j, y) in enumerate(probes):
            samples[p].append(fields[i][state.index(x)] * fields[j][state.index(y)])
    out = []
    for p, (i, x, j, y) in enumerate(probes):
        if len(samples[p]) < 2:
            raise InsufficientSamplesError("empty ensemble")
        value, stderr = mean_and_stderr(samples[p])
        out.append(CorrelationEstimate(
            pair_id=f"Y{i}({x})*Y{j}({y})", tau=0.0, value=value, stderr=stderr,
            n=len(samples[p]),
        ))
    return tuple(out)


# --- analytic pairing quadratures (oracles for the decoupled problem) ----------------

def spacetime_form_oracle(v1: TestFunction, v2: TestFunction, spectra: dict,
                          dt: float, tau: float = 0.0) -> float:
    """Quadrature of the limiting space-time form against two probes.

    At ``tau`` = 0 this is the limiting quadratic form of the decoupled
    problem; positive ``tau`` gives the mixing kernel with the first probe
    shifted.  The temporal integrals reuse the probes' Simpson samples on a
    grid of the same step as the empirical pairing, so the comparison
    carries no discretization mismatch.
    """
    total = 0.0
    for side, sgn in ((LEFT, -1), (RIGHT, 1)):
        sp: LimitSpectrum = spectra[side]
        sites1 = [(x, w) for x, w in zip(v1.sites, v1.weights) if sgn * x > 0]
        sites2 = [(x, w) for x, w in zip(v2.sites, v2.weights) if sgn * x > 0]
        if not sites1 or not sites2:
            continue
        j1, wg1 = v1.time_samples(0.0, dt)
        j2, wg2 = v2.time_samples(0.0, dt)
        t1 = dt * (j1 + np.arange(len(wg1))) + tau
        t2 = dt * (j2 + np.arange(len(wg2)))
        c1 = wg1 @ np.cos(np.outer(t1, sp.phi))
        s1 = wg1 @ np.sin(np.outer(t1, sp.phi))
        c2 = wg2 @ np.cos(np.outer(t2, sp.phi))
        s2 = wg2 @ np.sin(np.outer(t2, sp.phi))
        time_factor = c1 * c2 + s1 * s2          # integral of cos(phi (t1 - t2))
        space = np.zeros_like(sp.q00)
        for x1, w1 in sites1:
            sx1 = np.sin(x1 * sp.theta)
            for x2, w2 in sites2:
                space += (w1 * w2) * sx1 * np.sin(x2 * sp.theta)
        total += float(np.sum(time_factor * sp.q00 * space) * 4.0 / sp.n_theta)
    return total
