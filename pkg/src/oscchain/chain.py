"""Chain constants, dispersion relations, admissibility checks, energy, weighted norms.

The chain consists of two semi-infinite halves of unit-mass oscillators with
nearest-neighbor coupling nu_side^2 and on-site pinning kappa_side^2, plus a
separate pinning kappa_0^2 acting on the particle at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .errors import WindowError

if TYPE_CHECKING:  # pragma: no cover
    from .dynamics import LatticeState, Trajectory

LEFT = "left"
RIGHT = "right"
SIDES = (LEFT, RIGHT)


@dataclass(frozen=True)
class ChainParams:
    """Coupling/pinning constants and derived band edges.

    Instances are normalized so that kappa_minus <= kappa_plus; if the input
    violates that, the two halves are swapped (the chain is mirrored) and
    ``mirrored`` records the swap.
    """

    nu_minus: float
    nu_plus: float
    kappa_minus: float = 0.0
    kappa_plus: float = 0.0
    kappa_0: float = 0.0
    mirrored: bool = False

    def __post_init__(self):
        for name in ("nu_minus", "nu_plus", "kappa_minus", "kappa_plus", "kappa_0"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.nu_minus <= 0 or self.nu_plus <= 0:
            raise ValueError("interaction constants nu_minus, nu_plus must be positive")
        if min(self.kappa_minus, self.kappa_plus, self.kappa_0) < 0:
            raise ValueError("pinning constants must be nonnegative")
        if self.kappa_minus > self.kappa_plus:
            nu_m, nu_p = self.nu_plus, self.nu_minus
            ka_m, ka_p = self.kappa_plus, self.kappa_minus
            object.__setattr__(self, "nu_minus", nu_m)
            object.__setattr__(self, "nu_plus", nu_p)
            object.__setattr__(self, "kappa_minus", ka_m)
            object.__setattr__(self, "kappa_plus", ka_p)
            object.__setattr__(self, "mirrored", True)

    def nu(self, side: str) -> float:
        return self.nu_plus if side == RIGHT else self.nu_minus

    def kappa(self, side: str) -> float:
        return self.kappa_plus if side == RIGHT else self.kappa_minus

    def band_top(self, side: str) -> float:
        """Upper band edge a_side = sqrt(4 nu^2 + kappa^2)."""
        return math.hypot(2.0 * self.nu(side), self.kappa(side))

    @property
    def a_minus(self) -> float:
        return self.band_top(LEFT)

    @property
    def a_plus(self) -> float:
        return self.band_top(RIGHT)

    @property
    def a_max(self) -> float:
        return max(self.a_minus, self.a_plus)

    @property
    def v_max(self) -> float:
        """Group-velocity bound max(nu_minus, nu_plus)."""
        return max(self.nu_minus, self.nu_plus)

    @property
    def homogeneous(self) -> bool:
        return (
            self.nu_minus == self.nu_plus
            and self.kappa_minus == self.kappa_plus == self.kappa_0
        )

    @property
    def identical_halves(self) -> bool:
        return self.nu_minus == self.nu_plus and self.kappa_minus == self.kappa_plus


def dispersion(theta, side: str, params: ChainParams):
    """Lattice dispersion phi_side(theta) = sqrt(nu^2 (2 - 2 cos theta) + kappa^2).

    Evaluated as sqrt(4 nu^2 sin^2(theta/2) + kappa^2), which is exact and
    well behaved near theta = 0.  Accepts scalars or arrays; total (no error
    cases), even in theta, with range [kappa_side, a_side].
    """
    nu = params.nu(side)
    kappa = params.kappa(side)
    s = np.sin(np.asarray(theta, dtype=float) / 2.0)
    return np.sqrt(4.0 * nu * nu * s * s + kappa * kappa)


# --- condition C -----------------------------------------------------------

IDENTICAL_HALVES = "identical-halves"
UPPER_BOUND = "origin-pinning-below-band-overlap"
LOWER_BOUND = "origin-pinning-above-gap-floor"
GAP_WINDOW = "gap-window"
UNPINNED_ORIGIN = "unpinned-origin"


@dataclass(frozen=True)
class ClauseResult:
    clause: str
    applicable: bool
    passed: bool
    detail: str


@dataclass(frozen=True)
class ConditionReport:
    admissible: bool
    clauses: tuple[ClauseResult, ...]

    @property
    def failed(self) -> tuple[str, ...]:
        return tuple(c.clause for c in self.clauses if c.applicable and not c.passed)


def _sqrt_nonneg(radicand: float, label: str) -> float:
    # Strictly guard radicands; clause branch selection must guarantee them.
    if radicand < 0:
        raise ArithmeticError(f"negative radicand in {label}: {radicand}")
    return math.sqrt(radicand)


def _k_upper(omega2: float, kappa2: float, a2: float, base: float, label: str) -> float:
    # (kappa_-^2 + kappa_+^2)/2 + sqrt(omega^2 - kappa^2) sqrt(omega^2 - a^2) / 2,
    # defined for omega^2 >= a^2.
    return base + 0.5 * _sqrt_nonneg(omega2 - kappa2, label) * _sqrt_nonneg(omega2 - a2, label)


def _k_zero(omega2: float, kappa_p2: float, a_p2: float, base: float, label: str) -> float:
    # (kappa_-^2 + kappa_+^2)/2 - sqrt(kappa_+^2 - omega^2) sqrt(a_+^2 - omega^2) / 2,
    # defined for omega^2 <= kappa_+^2 (only when kappa_+ > 0).
    return base - 0.5 * _sqrt_nonneg(kappa_p2 - omega2, label) * _sqrt_nonneg(a_p2 - omega2, label)


def check_condition_c(params: ChainParams) -> ConditionReport:
    """Evaluate every clause of the admissibility condition on kappa_0.

    All applicable clauses must hold (conjunction, including at the boundary
    a_- = a_+ where both band-overlap branches apply).  Inequalities are
    strict; ties report as violated.  Identical halves are always rejected.
    """
    ka_m2 = params.kappa_minus**2
    ka_p2 = params.kappa_plus**2
    a_m2 = 4.0 * params.nu_minus**2 + ka_m2
    a_p2 = 4.0 * params.nu_plus**2 + ka_p2
    k0sq = params.kappa_0**2
    base = 0.5 * (ka_m2 + ka_p2)

    clauses = []

    same = params.identical_halves
    clauses.append(
        ClauseResult(
            IDENTICAL_HALVES,
            applicable=True,
            passed=not same,
            detail="identical halves excluded" if same else "halves differ",
        )
    )

    # Band-overlap upper bounds on kappa_0^2; at a_- = a_+ both apply.
    upper_ok = True
    details = []
    if a_m2 >= a_p2:
        bound = _k_upper(a_m2, ka_p2, a_p2, base, "K_+(a_-)")
        upper_ok &= k0sq < bound
        details.append(f"kappa_0^2 = {k0sq:.12g} < K_+(a_-) = {bound:.12g}: {k0sq < bound}")
    if a_p2 >= a_m2:
        bound = _k_upper(a_p2, ka_m2, a_m2, base, "K_-(a_+)")
        upper_ok &= k0sq < bound
        details.append(f"kappa_0^2 = {k0sq:.12g} < K_-(a_+) = {bound:.12g}: {k0sq < bound}")
    clauses.append(ClauseResult(UPPER_BOUND, True, upper_ok, "; ".join(details)))

    if params.kappa_minus != 0.0:
        bound = _k_zero(ka_m2, ka_p2, a_p2, base, "K_0(kappa_-)")
        ok = k0sq > bound
        clauses.append(
            ClauseResult(LOWER_BOUND, True, ok, f"kappa_0^2 = {k0sq:.12g} > K_0(kappa_-) = {bound:.12g}: {ok}")
        )
    else:
        clauses.append(ClauseResult(LOWER_BOUND, False, True, "kappa_- = 0: not applicable"))

    if a_m2 <= ka_p2:
        hi = _k_upper(ka_p2, ka_m2, a_m2, base, "K_-(kappa_+)")
        lo = _k_zero(a_m2, ka_p2, a_p2, base, "K_0(a_-)")
        ok = (k0sq > hi) or (k0sq < lo)
        clauses.append(
            ClauseResult(
                GAP_WINDOW,
                True,
                ok,
                f"kappa_0^2 = {k0sq:.12g} > K_-(kappa_+) = {hi:.12g} or < K_0(a_-) = {lo:.12g}: {ok}",
            )
        )
    else:
        clauses.append(ClauseResult(GAP_WINDOW, False, True, "a_- > kappa_+: not applicable"))

    if params.kappa_minus == 0.0 and params.kappa_plus == 0.0:
        ok = params.kappa_0 != 0.0
        clauses.append(ClauseResult(UNPINNED_ORIGIN, True, ok, f"kappa_0 = {params.kappa_0:.12g} != 0: {ok}"))
    else:
        clauses.append(ClauseResult(UNPINNED_ORIGIN, False, True, "some half is pinned: not applicable"))

    admissible = all(c.passed for c in clauses if c.applicable)
    return ConditionReport(admissible=admissible, clauses=tuple(clauses))


def equal_pinning_interval(params: ChainParams) -> tuple[float, float]:
    """Admissible kappa_0^2 interval in the kappa_- = kappa_+ case.

    (kappa_-^2, kappa_-^2 + 2 max(nu) sqrt(|nu_-^2 - nu_+^2|)); requires
    nu_- != nu_+ for the interval to be nonempty.
    """
    if params.kappa_minus != params.kappa_plus:
        raise ValueError("interval form only applies when kappa_- = kappa_+")
    ka2 = params.kappa_minus**2
    width = 2.0 * max(params.nu_minus, params.nu_plus) * math.sqrt(
        abs(params.nu_minus**2 - params.nu_plus**2)
    )
    return ka2, ka2 + width


# --- energy ----------------------------------------------------------------

def hamiltonian(state: "LatticeState", params: ChainParams) -> float:
    """Total energy H = H_+ + H_- + H_0 of a windowed state.

    Sites outside the window are clamped to zero (same convention as the
    stepping solver), so the bonds from the window edges to the first
    missing site contribute.  The bonds (0, 1) and (-1, 0) belong to the
    origin part H_0, so every bond is counted exactly once.
    """
    u, v = state.u, state.v
    n = u.shape[-1]
    if n < 3:
        raise WindowError("hamiltonian needs a window of at least 3 sites")
    x_min = state.x_min
    x_max = x_min + n - 1
    if not (x_min <= 0 <= x_max):
        raise WindowError("hamiltonian window must contain the origin")

    i0 = -x_min  # index of site 0
    pad = np.zeros(u.shape[:-1] + (n + 2,), dtype=float)
    pad[..., 1:-1] = u
    bond = np.diff(pad, axis=-1)  # bond[j] = u(x_min+j) - u(x_min+j-1)
    # bond between sites (s, s+1) lives at index s - x_min + 1
    b01 = bond[..., i0 + 1]          # (0, 1)
    bm10 = bond[..., i0]             # (-1, 0)

    nu_p2 = params.nu_plus**2
    nu_m2 = params.nu_minus**2

    right = (
        np.sum(v[..., i0 + 1:] ** 2, axis=-1)
        + params.kappa_plus**2 * np.sum(u[..., i0 + 1:] ** 2, axis=-1)
        + nu_p2 * np.sum(bond[..., i0 + 2:] ** 2, axis=-1)  # bonds (s, s+1), s >= 1
    )
    left = (
        np.sum(v[..., :i0] ** 2, axis=-1)
        + params.kappa_minus**2 * np.sum(u[..., :i0] ** 2, axis=-1)
        + nu_m2 * np.sum(bond[..., :i0] ** 2, axis=-1)  # bonds (s, s+1), s <= -2, incl. edge ghost
    )
    origin = v[..., i0] ** 2 + nu_p2 * b01**2 + nu_m2 * bm10**2 + params.kappa_0**2 * u[..., i0] ** 2
    return 0.5 * (right + left + origin)


# --- weighted norms --------------------------------------------------------

@dataclass(frozen=True)
class WeightedNorm:
    """Polynomially weighted l2 norm, ||u||_alpha^2 = sum <x>^(2 alpha) u(x)^2.

    <x> = (1 + x^2)^(1/2).  Also provides the sup-in-time trajectory
    seminorm built from the same weights.
    """

    alpha: float

    def weights(self, sites) -> np.ndarray:
        x = np.asarray(sites, dtype=float)
        return (1.0 + x * x) ** self.alpha

    def __call__(self, u, sites) -> float:
        u = np.asarray(u, dtype=float)
        return float(np.sqrt(np.sum(self.weights(sites) * u * u)))

    def state_norm(self, state: "LatticeState") -> float:
        w = self.weights(state.sites)
        return float(np.sqrt(np.sum(w * state.u**2) + np.sum(w * state.v**2)))

    def trajectory_seminorm(self, traj: "Trajectory", k: int = 1, t_max: float | None = None) -> float:
        """max over |t| <= t_max of (sum_{r<=k} ||d_t^r u(., t)||_alpha^2)^(1/2).

        The r = 1 channel is the recorded velocity.
        """
        if k not in (0, 1):
            raise ValueError("only k = 0 or 1 derivatives are recorded")
        w = self.weights(traj.sites)
        times = traj.times
        mask = np.ones(len(times), dtype=bool) if t_max is None else np.abs(times) <= t_max
        if not mask.any():
            raise ValueError("no recorded times within |t| <= t_max")
        data = traj.data[mask]
        total = np.sum(w * data[:, :, 0] ** 2, axis=1)
        if k == 1:
            total = total + np.sum(w * data[:, :, 1] ** 2, axis=1)
        return float(np.sqrt(total.max()))
