"""Closed-form limiting covariances of the evolved random field.

Everything here is deterministic quadrature: given the two asymptotic
spectral densities of the initial measure and the chain constants, build
the limiting spectra, the equal-time covariance, the space-time covariance
of the decoupled problem, and the stationary space-time covariance of the
homogeneous chain.

Frequency grids are half-step shifted, so theta = 0 and +-pi are never
sampled and sign(theta) is unambiguous; the integrands are smooth and
periodic for positive pinning, making the uniform rule spectrally accurate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import LEFT, RIGHT, ChainParams, dispersion
from .dynamics import theta_grid
from .errors import SpectrumError

_DEFAULT_N_THETA = 2048
_REFINE_TOL = 1e-10
_MAX_N_THETA = 1 << 20


@dataclass(frozen=True)
class LimitSpectrum:
    """Limiting spectral matrix on a frequency grid, one side of the chain.

    Stored compactly: ``q00`` is real (and nonnegative for valid input),
    ``q11 = phi^2 q00``, and the off-diagonal entries are purely imaginary
    with ``q01 = i q01_imag`` and ``q10 = -q01``.
    """

    side: str
    theta: np.ndarray
    phi: np.ndarray
    q00: np.ndarray
    q01_imag: np.ndarray

    @property
    def q11(self) -> np.ndarray:
        return self.phi**2 * self.q00

    @property
    def q01(self) -> np.ndarray:
        return 1j * self.q01_imag

    @property
    def q10(self) -> np.ndarray:
        return -1j * self.q01_imag

    @property
    def n_theta(self) -> int:
        return len(self.theta)


def _as_matrix_fn(qhat):
    """Accept a callable theta -> (2, 2, n) complex or an object exposing one."""
    if callable(qhat):
        return qhat
    if hasattr(qhat, "spectral_density"):
        return qhat.spectral_density
    raise TypeError("expected a spectral density callable or provider")


def limit_spectrum(qhat, params: ChainParams, side: str,
                   n_theta: int = _DEFAULT_N_THETA, midpoint: bool = True) -> LimitSpectrum:
    """Limiting spectrum of one half from the initial spectral matrix.

    q00_inf = (q00 + q11/phi^2)/4 + s (i/4) sign(theta) (q10 - q01)/phi
    with s = +1 on the right half and -1 on the left, evaluated on the
    midpoint grid; q11_inf = phi^2 q00_inf and q01_inf = -q10_inf =
    s i sign(theta) phi q00_inf.
    """
    theta = theta_grid(n_theta, midpoint=midpoint)
    if midpoint is False and params.kappa(side) == 0.0:
        raise SpectrumError("kappa = 0 requires the midpoint grid (phi vanishes at theta = 0)")
    phi = dispersion(theta, side, params)
    q = _as_matrix_fn(qhat)(theta)
    if q.shape != (2, 2, n_theta):
        raise SpectrumError(f"spectral density must have shape (2, 2, {n_theta})")
    sign_side = 1.0 if side == RIGHT else -1.0
    sgn = np.sign(theta)

    q00 = 0.25 * (q[0, 0] + q[1, 1] / phi**2) \
        + sign_side * 0.25j * sgn / phi * (q[1, 0] - q[0, 1])
    if np.max(np.abs(q00.imag)) > 1e-12 * max(1.0, np.max(np.abs(q00.real))):
        raise SpectrumError("input densities violate the symmetry relations (limit not real)")
    q00 = q00.real
    if q00.min() < -1e-12 * max(1.0, q00.max()):
        raise SpectrumError(f"negative limiting density: min = {q00.min():.3e}")
    q01_imag = sign_side * sgn * phi * q00
    return LimitSpectrum(side=side, theta=theta, phi=phi, q00=q00, q01_imag=q01_imag)


def limit_spectrum_pair(spec_or_halves, params: ChainParams,
                        n_theta: int = _DEFAULT_N_THETA, midpoint: bool = True) -> dict:
    """Both limiting spectra keyed by side, from an initial measure spec."""
    left, right = _halves(spec_or_halves)
    return {
        LEFT: limit_spectrum(left, params, LEFT, n_theta=n_theta, midpoint=midpoint),
        RIGHT: limit_spectrum(right, params, RIGHT, n_theta=n_theta, midpoint=midpoint),
    }


def _halves(spec_or_halves):
    if isinstance(spec_or_halves, (tuple, list)) and len(spec_or_halves) == 2:
        return spec_or_halves
    return spec_or_halves.left, spec_or_halves.right


def _pick(spectra, x: int) -> LimitSpectrum:
    side = RIGHT if x > 0 else LEFT
    spectrum = spectra[side] if isinstance(spectra, dict) else spectra
    if spectrum.side != side:
        raise ValueError(f"spectrum for side {side!r} required")
    return spectrum


def limit_equal_time_cov(x: int, y: int, spectra, params: ChainParams) -> np.ndarray:
    """Limiting equal-time covariance matrix Q_inf(x, y), zero off the diagonal.

    Same-sign sites integrate (2/pi) q^{ii}_inf sin(x theta) sin(y theta);
    opposite signs (or a site at the origin) give the zero matrix.
    """
    out = np.zeros((2, 2))
    if x * y <= 0:
        return out
    sp = _pick(spectra, x)
    weight = np.sin(x * sp.theta) * np.sin(y * sp.theta) * (4.0 / sp.n_theta)
    out[0, 0] = np.dot(weight, sp.q00)
    out[1, 1] = np.dot(weight, sp.q11)
    return out


def limit_spacetime_cov(x1: int, x2: int, t1: float, t2: float,
                        spectra, params: ChainParams) -> float:
    """Space-time covariance of the decoupled limit at sites/times (x1,t1), (x2,t2).

    (2/pi) * integral of cos(phi (t1 - t2)) q00_inf sin(x1 theta) sin(x2 theta);
    zero when the sites do not lie strictly on one half-line.  Depends on the
    times only through their difference.
    """
    if x1 * x2 <= 0:
        return 0.0
    sp = _pick(spectra, x1)
    integrand = np.cos(sp.phi * (t1 - t2)) * sp.q00 * np.sin(x1 * sp.theta) * np.sin(x2 * sp.theta)
    return float(np.sum(integrand) * 4.0 / sp.n_theta)


def homogeneous_limit_spectrum(spec_or_halves, params: ChainParams,
                               n_theta: int = _DEFAULT_N_THETA):
    """Summed limiting spectrum (q00_inf, i-part of q01_inf) for the homogeneous chain.

    Both halves' contributions are built with the common dispersion and
    added; for identical halves the sign terms cancel in q00 and survive in
    q01.  Returns (theta, phi, q00, q01_imag).
    """
    if not params.homogeneous:
        raise ValueError("homogeneous limit requires identical chain constants")
    left, right = _halves(spec_or_halves)
    sp_l = limit_spectrum(left, params, LEFT, n_theta=n_theta)
    sp_r = limit_spectrum(right, params, RIGHT, n_theta=n_theta)
    q00 = sp_l.q00 + sp_r.q00
    q01_imag = sp_l.q01_imag + sp_r.q01_imag
    return sp_r.theta, sp_r.phi, q00, q01_imag


def homogeneous_spacetime_cov(x: int, t: float, spec_or_halves, params: ChainParams,
                              n_theta: int = _DEFAULT_N_THETA) -> float:
    """Stationary space-time covariance q(x, t) of the homogeneous chain.

    Inverse transform of cos(phi t) q00_inf - sin(phi t) q01_inf / phi; the
    result is real because q00_inf is even and q01_inf odd and imaginary.
    """
    theta, phi, q00, q01_imag = homogeneous_limit_spectrum(spec_or_halves, params, n_theta)
    even = np.cos(phi * t) * q00
    odd = -np.sin(phi * t) / phi * q01_imag
    vals = np.cos(x * theta) * even + np.sin(x * theta) * odd
    return float(np.sum(vals) / n_theta)


def refine_until_stable(fn, n_theta: int = _DEFAULT_N_THETA, tol: float = _REFINE_TOL):
    """Double the grid until the scalar result moves less than ``tol``.

    Returns (value, n_theta_used, last_delta).  ``fn`` maps a grid size to a
    float; oscillatory integrands silently lose accuracy on fixed budgets,
    so table-emitting paths use this instead of a hard-coded grid.
    """
    value = fn(n_theta)
    while n_theta < _MAX_N_THETA:
        n_next = 2 * n_theta
        nxt = fn(n_next)
        delta = abs(nxt - value)
        value, n_theta = nxt, n_next
        if delta <= tol * max(1.0, abs(nxt)):
            return value, n_theta, delta
    raise SpectrumError("quadrature failed to stabilize; integrand too rough")
