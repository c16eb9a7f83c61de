"""Two-sided inhomogeneous harmonic oscillator chain: dynamics, random initial
data, empirical space-time statistics, and their closed-form Gaussian limits."""

__version__ = "0.1.0"

from .chain import ChainParams, WeightedNorm, check_condition_c, dispersion, hamiltonian
from .dynamics import (
    GreenKernel,
    LatticeState,
    Trajectory,
    WindowedPropagator,
    evolve_full,
    evolve_unperturbed,
    evolve_whole_line,
    green_kernel,
    shift_trajectory,
)
from .limits import (
    LimitSpectrum,
    homogeneous_spacetime_cov,
    limit_equal_time_cov,
    limit_spacetime_cov,
    limit_spectrum,
    limit_spectrum_pair,
)
from .measures import (
    HalfMeasureSpec,
    InitialMeasureSpec,
    gibbs_measure,
    sample_initial,
    theoretical_covariance,
    white_measure,
)
from .stats import (
    CorrelationEstimate,
    TestFunction,
    convergence_track,
    estimate_q_p,
    gaussianity_test,
    mixing_diagnostic,
    pair,
)

__all__ = [
    "ChainParams", "WeightedNorm", "check_condition_c", "dispersion", "hamiltonian",
    "GreenKernel", "LatticeState", "Trajectory", "WindowedPropagator",
    "evolve_full", "evolve_unperturbed", "evolve_whole_line", "green_kernel",
    "shift_trajectory",
    "LimitSpectrum", "homogeneous_spacetime_cov", "limit_equal_time_cov",
    "limit_spacetime_cov", "limit_spectrum", "limit_spectrum_pair",
    "HalfMeasureSpec", "InitialMeasureSpec", "gibbs_measure", "sample_initial",
    "theoretical_covariance", "white_measure",
    "CorrelationEstimate", "TestFunction", "convergence_track", "estimate_q_p",
    "gaussianity_test", "mixing_diagnostic", "pair",
]
