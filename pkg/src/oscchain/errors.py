"""Exception types shared across the package."""


class WindowError(ValueError):
    """Lattice window too small or malformed for the requested operation."""


class WindowOverrunError(WindowError):
    """Signal cone would leave the simulation window before the horizon.

    Carries the minimal admissible half-width in ``required_l``.
    """

    def __init__(self, required_l, message=None):
        self.required_l = int(required_l)
        super().__init__(message or f"window too small; need half-width L >= {self.required_l}")


class StabilityError(RuntimeError):
    """Time stepping produced unacceptable energy growth."""


class SupportError(ValueError):
    """Test-function support falls outside the recorded trajectory."""


class QuadratureGridError(ValueError):
    """Frequency grid incompatible with the dispersion relation (theta=0 hit at kappa=0)."""


class SpectrumError(ValueError):
    """Input spectral densities violate positivity or symmetry requirements."""


class InsufficientSamplesError(ValueError):
    """Estimator invoked with too few ensemble members."""


class ConfigError(ValueError):
    """Malformed run configuration."""
