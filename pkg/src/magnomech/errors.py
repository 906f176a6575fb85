"""Exception hierarchy.

Physics outcomes that are expected data in a scan (an unstable drift
matrix, say) are raised as :class:`UnstableSystemError` so callers can
record them instead of aborting.
"""


class MagnomechError(Exception):
    """Base class for all package errors."""


class InputError(MagnomechError, ValueError):
    """Malformed argument: wrong shape, unknown label, bad range."""


class UnphysicalStateError(InputError):
    """A covariance matrix violates the uncertainty principle beyond tolerance."""

    def __init__(self, message, min_eigenvalue):
        super().__init__(f"{message} (min eigenvalue of V + i/2 Omega = {min_eigenvalue:.3e})")
        self.min_eigenvalue = min_eigenvalue


class UnstableSystemError(MagnomechError):
    """The drift matrix has an eigenvalue with non-negative real part."""

    def __init__(self, margin, message="drift matrix is unstable"):
        super().__init__(f"{message} (stability margin {margin:.6e} s^-1)")
        self.margin = margin


class NumericalError(MagnomechError, ArithmeticError):
    """Overflow, divergence or an ill-conditioned solve."""


class ConfigError(MagnomechError):
    """Invalid parameter or sweep file."""
