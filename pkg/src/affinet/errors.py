"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation failures exit with 2,
numerical/runtime failures with 3, I/O problems with 4.
"""


class AffinetError(Exception):
    """Base class for package-specific errors."""


class ValidationError(AffinetError, ValueError):
    """Invalid parameters or configuration.

    ``problems`` holds one message per violated constraint so callers can
    report all of them at once.
    """

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class InvalidPositionError(ValidationError):
    """Non-finite or otherwise unusable coordinates."""


class MissingParticleError(AffinetError, KeyError):
    """Operation referenced a particle id that is not in the state."""


class EmptySystemError(AffinetError):
    """Operation requires at least one particle."""


class SystemHalted(AffinetError):
    """The global event rate is zero: the system is extinct and absorbing."""


class UnsupportedRadiusError(AffinetError, ValueError):
    """Radius query larger than the spatial index cell side."""


class EnvelopeViolationError(AffinetError):
    """A thinning acceptance ratio exceeded 1: the domination envelope is wrong."""


class UnderResolvedKernelError(AffinetError):
    """Grid too coarse to represent a kernel support."""


class InstabilityError(AffinetError):
    """The explicit time stepper produced materially negative densities."""


class ShapeMismatchError(AffinetError, ValueError):
    """Histograms or grids with incompatible shapes."""
