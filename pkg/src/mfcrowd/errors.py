"""Exception types shared across the toolkit."""


class MFCrowdError(Exception):
    """Base class for all toolkit-specific errors."""


class DimensionError(MFCrowdError, ValueError):
    """An array argument has a length or shape inconsistent with its grid."""


class ConfigurationError(MFCrowdError):
    """A run configuration is unusable: bad file, bad value, or a CFL violation."""


class KernelModeError(MFCrowdError, ValueError):
    """A kernel was used in an operation that requires the other mode."""


class ConvexityError(MFCrowdError):
    """Optimization was requested on a problem whose convexity check failed."""


class SolverStallError(MFCrowdError):
    """Gradient descent could not find a descent step within the halving budget."""
