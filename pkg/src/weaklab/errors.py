"""Exception hierarchy shared across the package."""


class WeaklabError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(WeaklabError):
    """Invalid grid, parameter, or config-file input."""


class InfraredGridError(ConfigurationError):
    """Momentum grid touches the origin, where dispersions are singular."""


class KernelFormatError(ConfigurationError):
    """Malformed kernel file; carries line context in the message."""


class ResourceError(WeaklabError):
    """Requested basis exceeds the configured hard cap."""


class SolverError(WeaklabError):
    """Eigensolver failed to converge."""

    def __init__(self, message: str, best_residual: float = float("nan")):
        super().__init__(message)
        self.best_residual = best_residual


class ThresholdCollisionError(WeaklabError):
    """Spectral window intersects the threshold set."""


class KernelRegularityError(WeaklabError):
    """Kernel lacks the smoothness the requested operation needs."""
