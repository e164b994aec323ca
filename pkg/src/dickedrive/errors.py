"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A physical or numerical parameter is outside its allowed range."""


class WrongModeError(InvalidParameterError):
    """An operation was called with a system spec of the wrong mode
    (finite-Dicke vs magnon)."""


class ContractViolationError(ValueError):
    """An input violates a documented precondition (non-Hermitian matrix,
    mismatched bases or frames, ...)."""


class IntegrationFailureError(RuntimeError):
    """Time integration produced non-finite amplitudes or drifted outside
    its conservation tolerances."""

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class SolverFailureError(RuntimeError):
    """An iterative solver failed to converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ProtocolConsistencyError(ValueError):
    """A transition request is unreachable from the protocol's current
    superposition support."""

    def __init__(self, message, step_index=None):
        super().__init__(message)
        self.step_index = step_index


class TruncationError(ValueError):
    """A requested state does not fit in the configured truncated basis."""


class ConfigError(ValueError):
    """An experiment configuration failed schema or semantic validation."""

    def __init__(self, message, path=""):
        super().__init__(message)
        self.path = path
