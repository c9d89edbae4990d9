"""Exception types raised by the library."""


class VertexNotFoundError(LookupError):
    """No mesh vertex lies within the requested tolerance."""


class AmbiguousVertexError(LookupError):
    """More than one mesh vertex lies within the requested tolerance."""


class SingularPointError(ValueError):
    """A field with a logarithmic singularity was evaluated at (or too close to) its pole."""


class AssemblyError(RuntimeError):
    """Raised for degenerate geometry encountered during assembly."""


class ConfigurationError(ValueError):
    """Inconsistent problem/mesh configuration."""


class SolverError(RuntimeError):
    """Linear solve failed or did not reach the requested residual.

    ``residual`` holds the relative residual attained, if one was computed.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
