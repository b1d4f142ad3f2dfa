"""Exception types raised by patchlab."""


class PatchlabError(Exception):
    """Base class for every error raised on purpose by the package."""


class ConfigurationError(PatchlabError, ValueError):
    """Invalid grid, norm index, scenario file or command line value."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PreconditionError(PatchlabError, ValueError):
    """Input data violates a stated requirement of an operator."""


class ConstructionError(PatchlabError, RuntimeError):
    """A geometric construction (atlas, cut-offs, tangent system) cannot be built."""


class AdmissibilityError(PatchlabError, ValueError):
    """A family of vector fields fails the non-degeneracy test."""


class StepError(PatchlabError, RuntimeError):
    """Time stepping was refused (CFL violation, particles leaving the domain)."""
