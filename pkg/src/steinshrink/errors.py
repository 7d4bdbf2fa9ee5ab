"""Exception types shared across the package."""


class ParameterError(ValueError):
    """Invalid model, kernel, or coupling parameters."""


class EvaluationError(RuntimeError):
    """A pointwise evaluation left the domain (vanishing density, singular point)."""


class MomentUnavailableError(ValueError):
    """A requested moment cap does not exist for the family."""


class GuardAbort(RuntimeError):
    """A Monte Carlo run tripped a numerical guard (e.g. singularity rate)."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
