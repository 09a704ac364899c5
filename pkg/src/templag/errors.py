"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the mathematical function."""


class PreconditionError(ValueError):
    """An operation was called with inputs violating its admissibility rules."""


class NumericError(ArithmeticError):
    """A numerical procedure failed to converge or produced non-finite values."""

    def __init__(self, message, **diagnostics):
        if diagnostics:
            detail = ", ".join(f"{k}={v!r}" for k, v in sorted(diagnostics.items()))
            message = f"{message} ({detail})"
        super().__init__(message)
        self.diagnostics = diagnostics
