"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Raised when an argument violates an operation's precondition."""


class NumericalFailure(ArithmeticError):
    """Raised when a numerical routine fails to reach its tolerance.

    Parameters
    ----------
    message : str
        Human-readable description.
    diagnostics : dict, optional
        Extra context (offending grid points, residuals, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
