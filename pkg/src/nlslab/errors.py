"""Exception types shared across the package.

Validation problems (bad inputs, violated preconditions) derive from
``ValidationError``; failures of a numerical procedure derive from
``NumericalError``.  The CLI maps the two families to distinct exit codes.
"""


class NlsLabError(Exception):
    pass


class ValidationError(NlsLabError, ValueError):
    pass


class NumericalError(NlsLabError, ArithmeticError):
    pass


class BracketNotFound(NumericalError):
    pass


class ProfileRejected(NumericalError):
    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = dict(residuals or {})


class GNAttainmentViolated(NumericalError):
    pass


class Underresolved(NumericalError):
    pass


class DivergentNorm(NumericalError):
    pass
