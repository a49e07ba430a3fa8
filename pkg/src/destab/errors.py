"""Exception hierarchy shared by every module of the toolkit."""


class DestabError(Exception):
    """Base class for all errors raised by destab."""


class DimensionError(DestabError, ValueError):
    pass


class NumericError(DestabError, ArithmeticError):
    """A decomposition or iteration failed to converge."""


class SingularityError(NumericError):
    pass


class PoleError(DestabError, ValueError):
    """Transfer function evaluated at (or numerically on top of) a pole."""

    def __init__(self, s, pole):
        self.s = s
        self.pole = pole
        super().__init__(f"cannot evaluate at s={s!r}: too close to pole {pole!r}")


class WellPosednessError(DestabError):
    """The feedback loop has no unique solution (det(I - Dt D) ~ 0 or an algebraic loop)."""


class PreconditionError(DestabError, ValueError):
    pass


class UnrepresentableError(DestabError, ValueError):
    pass


class IntegrationError(DestabError, ArithmeticError):
    def __init__(self, message, last_time):
        self.last_time = last_time
        super().__init__(f"{message} (last valid time t={last_time:.17g})")


class ParseError(DestabError, ValueError):
    """Syntax or semantic error in a vector-field expression.

    ``line`` and ``column`` are 1-based.
    """

    def __init__(self, message, line=1, column=1):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")
