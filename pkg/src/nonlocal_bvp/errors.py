"""Exception hierarchy shared by all modules."""


class NonlocalBVPError(Exception):
    """Base class for every error raised by this package."""


class NumericError(NonlocalBVPError):
    """A numerical failure (the CLI maps these to exit code 3)."""


# expression language

class ExprSyntaxError(NonlocalBVPError, SyntaxError):
    """Malformed expression text. ``offset`` is the 0-based byte offset."""

    def __init__(self, message, offset, text=""):
        super().__init__(f"{message} at offset {offset}")
        self.msg = message
        self.offset = offset
        self.text = text


class UnboundVariable(NonlocalBVPError, KeyError):
    def __str__(self):
        return f"unbound variable {self.args[0]!r}"


class BindingError(NonlocalBVPError, ValueError):
    pass


class DomainError(NonlocalBVPError, ArithmeticError):
    """Evaluation left the real domain of an operator (ln, sqrt, /0, ^, ...)."""


# geometry

class GeometryError(NonlocalBVPError, ValueError):
    pass


class NonPositiveScale(GeometryError):
    pass


class InvalidRadii(GeometryError):
    pass


class InvalidResolution(GeometryError):
    pass


class PointOutsideDomain(GeometryError):
    pass


class MeshParseError(NonlocalBVPError, ValueError):
    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InvariantViolation(NonlocalBVPError, ValueError):
    pass


# fem / oracle / nonlocal

class SingularSystem(NumericError):
    pass


class CoefficientDomainError(NumericError):
    pass


class CoefficientError(NonlocalBVPError, ValueError):
    """Coefficients violate a precondition (e.g. h <= 0 at a quadrature point)."""


class BracketingFailure(NumericError):
    pass


class InvalidLambda(NonlocalBVPError, ValueError):
    pass


class DimensionMismatch(NonlocalBVPError, ValueError):
    pass


class NonConstantTrace(NumericError):
    pass


class AllZeroField(NumericError):
    pass


class NoSignChange(NumericError):
    pass


class ConfigError(NonlocalBVPError, ValueError):
    """Invalid configuration; carries ``path`` and ``line`` when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


# warnings

class WeakConvectionWarning(UserWarning):
    """4h - |a|^2 <= 0 somewhere on the quadrature points."""


class MaximumPrincipleWarning(UserWarning):
    """A discrete basis solution left [0, 1] beyond the tolerance."""
