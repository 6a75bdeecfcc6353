"""Exception types raised across the package."""


class VQError(Exception):
    """Base class for all vqsgd errors."""


class InvalidDimension(VQError, ValueError):
    pass


class DimensionConstraint(VQError, ValueError):
    """Dimension violates a power-of-two requirement of the family."""


class ParameterRange(VQError, ValueError):
    pass


class CardinalityOverflow(VQError, ValueError):
    pass


class UnsupportedDimension(VQError, ValueError):
    pass


class BallViolation(VQError, ValueError):
    """Input vector lies outside the closed unit ball."""


class NoConvergence(VQError, RuntimeError):
    pass


class InvalidGradient(VQError, ValueError):
    pass


class MismatchError(VQError, ValueError):
    """Messages or coefficient vectors do not match the point set."""


class ParseError(VQError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Diverged(VQError, ArithmeticError):
    pass
