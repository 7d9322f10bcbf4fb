"""Error taxonomy shared across the package."""


class DimensionError(ValueError):
    """Operand dimensions do not admit the requested operation."""


class ShapeError(ValueError):
    """Expression shapes are inconsistent at graph-construction time."""


class NumericError(ArithmeticError):
    """A numeric routine failed to converge or produced non-finite values."""


class ConfigError(ValueError):
    """A configuration value is outside its admissible range."""


class ParseError(ValueError):
    """A machine-readable input file is malformed.

    Carries 1-based ``line`` and ``col`` attributes when the offending
    location is known (None otherwise).
    """

    def __init__(self, message, line=None, col=None):
        super().__init__(message)
        self.line = line
        self.col = col
