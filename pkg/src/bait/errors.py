class ConfigError(ValueError):
    """Bad configuration or arguments (CLI exit code 2)."""


class DimensionError(ValueError):
    """Shapes of inputs do not agree."""


class NumericalError(ArithmeticError):
    """A linear-algebra step failed (CLI exit code 3)."""
