"""Exception types shared across the package."""


class ClauseTagError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ClauseTagError, ValueError):
    """Array shapes do not conform for the requested operation."""


class DegenerateInputError(ClauseTagError, ValueError):
    """Input is structurally empty (e.g. softmax over an all-masked row)."""


class NumericError(ClauseTagError, ArithmeticError):
    """A numerical operation produced NaN or Inf."""


class ParseError(ClauseTagError, ValueError):
    """A text input file does not conform to its format.

    Carries the offending path and 1-based line number when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        prefix = ""
        if path is not None:
            prefix += str(path)
        if line is not None:
            prefix += f":{line}"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ConfigError(ClauseTagError, ValueError):
    """Configuration values are inconsistent with each other or with data."""


class DataError(ClauseTagError, ValueError):
    """Input data violates a contract (missing labels, misaligned lengths)."""


class CapacityError(ClauseTagError, ValueError):
    """Input exceeds a size limit and truncation is disabled."""


class ModelLoadError(ClauseTagError, RuntimeError):
    """A stored model cannot be loaded (version/manifest/weights mismatch)."""


class DivergenceError(ClauseTagError, RuntimeError):
    """Training produced a non-finite objective."""
