"""Exception types shared across the package."""


class PhasorError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(PhasorError, ValueError):
    """A model or generator parameter violates its constraints."""


class OutOfOrderError(PhasorError, ValueError):
    """A data point arrived with a timestamp older than the previous one."""


class DimensionError(PhasorError, ValueError):
    """A data point's dimensionality does not match the model."""


class EmptyModelError(PhasorError, RuntimeError):
    """An operation requires at least one observer but the model is empty."""


class SnapshotError(PhasorError, ValueError):
    """A model snapshot is malformed or has an unsupported version."""


class StreamParseError(PhasorError, ValueError):
    """A CSV input file could not be parsed.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class MetricError(PhasorError, ValueError):
    """Evaluation input is degenerate (e.g. a single class only)."""
