"""Exception types shared across the package."""


class GlmmError(Exception):
    """Base class for all package-specific errors."""


class DomainError(GlmmError, ValueError):
    """A natural parameter, dispersion value or response left its admissible domain."""


class SchemaError(GlmmError, ValueError):
    """A CSV file or schema specification is malformed."""


class ConvergenceError(GlmmError, RuntimeError):
    """An inner iterative solver (Newton mode search, IRLS) failed to converge."""
