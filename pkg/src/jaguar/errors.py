"""Exception hierarchy shared by all jaguar modules."""


class JaguarError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(JaguarError):
    """A relational operation was applied to incompatible schemas."""


class QueryParseError(JaguarError):
    """Query or statistics text does not conform to the grammar."""

    def __init__(self, message, position=None):
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)
        self.position = position


class ValidationError(JaguarError):
    """Inputs are well-formed but mutually inconsistent (missing relation,
    unsatisfied statistic, schema mismatch between query and data)."""


class LimitError(JaguarError):
    """A configured size limit (variable count, selector product, oracle
    budget) was exceeded."""


class SolverError(JaguarError):
    """The LP solver failed numerically; never silently wrong."""


class InvariantError(JaguarError):
    """An internal invariant that should be unreachable was violated.
    Indicates a bug, not bad input."""
