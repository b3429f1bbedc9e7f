"""Exception taxonomy.

Callers distinguish four failure classes: bad parameters, bad input data,
blown resource budgets, and breached internal invariants. The CLI maps each
class to a distinct exit code.
"""


class ConfigurationError(ValueError):
    """A parameter combination violates its documented constraints."""


class IngestionError(ValueError):
    """Input points could not be parsed or validated.

    ``row`` is the 1-based row number of the offending record when known.
    """

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ResourceLimitError(RuntimeError):
    """A size or iteration budget was exceeded before the run finished."""


class InternalInvariantError(RuntimeError):
    """A structural invariant failed; indicates a bug, not a user error."""
