"""Exception hierarchy shared across the package."""


class LmlError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(LmlError):
    """A variable specification, table schema, or graph is malformed."""


class DataError(LmlError):
    """Input data (counts, tables, serialized files) is invalid."""


class NonPositiveTableError(LmlError):
    """An operation requiring strictly positive probabilities met a zero."""


class UndefinedInteractionError(LmlError):
    """A log-mean linear interaction has no value (zero marginal mass)."""


class BudgetExceededError(LmlError):
    """A search would require more model fits than the configured budget."""
