"""Exception types shared across the package."""


class FactiveError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(FactiveError):
    """A design, model, or analysis specification is invalid."""


class StateError(FactiveError):
    """An operation was applied to data in the wrong state."""


class DataError(FactiveError):
    """A dataset violates the expected schema or invariants."""


class EstimationError(FactiveError):
    """The least-squares fit cannot be computed (e.g. rank deficiency)."""


class IdentifiabilityError(FactiveError):
    """A requested quantity is not identified by the available cells."""
