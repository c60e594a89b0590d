"""Typed exceptions shared across the package."""


class GwicoalError(Exception):
    """Base class for all package errors."""


class NotAProbability(GwicoalError):
    """A pmf has negative entries or does not sum to one."""


class NotCritical(GwicoalError):
    """The offspring mean is not one within tolerance."""


class DegenerateOffspring(GwicoalError):
    """p0 + p1 is 0 or 1, so the population carries no branching randomness."""


class NoImmigration(GwicoalError):
    """The immigration law never produces immigrants."""


class DomainError(GwicoalError):
    """An argument lies outside the domain an operation supports."""


class EmptySample(GwicoalError):
    """A limit-law draw produced no clans and no measure atoms."""


class ExplosionError(GwicoalError):
    """Exhaustive enumeration would exceed the configured history cap."""


class ResourceLimit(GwicoalError):
    """A simulation exceeded the configured particle budget."""


class ConfigError(GwicoalError):
    """An experiment configuration failed to parse or validate."""


class SchemaError(GwicoalError):
    """Two artifacts cannot be joined because their configurations disagree."""
