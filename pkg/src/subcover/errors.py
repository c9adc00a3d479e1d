"""Exception types shared across the package."""


class SubcoverError(Exception):
    """Base class for all package errors."""


class DomainError(SubcoverError, ValueError):
    """An argument is outside the mathematical domain of an operation."""


class ModelInvalidError(SubcoverError, ValueError):
    """A model's measure fails an integrability requirement."""


class ConfigError(SubcoverError, ValueError):
    """A configuration is inconsistent or incomplete."""


class PrecisionError(SubcoverError, ValueError):
    """A query is finer than the resolution the simulation can support,
    e.g. a box size below the jump cutoff of a skeleton."""
