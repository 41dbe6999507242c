"""Exception types shared across the package."""


class HKGEError(Exception):
    """Base class for all errors raised by hkge."""


class StructuralError(HKGEError, ValueError):
    """Shapes, lengths or arities do not fit together."""


class DomainError(HKGEError, ValueError):
    """A value lies outside the domain of an operation (e.g. c <= 0)."""


class ConfigurationError(HKGEError, ValueError):
    """An invalid model, training or run configuration."""


class VocabularyError(HKGEError, KeyError):
    """A name or id that is not present in a vocabulary."""

    def __str__(self):
        return Exception.__str__(self)


class ParseError(HKGEError, ValueError):
    """A malformed line in a triple file."""


class CheckpointError(HKGEError, ValueError):
    """A checkpoint file with a bad header, schema or vocabulary."""
