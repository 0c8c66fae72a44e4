"""Exception types shared across the package."""


class SsodlabError(Exception):
    """Base class for all errors raised by this package."""


class InvalidBoxError(SsodlabError, ValueError):
    """Rotated box parameters are not usable (non-finite or degenerate)."""


class QuadFormatError(SsodlabError, ValueError):
    """Quadrilateral deviates from a rectangle beyond tolerance."""


class CovarianceError(SsodlabError, ValueError):
    """Covariance matrix is not symmetric positive semi-definite."""


class EmptyGroupError(SsodlabError, ValueError):
    """A statistic was requested for an empty score group."""


class ConfigError(SsodlabError, ValueError):
    """Run configuration file is malformed or contains unknown keys."""


class SchemaError(SsodlabError, ValueError):
    """A serialized record violates the JSON-lines schema."""


class PlacementError(SsodlabError, RuntimeError):
    """Scene synthesis could not place an object within the retry budget."""
