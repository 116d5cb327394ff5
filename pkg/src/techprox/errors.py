class TechproxError(Exception):
    """Base class for errors raised by techprox."""


class ConfigurationError(TechproxError):
    """Invalid configuration or a request the server rejected as malformed."""


class IngestionError(TechproxError):
    """Fetching from the works API failed after exhausting retries."""


class MalformedInputError(TechproxError, ValueError):
    """Input data that violates a documented format."""
