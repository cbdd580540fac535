"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Array shapes do not line up."""


class AdmissibilityError(ValueError):
    """A mixture family violates the mass or structure conditions."""


class UnsupportedParameterError(ValueError):
    """A closed form is not available for the requested parameters."""


class OracleError(RuntimeError):
    """A brute-force oracle cannot produce a trustworthy answer."""


class DivergenceError(RuntimeError):
    """An iteration produced non-finite values."""


class ConfigError(ValueError):
    """Malformed input file; the message carries a line or field location."""
