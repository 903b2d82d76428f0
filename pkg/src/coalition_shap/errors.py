"""Exception hierarchy. CLI exit codes map onto these classes."""


class CoalitionShapError(Exception):
    """Base class for all package errors."""


class DataError(CoalitionShapError):
    """Bad or insufficient input data (ingestion, coverage, alignment)."""


class ConfigError(CoalitionShapError):
    """Invalid run configuration or usage."""


class ForecasterError(CoalitionShapError):
    """A forecaster failed or returned an invalid result."""


class WireProtocolError(ForecasterError):
    """Malformed or incompatible wire-protocol traffic."""


class CapabilityViolation(CoalitionShapError):
    """A masked input reached a forecaster whose declared capabilities forbid it.

    This signals an engine bug, never user error, and must not be coerced
    silently into a different masking strategy.
    """


class EfficiencyViolation(CoalitionShapError):
    """base + sum(shap) deviates from the full prediction beyond tolerance."""
