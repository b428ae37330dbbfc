"""Shared warning and error types."""


class AccuracyWarning(UserWarning):
    """A computation left its validated accuracy regime (results still returned)."""


class PrecisionError(ValueError):
    """A grid or truncation is too small to honor a stated tolerance."""


class ConsistencyError(RuntimeError):
    """Two pipelines that are contracted to agree disagreed beyond tolerance."""
