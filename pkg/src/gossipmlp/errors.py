"""Exception types shared across the package."""


class GossipMlpError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(GossipMlpError, ValueError):
    """A model, topology, or experiment configuration is invalid."""


class DataError(GossipMlpError, ValueError):
    """A dataset file is missing, malformed, or violates the label rule."""


class TrainingDivergedError(GossipMlpError, RuntimeError):
    """Training produced a non-finite loss or gradient."""


class UndefinedMetricError(GossipMlpError, ValueError):
    """A metric is undefined for the given input (e.g. single-class AUC)."""
