"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid configuration value, shape mismatch, or out-of-range argument."""


class DataFormatError(ValueError):
    """Malformed spike file content."""


class CheckpointFormatError(ValueError):
    """Bad magic, version, or checksum in a checkpoint file."""


class NumericalError(RuntimeError):
    """Training produced a non-finite loss."""
