"""Exception families shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2, data
problems exit 3, backend problems exit 4.
"""


class PlateflowError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(PlateflowError):
    """Invalid configuration value, flag, or unsupported schema version."""


class DataError(PlateflowError):
    """Malformed or unreadable input data (labels, images, tensors, files)."""


class BackendError(PlateflowError):
    """Inference backend failure (missing fixture, bad model, shape mismatch)."""
