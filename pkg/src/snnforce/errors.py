"""Exception types raised across the package."""


class ConfigError(ValueError):
    """Invalid parameters or configuration."""


class NumericInputError(ValueError):
    """Non-finite or out-of-domain numeric input."""


class DimensionError(ValueError):
    """Array shapes that do not line up."""


class DivergenceError(RuntimeError):
    """The readout left the allowed range during training or evaluation."""


class IntegrityError(IOError):
    """A checkpoint or data file failed validation on load."""
