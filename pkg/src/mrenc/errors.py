"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid problem dimensions, budgets, or experiment configuration."""


class DecodeError(ValueError):
    """Packed signal bytes cannot be decoded into valid sub-signals."""


class EstimationFailedError(RuntimeError):
    """The server received no finest-level candidate and cannot estimate."""
