"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment or model configuration."""


class DataFormatError(ValueError):
    """Malformed input data (bad CSV schema, duplicate keys, non-numeric fields)."""


class ModelError(ValueError):
    """Model in a state where the requested quantity is undefined
    (non-positive benchmark welfare, singular covariance, ...)."""


class CapExceededError(RuntimeError):
    """A bounded search hit its configured cap before reaching its target."""

    def __init__(self, cap: int, message: str | None = None):
        self.cap = cap
        super().__init__(message or f"search cap {cap} exceeded")
