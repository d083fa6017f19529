"""Exception types shared across the package."""


class ThinlayerError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(ThinlayerError):
    """A parameter or configuration value is outside its documented range."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class NumericalFailure(ThinlayerError):
    """A solver produced non-finite values or failed to converge."""


class ResolventThresholdError(ThinlayerError):
    """lambda is below the contraction threshold of the rank-2 resolvent."""
