"""Exception types raised by physguard."""


class PhysguardError(Exception):
    """Base class for all physguard errors."""


class InvalidParameterError(PhysguardError, ValueError):
    pass


class DimensionMismatchError(PhysguardError, ValueError):
    pass


class SingularInnovationError(PhysguardError, ArithmeticError):
    """Innovation covariance C P C^T + R cannot be inverted."""


class MissingEstimateError(PhysguardError, ValueError):
    pass


class ReplayUnderflowError(PhysguardError, IndexError):
    pass


class InsufficientDataError(PhysguardError, ValueError):
    pass


class SeriesTooShortError(InsufficientDataError):
    pass


class UnknownLabelError(PhysguardError, KeyError):
    pass


class ConfigError(PhysguardError):
    """Config parse or validation failure.

    ``errors`` is a list of ``{"loc": "plant.area", "msg": "..."}`` dicts, one
    per violated constraint.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        lines = "; ".join(f"{e['loc']}: {e['msg']}" for e in self.errors)
        super().__init__(lines or "invalid config")
