"""Exception hierarchy shared by every module of the package."""


class OnlinePDError(Exception):
    """Base class for all package errors."""


class InputError(OnlinePDError, ValueError):
    """Malformed input data (shapes, signs, empty sets)."""


class ConfigError(OnlinePDError, ValueError):
    """Invalid configuration, or data violating a declared bound (d, rho, R)."""


class InfeasibleError(OnlinePDError, ValueError):
    """An arriving request that no variable can ever satisfy."""


class SizeError(OnlinePDError, ValueError):
    """Instance too large for an exhaustive routine."""


class StateError(OnlinePDError, RuntimeError):
    """Operation called on a state that cannot support it."""


class NumericalError(OnlinePDError, RuntimeError):
    """Integration guard exceeded or a numerical invariant broke."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
