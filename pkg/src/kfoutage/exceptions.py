"""Exception and warning classes raised by kfoutage."""


class KFOutageError(Exception):
    """Base class for all kfoutage errors."""


class ParameterError(KFOutageError, ValueError):
    """Invalid system or channel parameters."""


class NonPositiveVariance(ParameterError):
    pass


class DegenerateChannel(ParameterError):
    """The channel SNR is identically zero (no information ever gets through)."""


class UnstableSystem(ParameterError):
    """|rho| >= 1: the error variance has unbounded support."""


class ThresholdAboveBreakpoint(ParameterError):
    """A closed-form outage expression was asked for a threshold above sigma_u2."""


class InsufficientSamples(KFOutageError, ValueError):
    pass


class NoConvergence(KFOutageError, RuntimeError):
    """Fixed-point iteration did not reach the requested tolerance.

    The last iterate and its report are kept on the exception so that
    callers can still inspect them.
    """

    def __init__(self, message, density=None, report=None):
        super().__init__(message)
        self.density = density
        self.report = report


class RhoZeroWarning(UserWarning):
    """rho == 0: fine for simulation, but the stationary-density theory assumes rho != 0."""


class BoundClampedWarning(UserWarning):
    """A bound formula left [0, 1] and was clamped (typical at low SNR)."""
