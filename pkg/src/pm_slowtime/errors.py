"""Exception and warning types shared across the package."""


class JumpCollisionError(ValueError):
    """Two jump points of a plateau function fall into the same grid cell."""


class NotPiecewiseSubcriticalError(ValueError):
    """A grid function is not piecewise subcritical w.r.t. the given jump set."""


class ZeroGapError(ValueError):
    """Two adjacent plateau heights coincide; the vector field is singular there."""


class InvariantViolationError(RuntimeError):
    """A provably-true monotonicity property failed numerically.

    This indicates an integrator accuracy problem, not a property of the
    underlying dynamics.
    """


class NumericsError(RuntimeError):
    """Time integration produced a non-finite state."""

    def __init__(self, message: str, last_stable_time: float | None = None):
        super().__init__(message)
        self.last_stable_time = last_stable_time


class ConfigError(ValueError):
    """Invalid run configuration.  Message names the offending field."""


class ConventionWarning(UserWarning):
    """A value was returned by convention where no definition exists."""
