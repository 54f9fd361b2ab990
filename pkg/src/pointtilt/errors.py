"""Exception hierarchy.

Domain errors are deliberate and carry enough context to be surfaced by the
CLI with a nonzero exit status; anything else escaping the library is a bug.
"""


class PointTiltError(Exception):
    """Base class for all library errors."""


class IncompatibleIntensity(PointTiltError):
    """Target intensity is positive where the base intensity vanishes."""


class OutOfHorizon(PointTiltError):
    """A time query beyond the horizon of a path."""


class FieldError(PointTiltError):
    """Error tied to a specific config/spec field."""

    def __init__(self, field_path: str, reason: str):
        self.field_path = field_path
        self.reason = reason
        super().__init__(f"{field_path}: {reason}")


class InvariantError(FieldError):
    """A structural invariant of a domain object is violated."""


class SchemaError(FieldError):
    """A config document does not match the declared schema."""


class MissingAux(PointTiltError):
    """Diffusion-driven intensity evaluated without its diffusion path."""


class EnvelopeViolation(PointTiltError):
    """Thinning proposal intensity exceeded its envelope (internal bug guard)."""


class NotDirectlySimulable(PointTiltError):
    """Requested direct simulation of a family that has no sound sampler."""


class CapTooSmall(PointTiltError):
    """An event/term cap below the minimum the operation needs."""


class StepTooCoarse(PointTiltError):
    """Discretization step too large relative to the horizon."""


class DegenerateCoefficient(PointTiltError):
    """A mean-reversion coefficient b = 0 where b != 0 is required."""


class DivergentRegime(PointTiltError):
    """Closed form requested outside its convergence region (beta*w*d >= 1)."""


class PhiBoundViolated(PointTiltError):
    """Link function violates phi(x) <= |x|."""


class NonpositiveDelta(PointTiltError):
    """Lower intensity bound delta must be positive."""


class EpsOutOfRange(PointTiltError):
    """Exponent epsilon outside [0, 1)."""


class NotPositiveDefinite(PointTiltError):
    """Covariance matrix is not symmetric positive definite."""


class PositivityViolation(PointTiltError):
    """Zero weights observed for a strictly positive intensity family."""
