"""Counting-process simulation and intensity changes of measure.

Simulate multivariate counting paths with stochastic intensities, compute the
exponential likelihood weights that reweight one intensity into another, check
the moment conditions under which that reweighting is a true martingale, and
use it for importance sampling with closed-form oracles throughout.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: F401
    CapTooSmall,
    DegenerateCoefficient,
    DivergentRegime,
    EnvelopeViolation,
    EpsOutOfRange,
    IncompatibleIntensity,
    InvariantError,
    MissingAux,
    NonpositiveDelta,
    NotDirectlySimulable,
    NotPositiveDefinite,
    OutOfHorizon,
    PhiBoundViolated,
    PointTiltError,
    PositivityViolation,
    SchemaError,
    StepTooCoarse,
)
from .families import (  # noqa: F401
    AbsLink,
    AffineSeq,
    AlphaFamily,
    ClippedLinearLink,
    ConstantSeq,
    ExplicitSeq,
    GeometricSeq,
    PolynomialSeq,
    ReluLink,
)
from .intensity import (  # noqa: F401
    AffineCount,
    AgeDecayVector,
    BoxKernel,
    Constant,
    ConstMatrix,
    ConstVector,
    CountPowerVector,
    ExactAffine,
    ExpKernel,
    Hawkes,
    LinearSDE,
    PiecewiseBirth,
    ResetOU,
    dimension,
    is_diffusion_driven,
    path_intensity,
)
from .likelihood import log_weight, weight_positivity_audit  # noqa: F401
from .model import (  # noqa: F401
    CriterionReport,
    DiffusionPath,
    EventSequence,
    ScenarioConfig,
    WeightRecord,
    count_at,
    gamma_at,
)
from .simulate import (  # noqa: F401
    PathStreams,
    map_paths,
    path_stream,
    simulate_linear_sde,
    simulate_markov_birth,
    simulate_poisson,
    simulate_reset_ou,
    simulate_spec,
    simulate_thinning,
)
