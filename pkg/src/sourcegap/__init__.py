"""Gap probabilities for the Gaussian ensemble with external source and the
Pearcey process, with numerical verification of the determinantal formulas,
integrable-structure identities, and both fourth-order PDEs they satisfy."""

from .core import (
    DEFAULT_PRECISION,
    EMPTY_SET,
    FULL_LINE,
    IntervalUnion,
    PrecisionConfig,
    SignedLogValue,
    SourceGapError,
    SourceSpec,
    ValidationError,
    normalize,
)
from .moments import DeformationPoint, MomentRequest, ZERO_DEFORMATION, deformed_moment, gaussian_moment_closed
from .tau import (
    FdConfig,
    IDENTITY_IDS,
    IdentityReport,
    check_identity,
    gap_probability,
    log_gap_probability,
    tau_fullline_closed,
    tau_value,
)
from .mc import McConfig, McEstimate, brownian_to_source, mc_gap_probability, sample_spectrum, scaled_Qz
from .pde_source import ResidualReport, residual_thm01
from .pearcey import (
    PearceyPdeReport,
    ScalingReport,
    fredholm_log_det,
    kernel,
    ode_residuals,
    pearcey_p,
    pearcey_q,
    residual_thm02,
    scaling_limit_report,
)

__version__ = "0.1.0"
