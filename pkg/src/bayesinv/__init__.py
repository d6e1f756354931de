"""Particle posteriors for Bayesian inverse problems on truncated function spaces."""

from bayesinv.errors import (
    BasisError,
    ConfigError,
    DegenerateEvidence,
    DegenerateQVError,
    DegenerateScaleError,
    DomainError,
    GridError,
    IoError,
    LevelError,
    ModelError,
    NumericError,
    SupportError,
)
from bayesinv.fspace import (
    Basis,
    CoeffVector,
    ForwardMap,
    PathGrid,
    apply_forward,
    cm_norm_sq,
    dual_pairing,
    index_basis,
    trig_basis,
    trig_coeffs,
)
from bayesinv.posterior import (
    PosteriorParticles,
    cm_estimate,
    compute_posterior,
    ess,
    posterior_functional,
    posterior_probability,
)

__version__ = "0.1.0"
