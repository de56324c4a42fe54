"""Edge log-determinant laboratory for tridiagonal Gaussian beta-ensembles."""

from edge_logdet.clt import (
    CltVariant,
    Scaling,
    SpikeMode,
    Standardized,
    center_scale,
    deterministic_shift_asymptotic,
    deterministic_shift_exact,
    standardize,
    theta_from_sigma,
)
from edge_logdet.ensemble import (
    EnsembleSpec,
    TridiagonalMatrix,
    apply_spike,
    sample_gamma,
    sample_normal,
    sample_tridiagonal,
)
from edge_logdet.logdet import (
    EdgeParams,
    SignedLogDet,
    eigenvalues_bisection,
    logabsdet_from_eigs,
    logabsdet_recurrence,
)
from edge_logdet.rng import RngStream

__all__ = [
    "CltVariant",
    "EdgeParams",
    "EnsembleSpec",
    "RngStream",
    "Scaling",
    "SignedLogDet",
    "SpikeMode",
    "Standardized",
    "TridiagonalMatrix",
    "apply_spike",
    "center_scale",
    "deterministic_shift_asymptotic",
    "deterministic_shift_exact",
    "eigenvalues_bisection",
    "logabsdet_from_eigs",
    "logabsdet_recurrence",
    "sample_gamma",
    "sample_normal",
    "sample_tridiagonal",
    "standardize",
    "theta_from_sigma",
]
