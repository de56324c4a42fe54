"""Centering and scaling of log|D_N| and the deterministic shift between log|D_N| and log|E_N|."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from edge_logdet.errors import DomainError, InvalidParameterError, SingularDeterminantError
from edge_logdet.logdet import EdgeParams, SignedLogDet


class Scaling(enum.Enum):
    THM1_LOG = "thm1"
    THM2_THETA = "thm2"


class SpikeMode(enum.Enum):
    NONE = "none"
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"

    @classmethod
    def for_spike(cls, h: float | None) -> "SpikeMode":
        if not h:
            return cls.NONE
        if h < 0:
            raise InvalidParameterError(f"spike must be nonnegative, got {h}")
        if h < 1:
            return cls.SUBCRITICAL
        return cls.CRITICAL if h == 1 else cls.SUPERCRITICAL


@dataclass(frozen=True)
class CltVariant:
    scaling: Scaling = Scaling.THM1_LOG
    spike_mode: SpikeMode = SpikeMode.NONE

    @classmethod
    def for_spike(cls, scaling: Scaling, h: float | None) -> "CltVariant":
        return cls(scaling, SpikeMode.for_spike(h))

    @property
    def unproven_regime(self) -> bool:
        """Supercritical spikes at constant sigma are outside the proven results."""
        return self.spike_mode is SpikeMode.SUPERCRITICAL


@dataclass(frozen=True)
class Standardized:
    z: float
    center: float
    scale: float
    raw: float
    unproven_regime: bool = False


def theta_from_sigma(n: int, sigma: float) -> EdgeParams:
    return EdgeParams.from_sigma(n, sigma)


def theta_log_ratio(theta: float) -> float:
    """log((theta + sqrt(theta^2 - 1)) / (2 sqrt(theta^2 - 1))) for theta > 1."""
    if not theta > 1:
        raise DomainError(f"theta must exceed 1, got {theta}")
    root = math.sqrt((theta - 1.0) * (theta + 1.0))
    return math.log((theta + root) / (2.0 * root))


def center_scale(
    p: EdgeParams, alpha: float, variant: CltVariant, h: float | None = None
) -> tuple[float, float]:
    """Centering constant and scale for log|D_N|.

    center = N/2 - (alpha-1)/6 log N + sigma N^(1/3) - (2/3)|sigma|^(3/2),
    minus (1/3) log N for a critical spike (h = 1) and plus log|1 - h| for a
    supercritical one (h > 1). Subcritical spikes share the unspiked center.
    """
    n, sigma = p.n, p.sigma
    mode = variant.spike_mode
    if h is not None and SpikeMode.for_spike(h) is not mode:
        raise InvalidParameterError(f"spike h={h} inconsistent with {mode.name}")
    if mode is SpikeMode.CRITICAL and h not in (None, 1.0):
        raise InvalidParameterError("critical spike requires h = 1")
    if mode is SpikeMode.SUPERCRITICAL and h is None:
        raise InvalidParameterError("supercritical spike needs its value h")
    log_n = math.log(n)
    center = (
        n / 2.0
        - (alpha - 1.0) / 6.0 * log_n
        + sigma * n ** (1.0 / 3.0)
        - 2.0 / 3.0 * abs(sigma) ** 1.5
    )
    if mode is SpikeMode.CRITICAL:
        center -= log_n / 3.0
    elif mode is SpikeMode.SUPERCRITICAL:
        center += math.log(abs(1.0 - h))
    if variant.scaling is Scaling.THM1_LOG:
        scale = math.sqrt(alpha / 3.0 * log_n)
    else:
        scale = math.sqrt(alpha * theta_log_ratio(p.theta))
    return center, scale


def standardize(
    d: SignedLogDet,
    p: EdgeParams,
    alpha: float,
    variant: CltVariant,
    h: float | None = None,
) -> Standardized:
    if d.sign == 0:
        raise SingularDeterminantError("determinant is exactly zero")
    center, scale = center_scale(p, alpha, variant, h)
    return Standardized(
        (d.log_abs - center) / scale, center, scale, d.log_abs, variant.unproven_regime
    )


def deterministic_shift_exact(p: EdgeParams) -> float:
    """(N/2) log theta^2 + sum_{i=1}^N log(1 + sqrt(1 - (i-1)/(N theta^2))), compensated sum."""
    n, theta = p.n, p.theta
    if (n - 1) > n * theta * theta:
        raise DomainError("shift needs theta >= sqrt(1 - 1/N)")
    x = 1.0 - np.arange(n, dtype=np.float64) / (n * theta * theta)
    terms = np.log1p(np.sqrt(np.maximum(x, 0.0)))
    return 0.5 * n * math.log(theta * theta) + math.fsum(terms)


def deterministic_shift_asymptotic(p: EdgeParams) -> float:
    """N/2 + 2 w N^(1/3) - (2/3)(2w)^(3/2) + (1/2) log 2, for w > 0."""
    if not p.w > 0:
        raise DomainError(f"asymptotic shift needs w > 0, got {p.w}")
    n, w = p.n, p.w
    return n / 2.0 + 2.0 * w * n ** (1.0 / 3.0) - 2.0 / 3.0 * (2.0 * w) ** 1.5 + 0.5 * math.log(2.0)
