"""Normalised determinant trace E_i, Sturm-ratio process R_i, linear process L_i.

Arrays returned by the ``*_profile`` helpers and held in :class:`EdgeTrace`
are indexed directly by the matrix index ``i`` (position 0 unused), so
``trace.r_series[i]`` is R_i. Undefined positions hold NaN.

Real-root regime means (i - 1) <= N theta^2, where

    r_i = 1 + sqrt(1 - (i-1)/(N theta^2)),   m_i = 2 - r_i,
    gamma_i = m_i / r_i,   delta_i = m_i / r_i - m_i / r_{i-1}.

m_i and delta_i are evaluated in cancellation-free forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from edge_logdet.ensemble import TridiagonalMatrix
from edge_logdet.errors import DomainError, InvalidInputError, RegimeError
from edge_logdet.logdet import LN2, EdgeParams, renormalized_recurrence

FLAG_TOL = 1e-12
SCATTER_CAP = 1e300


@dataclass(frozen=True)
class EdgeQuantities:
    i: int
    r: float
    m: float
    gamma: float
    delta: float


@dataclass(frozen=True)
class XiInputs:
    """Noise terms driving R and L, indexed by i (valid from i = 2)."""

    alpha_i: np.ndarray
    beta_i: np.ndarray
    xi_i: np.ndarray
    c: np.ndarray  # c[j] = (b_j^2 - j) / sqrt(j)


@dataclass(frozen=True)
class EdgeTrace:
    n: int
    e_sign: np.ndarray
    e_log: np.ndarray
    r_series: np.ndarray | None
    l_series: np.ndarray | None
    flags: np.ndarray

    @property
    def flagged(self) -> bool:
        return bool(self.flags.any())


def _ntheta2(p: EdgeParams) -> float:
    return p.n * p.theta * p.theta


def in_real_regime(i: int, p: EdgeParams) -> bool:
    return (i - 1) <= _ntheta2(p)


def _require_real_regime(i_max: int, p: EdgeParams) -> None:
    if not in_real_regime(i_max, p):
        raise RegimeError(
            f"index {i_max} outside the real-root regime (needs theta >= "
            f"{math.sqrt(max(i_max - 1, 0) / p.n):.6g}, got {p.theta:.6g})"
        )


def _r_m(idx: np.ndarray, p: EdgeParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """r, m and sqrt(x) at indices ``idx`` (x = 1 - (i-1)/(N theta^2), may exceed 1 at i = 0)."""
    t = (idx - 1.0) / _ntheta2(p)
    root = np.sqrt(np.maximum(1.0 - t, 0.0))
    r = 1.0 + root
    return r, t / r, root


def edge_quantities(i: int, p: EdgeParams) -> EdgeQuantities:
    if not 1 <= i <= p.n:
        raise InvalidInputError(f"index {i} outside 1..{p.n}")
    _require_real_regime(i, p)
    r, m, root = _r_m(np.array([i - 1.0, float(i)]), p)
    gamma = m[1] / r[1]
    delta = m[1] / (r[1] * r[0]) * (1.0 / _ntheta2(p)) / (root[0] + root[1])
    return EdgeQuantities(i, float(r[1]), float(m[1]), float(gamma), float(delta))


def edge_profile(p: EdgeParams, i_max: int | None = None) -> dict[str, np.ndarray]:
    """r, m, gamma, delta for i = 0..i_max (default N), indexed by i."""
    i_max = p.n if i_max is None else i_max
    _require_real_regime(i_max, p)
    idx = np.arange(i_max + 1, dtype=np.float64)
    r, m, root = _r_m(idx, p)
    gamma = m / r
    delta = np.full_like(r, np.nan)
    delta[1:] = m[1:] / (r[1:] * r[:-1]) * (1.0 / _ntheta2(p)) / (root[:-1] + root[1:])
    r[0] = m[0] = gamma[0] = np.nan
    return {"r": r, "m": m, "gamma": gamma, "delta": delta}


def rho_plus_log_modulus(j, p: EdgeParams):
    """log|rho_j^+|; the complex modulus sqrt(j - 1) once (j - 1) > N theta^2."""
    j_arr = np.asarray(j, dtype=np.float64)
    nt2 = _ntheta2(p)
    disc = nt2 - (j_arr - 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        real = np.log(math.sqrt(nt2) + np.sqrt(np.maximum(disc, 0.0)))
        cplx = 0.5 * np.log(j_arr - 1.0)
    out = np.where(disc >= 0, real, cplx)
    return float(out) if out.ndim == 0 else out


def xi_inputs(m: TridiagonalMatrix, p: EdgeParams) -> XiInputs:
    """alpha_i, beta_i, xi_i from the matrix entries, for i = 2..N."""
    n = m.n
    _require_real_regime(n, p)
    prof = edge_profile(p)
    r, mm = prof["r"], prof["m"]
    scale = math.sqrt(n) * p.theta
    j = np.arange(1, n, dtype=np.float64)
    c = np.full(n + 1, np.nan)
    c[1:n] = (m.offdiag_sq - j) / np.sqrt(j)
    alpha_i = np.full(n + 1, np.nan)
    beta_i = np.full(n + 1, np.nan)
    alpha_i[1:] = m.diag / (scale * r[1:])
    idx = np.arange(2, n + 1)
    beta_i[2:] = np.sqrt(mm[idx] / r[idx]) * c[idx - 1] / (scale * r[idx - 1])
    return XiInputs(alpha_i, beta_i, alpha_i + beta_i, c)


def _log_d_prefix(m: TridiagonalMatrix, shift: float) -> tuple[np.ndarray, np.ndarray]:
    """sign and log|D_i| for i = 1..N from the renormalised recurrence."""
    frexp, ldexp, log = math.frexp, math.ldexp, math.log
    diag, off_sq = m.diag.tolist(), m.offdiag_sq.tolist()
    signs = np.zeros(m.n + 1, dtype=np.int8)
    logs = np.full(m.n + 1, -math.inf)
    signs[0], logs[0] = 1, 0.0
    prev2, prev, expo = 0.0, 1.0, 0
    for i, a in enumerate(diag):
        cur = (a - shift) * prev
        if i:
            cur -= off_sq[i - 1] * prev2
        big = abs(cur) if abs(cur) > abs(prev) else abs(prev)
        if big:
            k = frexp(big)[1] - 1
            cur = ldexp(cur, -k)
            prev = ldexp(prev, -k)
            expo += k
        prev2, prev = prev, cur
        if cur:
            signs[i + 1] = 1 if cur > 0 else -1
            logs[i + 1] = log(abs(cur)) + expo * LN2
    return signs, logs


def compute_trace(
    m: TridiagonalMatrix, p: EdgeParams, with_r: bool = True, with_l: bool = False
) -> EdgeTrace:
    """E-trace for any theta > 0; R (and optionally L) in the real-root regime.

    E_i = D_i / prod_{j<=i} |rho_j^+| in sign/log form. R_2 comes from the
    closed form ((a_1 - s)(a_2 - s) - b_1^2) / (r_2 sqrt(N) theta (a_1 - s)) + 1
    with s = 2 theta sqrt(N); later R_i from the ratio recursion
    R_i = alpha_i - gamma_i + (gamma_i + beta_i - delta_i) / (1 - R_{i-1}).
    Index i is flagged when |1 - R_{i-1}| < 1e-12; from the first flag on,
    R_i = E_i / E_{i-1} + 1 is taken from the E-trace instead.
    """
    n = m.n
    if m.n != p.n:
        raise InvalidInputError("matrix and params disagree on N")
    if not p.theta > 0:
        raise DomainError("theta must be positive")
    signs, logs = _log_d_prefix(m, p.shift)
    cum_rho = np.zeros(n + 1)
    cum_rho[1:] = np.cumsum(rho_plus_log_modulus(np.arange(1, n + 1), p))
    e_log = logs - cum_rho
    e_sign = signs
    flags = np.zeros(n + 1, dtype=bool)
    r_series = l_series = None
    if with_r or with_l:
        _require_real_regime(n, p)
    if with_r and n >= 2:
        r_series = _r_trace(m, p, e_sign, e_log, flags)
    elif with_r:
        r_series = np.full(n + 1, np.nan)
    if with_l:
        l_series = np.full(n + 1, np.nan)
        if n >= 2:
            xi = xi_inputs(m, p).xi_i
            gamma = edge_profile(p)["gamma"]
            l_series[2] = 0.0
            acc = 0.0
            for i in range(3, n + 1):
                acc = xi[i] + gamma[i] * acc
                l_series[i] = acc
    return EdgeTrace(n, e_sign, e_log, r_series, l_series, flags)


def _e_ratio(e_sign, e_log, i) -> float:
    if e_sign[i - 1] == 0:
        return math.nan
    if e_sign[i] == 0:
        return 0.0
    return int(e_sign[i]) * int(e_sign[i - 1]) * math.exp(e_log[i] - e_log[i - 1])


def _r_trace(m, p, e_sign, e_log, flags) -> np.ndarray:
    n = m.n
    prof = edge_profile(p)
    gamma, delta, r = prof["gamma"], prof["delta"], prof["r"]
    xi = xi_inputs(m, p)
    alpha_i, beta_i = xi.alpha_i.tolist(), xi.beta_i.tolist()
    out = np.full(n + 1, np.nan)
    s = p.shift
    scale = math.sqrt(n) * p.theta
    e1 = (m.diag[0] - s) / (2.0 * scale)
    trusted = True
    if abs(e1) < FLAG_TOL:
        flags[2] = True
        trusted = False
        out[2] = _e_ratio(e_sign, e_log, 2) + 1.0
    else:
        d1 = m.diag[0] - s
        out[2] = (d1 * (m.diag[1] - s) - m.offdiag_sq[0]) / (r[2] * scale * d1) + 1.0
    prev = out[2]
    for i in range(3, n + 1):
        one_minus = 1.0 - prev
        if trusted and abs(one_minus) < FLAG_TOL:
            trusted = False
        if not trusted:
            flags[i] = flags[i] or abs(one_minus) < FLAG_TOL
            cur = _e_ratio(e_sign, e_log, i) + 1.0
        else:
            g = gamma[i]
            cur = alpha_i[i] - g + (g + beta_i[i] - delta[i]) / one_minus
        out[i] = cur
        prev = cur
    return out


def exp_consistency_gap(trace: EdgeTrace) -> float:
    """|log|E_N| - (log|E_2| + sum_{i=3}^N log|1 - R_i|)|; NaN if flagged or R missing."""
    if trace.r_series is None or trace.flagged or trace.n < 2:
        return math.nan
    rhs = trace.e_log[2] + math.fsum(np.log(np.abs(1.0 - trace.r_series[3:])))
    return abs(trace.e_log[trace.n] - rhs)


def log_e_from_ratios(trace: EdgeTrace) -> float:
    """log|E_N| rebuilt from log|E_2| and the R series."""
    return trace.e_log[2] + math.fsum(np.log(np.abs(1.0 - trace.r_series[3:])))


def scatter_pairs(trace: EdgeTrace, cap: float = SCATTER_CAP) -> np.ndarray:
    """(E_i, E_{i-1}) for i = 2..N as signed values saturated at +-cap."""
    with np.errstate(over="ignore"):
        mag = np.exp(np.minimum(trace.e_log, math.log(cap)))
    vals = trace.e_sign * np.minimum(mag, cap)
    return np.column_stack([vals[2:], vals[1:-1]])


def sign_alternation_fraction(trace: EdgeTrace) -> float:
    """Share of i = 2..N with E_i and E_{i-1} of strictly opposite sign."""
    s = trace.e_sign.astype(np.int64)
    return float(np.mean(s[2:] * s[1:-1] == -1))


def large_r_fraction(trace: EdgeTrace, threshold: float, i_max: int) -> float:
    """Share of i in 2..i_max with |R_i| > threshold."""
    r = trace.r_series[2 : i_max + 1]
    return float(np.mean(np.abs(r) > threshold))


def spike_log_ratio(r_last: float, p: EdgeParams, h: float) -> float:
    """log|1 - (h / (theta r_N)) / (1 - R_N)|: change of log|D_N| under a spike h."""
    r_n = edge_quantities(p.n, p).r
    return math.log(abs(1.0 - (h / (p.theta * r_n)) / (1.0 - r_last)))


def _backward(coef: np.ndarray, drive: np.ndarray, last: float) -> np.ndarray:
    """y_k = drive_k + coef_k y_{k+1}, y_K = last; solved as an upper-bidiagonal system."""
    size = coef.size + 1
    ab = np.zeros((2, size))
    ab[0, 1:] = -coef
    ab[1, :] = 1.0
    rhs = np.append(drive, last)
    return solve_banded((0, 1), ab, rhs, check_finite=False)


def _forward(coef: np.ndarray, drive: np.ndarray, first: float) -> np.ndarray:
    """y_k = drive_k + coef_k y_{k-1}, y_0 = first; lower-bidiagonal solve."""
    size = coef.size + 1
    ab = np.zeros((2, size))
    ab[0, :] = 1.0
    ab[1, :-1] = -coef
    rhs = np.insert(drive, 0, first)
    return solve_banded((1, 0), ab, rhs, check_finite=False)


def g_weights(p: EdgeParams) -> np.ndarray:
    """g_i = 1 + gamma_i g_{i+1}, g_{N+1} = 1; returned indexed by i, valid for 3..N+1."""
    n = p.n
    gamma = edge_profile(p)["gamma"]
    out = np.full(n + 2, np.nan)
    if n >= 3:
        out[3:] = _backward(gamma[3:], np.ones(n - 2), 1.0)
    else:
        out[n + 1] = 1.0
    return out


def xi_variance_profile(p: EdgeParams, alpha: float) -> np.ndarray:
    """E xi_i^2 = alpha / (N theta^2 r_i^2) + alpha m_i r_i / (N theta^2 r_i^2 r_{i-1}^2), i >= 3."""
    prof = edge_profile(p)
    r, mm = prof["r"], prof["m"]
    nt2 = _ntheta2(p)
    out = np.full(p.n + 1, np.nan)
    i = np.arange(3, p.n + 1)
    out[3:] = alpha / (nt2 * r[i] ** 2) + alpha * mm[i] * r[i] / (nt2 * r[i] ** 2 * r[i - 1] ** 2)
    return out


def xi_variance_exact(i: int, p: EdgeParams, alpha: float) -> float:
    if not 3 <= i <= p.n:
        raise InvalidInputError(f"index {i} outside 3..{p.n}")
    _require_real_regime(i, p)
    q = edge_quantities(i, p)
    r_prev = edge_quantities(i - 1, p).r
    nt2 = _ntheta2(p)
    return alpha / (nt2 * q.r**2) + alpha * q.m * q.r / (nt2 * q.r**2 * r_prev**2)


def predicted_sum_variance(p: EdgeParams, alpha: float) -> tuple[float, float]:
    """(sum_{i=3}^N g_{i+1}^2 E xi_i^2, alpha log((theta + sqrt(theta^2-1)) / (2 sqrt(theta^2-1))))."""
    if not p.theta > 1:
        raise DomainError(f"theta must exceed 1, got {p.theta}")
    g = g_weights(p)
    ev = xi_variance_profile(p, alpha)
    i = np.arange(3, p.n + 1)
    exact = math.fsum(g[i + 1] ** 2 * ev[i])
    theta = p.theta
    root = math.sqrt((theta - 1.0) * (theta + 1.0))
    closed = alpha * math.log((theta + root) / (2.0 * root))
    return exact, closed


def l_variance_profile(p: EdgeParams, alpha: float) -> np.ndarray:
    """V_i = E L_i^2: V_2 = 0, V_i = E xi_i^2 + gamma_i^2 V_{i-1}."""
    n = p.n
    out = np.full(n + 1, np.nan)
    if n < 2:
        return out
    gamma = edge_profile(p)["gamma"]
    ev = xi_variance_profile(p, alpha)
    out[2:] = _forward(gamma[3:] ** 2, ev[3:], 0.0)
    return out


def t_delta_profile(p: EdgeParams) -> np.ndarray:
    """T_{delta,i} = delta_i + gamma_i T_{delta,i-1}, with T_{delta,2} = 0."""
    n = p.n
    prof = edge_profile(p)
    out = np.full(n + 1, np.nan)
    if n >= 2:
        out[2:] = _forward(prof["gamma"][3:], prof["delta"][3:], 0.0)
    return out


def t_delta_sum(p: EdgeParams) -> float:
    """sum_{i=3}^N T_{delta,i} = sum_{j=3}^N delta_j g_{j+1}."""
    if p.n < 3:
        return 0.0
    _require_real_regime(p.n, p)
    delta = edge_profile(p)["delta"]
    g = g_weights(p)
    j = np.arange(3, p.n + 1)
    return math.fsum(delta[j] * g[j + 1])
