"""Sign and log-magnitude of det(M/sqrt(N) - 2 theta I) for tridiagonal M.

The production engine runs the three-term determinant recurrence

    D_i = (a_i - 2 theta sqrt(N)) D_{i-1} - b_{i-1}^2 D_{i-2},  D_0 = 1, D_{-1} = 0,

keeping the pair (D_{i-1}, D_i) renormalised by a power of two after every
step so the larger magnitude lies in [1, 2). The exponent is accumulated as
an integer, so rescaling is exact and no regime split on theta is needed.

The oracle is an independent bisection eigensolver driven by the Sturm
negative-pivot count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from edge_logdet.ensemble import TridiagonalMatrix
from edge_logdet.errors import InvalidInputError, InvalidParameterError

LN2 = math.log(2.0)
EIG_REL_TOL = 1e-13
# Smallest positive normal double; zero pivots are replaced by -PIVMIN * max(1, max b^2).
_SAFMIN = np.finfo(np.float64).tiny


@dataclass(frozen=True)
class EdgeParams:
    """Singularity location 2 theta = 2 + n^(-2/3) sigma, with w = sigma / 2."""

    n: int
    sigma: float
    theta: float
    w: float

    @classmethod
    def from_sigma(cls, n: int, sigma: float) -> "EdgeParams":
        if int(n) != n or n < 1:
            raise InvalidParameterError(f"n must be a positive integer, got {n!r}")
        sigma = float(sigma)
        return cls(int(n), sigma, 1.0 + n ** (-2.0 / 3.0) * sigma / 2.0, sigma / 2.0)

    @classmethod
    def from_two_theta(cls, n: int, two_theta: float) -> "EdgeParams":
        sigma = (two_theta - 2.0) * n ** (2.0 / 3.0)
        return cls(int(n), sigma, two_theta / 2.0, sigma / 2.0)

    @property
    def shift(self) -> float:
        """2 theta sqrt(N), the singularity in unscaled units."""
        return 2.0 * self.theta * math.sqrt(self.n)


@dataclass(frozen=True)
class SignedLogDet:
    sign: int
    log_abs: float

    def __post_init__(self) -> None:
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign!r}")
        if (self.sign == 0) != (self.log_abs == -math.inf):
            raise ValueError("sign 0 must pair with log_abs = -inf")

    @property
    def value(self) -> float:
        """sign * exp(log_abs); saturates to +-inf past the double range."""
        if self.sign == 0:
            return 0.0
        if self.log_abs > 709.0:
            return self.sign * math.inf
        return self.sign * math.exp(self.log_abs)


def renormalized_recurrence(
    diag, offdiag_sq, shift: float, d0: float = 1.0
) -> tuple[float, int]:
    """Run the recurrence; return (mantissa, exponent) with D_N = mantissa * 2**exponent.

    ``diag`` and ``offdiag_sq`` are plain sequences of floats (a_i and b_i^2).
    ``d0`` replaces D_0 = 1 and exists so exactness of the binary rescaling
    can be tested.
    """
    frexp, ldexp = math.frexp, math.ldexp
    prev2, prev, expo = 0.0, float(d0), 0
    for i, a in enumerate(diag):
        cur = (a - shift) * prev
        if i:
            cur -= offdiag_sq[i - 1] * prev2
        big = abs(cur) if abs(cur) > abs(prev) else abs(prev)
        if big:
            k = frexp(big)[1] - 1
            cur = ldexp(cur, -k)
            prev = ldexp(prev, -k)
            expo += k
        prev2, prev = prev, cur
    return prev, expo


def _check_pair(m: TridiagonalMatrix, p: EdgeParams) -> None:
    if m.n != p.n:
        raise InvalidInputError(f"matrix size {m.n} does not match params n={p.n}")
    if not (np.all(np.isfinite(m.diag)) and np.all(np.isfinite(m.offdiag))):
        raise InvalidInputError("matrix entries must be finite")


def logabsdet_recurrence(m: TridiagonalMatrix, p: EdgeParams) -> SignedLogDet:
    """log|det(M/sqrt(N) - 2 theta I)| in O(N), valid for every real sigma."""
    _check_pair(m, p)
    mant, expo = renormalized_recurrence(m.diag.tolist(), m.offdiag_sq.tolist(), p.shift)
    if mant == 0.0:
        return SignedLogDet(0, -math.inf)
    # np.log keeps the final step identical to the batch engine
    log_abs = float(np.log(abs(mant)) + expo * LN2 - 0.5 * p.n * math.log(p.n))
    return SignedLogDet(1 if mant > 0 else -1, log_abs)


def logabsdet_recurrence_batch(
    diag: np.ndarray, offdiag: np.ndarray, p: EdgeParams
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised engine over replicate rows: ``diag`` (R, N), ``offdiag`` (R, N-1).

    Each row goes through the same floating-point operations as
    :func:`renormalized_recurrence`, so mantissas and exponents match the
    scalar path bit for bit. Returns (signs, log_abs) arrays of length R.
    """
    diag = np.atleast_2d(np.asarray(diag, dtype=np.float64))
    offdiag_sq = np.atleast_2d(np.asarray(offdiag, dtype=np.float64)) ** 2
    rows, n = diag.shape
    if n != p.n or offdiag_sq.shape != (rows, n - 1):
        raise InvalidInputError("batch shapes do not match params")
    if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(offdiag_sq))):
        raise InvalidInputError("matrix entries must be finite")
    a_cols = np.ascontiguousarray(diag.T) - p.shift
    b_cols = np.ascontiguousarray(offdiag_sq.T)
    prev2 = np.zeros(rows)
    prev = np.ones(rows)
    expo = np.zeros(rows, dtype=np.int64)
    for i in range(n):
        cur = a_cols[i] * prev
        if i:
            cur -= b_cols[i - 1] * prev2
        big = np.maximum(np.abs(cur), np.abs(prev))
        k = np.frexp(big)[1] - 1
        k[big == 0] = 0
        cur = np.ldexp(cur, -k)
        prev = np.ldexp(prev, -k)
        expo += k
        prev2, prev = prev, cur
    signs = np.sign(prev).astype(np.int64)
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(prev)) + expo * LN2 - 0.5 * n * math.log(n)
    log_abs[signs == 0] = -math.inf
    return signs, log_abs


def _gershgorin(diag: np.ndarray, off: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    rows = diag.shape[0]
    rad = np.zeros_like(diag)
    if off.shape[1]:
        rad[:, :-1] += off
        rad[:, 1:] += off
    lo = np.min(diag - rad, axis=1)
    hi = np.max(diag + rad, axis=1)
    return lo.reshape(rows, 1), hi.reshape(rows, 1)


def sturm_count_batch(diag: np.ndarray, offdiag_sq: np.ndarray, shifts: np.ndarray) -> np.ndarray:
    """Number of eigenvalues below each shift, per row.

    ``shifts`` has shape (R, K). Pivots q_i = (a_i - s) - b_{i-1}^2 / q_{i-1};
    a pivot that is exactly zero is replaced by -pivmin, with
    pivmin = tiny * max(1, max b^2) (the LAPACK dstebz perturbation).
    """
    rows, n = diag.shape
    pivmin = _SAFMIN * np.maximum(1.0, offdiag_sq.max(axis=1, initial=0.0)).reshape(rows, 1)
    a_cols = np.ascontiguousarray(diag.T)[:, :, None]
    b_cols = np.ascontiguousarray(offdiag_sq.T)[:, :, None]
    shifts = np.asarray(shifts, dtype=np.float64)
    q = a_cols[0] - shifts
    work = np.empty_like(q)
    neg = np.empty(q.shape, dtype=bool)
    count = np.zeros(q.shape, dtype=np.int32)
    for j in range(n):
        if j:
            np.subtract(a_cols[j], shifts, out=work)
            np.divide(b_cols[j - 1], q, out=q)
            np.subtract(work, q, out=q)
        if not q.all():
            zero = q == 0
            q[zero] = -np.broadcast_to(pivmin, q.shape)[zero]
        np.less(q, 0.0, out=neg)
        count += neg
    return count


def eigenvalues_bisection_batch(
    diag: np.ndarray, offdiag: np.ndarray, indices=None
) -> np.ndarray:
    """Selected eigenvalues (ascending ranks ``indices``, 0-based) of each row's matrix.

    Brackets start from the Gershgorin interval and every eigenvalue is
    bisected independently on the Sturm count until its bracket is narrower
    than 2 * 1e-13 * max(|lo|, |hi|). Returns an (R, K) array.
    """
    diag = np.atleast_2d(np.asarray(diag, dtype=np.float64))
    off = np.atleast_2d(np.asarray(offdiag, dtype=np.float64)).reshape(diag.shape[0], -1)
    rows, n = diag.shape
    ranks = np.arange(n) if indices is None else np.asarray(indices, dtype=np.int64)
    if ranks.size and (ranks.min() < 0 or ranks.max() >= n):
        raise InvalidInputError("eigenvalue index out of range")
    off_sq = off * off
    lo, hi = _gershgorin(diag, off)
    scale = np.maximum(np.maximum(np.abs(lo), np.abs(hi)), _SAFMIN)
    tol = EIG_REL_TOL * scale
    # widen so that no eigenvalue sits exactly on a bracket end
    lo = lo - tol
    hi = hi + tol
    lo_k = np.repeat(lo, ranks.size, axis=1)
    hi_k = np.repeat(hi, ranks.size, axis=1)
    target = ranks.reshape(1, -1)
    width = float(np.max((hi - lo) / tol)) if rows else 1.0
    steps = max(1, math.ceil(math.log2(max(width, 2.0))))
    for _ in range(steps):
        mid = 0.5 * (lo_k + hi_k)
        below = sturm_count_batch(diag, off_sq, mid) > target
        hi_k = np.where(below, mid, hi_k)
        lo_k = np.where(below, lo_k, mid)
    return 0.5 * (lo_k + hi_k)


def eigenvalues_bisection(m: TridiagonalMatrix, indices=None) -> np.ndarray:
    """All eigenvalues of the unscaled matrix, ascending (or the requested ranks)."""
    return eigenvalues_bisection_batch(m.diag[None, :], m.offdiag[None, :], indices)[0]


def sturm_count(m: TridiagonalMatrix, s: float) -> int:
    """Number of eigenvalues of ``m`` strictly below ``s`` (up to the pivmin rule)."""
    return int(sturm_count_batch(m.diag[None, :], m.offdiag_sq[None, :], np.array([[s]]))[0, 0])


def logabsdet_from_eigs(eigs, p: EdgeParams) -> SignedLogDet:
    """sum_i log|eig_i / sqrt(N) - 2 theta| from unscaled eigenvalues."""
    eigs = np.asarray(eigs, dtype=np.float64).reshape(-1)
    if eigs.size != p.n:
        raise InvalidInputError(f"expected {p.n} eigenvalues, got {eigs.size}")
    gaps = eigs / math.sqrt(p.n) - 2.0 * p.theta
    if np.any(gaps == 0):
        return SignedLogDet(0, -math.inf)
    negatives = int(np.count_nonzero(gaps < 0))
    return SignedLogDet(-1 if negatives % 2 else 1, math.fsum(np.log(np.abs(gaps))))


def logabsdet_from_eigs_batch(eigs: np.ndarray, p: EdgeParams) -> tuple[np.ndarray, np.ndarray]:
    gaps = np.asarray(eigs) / math.sqrt(p.n) - 2.0 * p.theta
    signs = np.where(np.count_nonzero(gaps < 0, axis=1) % 2, -1, 1)
    with np.errstate(divide="ignore"):
        log_abs = np.array([math.fsum(row) for row in np.log(np.abs(gaps))])
    zero = np.any(gaps == 0, axis=1)
    signs[zero] = 0
    log_abs[zero] = -math.inf
    return signs, log_abs
