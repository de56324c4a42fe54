"""Sampling of (spiked) tridiagonal Gaussian beta-ensembles.

The model is parameterised by ``alpha`` only: diagonal entries are
N(0, alpha) and the squared off-diagonals are b_i^2 ~ Gamma(i/alpha, scale
alpha), i.e. chi^2(2i/alpha) / (2/alpha). ``alpha = 1`` gives GUE and
``alpha = 2`` gives GOE eigenvalue laws.

Normals come from the Box-Muller transform applied to consecutive pairs of
stream uniforms; gammas from the Marsaglia-Tsang squeeze method with the
U**(1/shape) boost for shape < 1. Both are written out here so the draw
sequence depends only on the stream, not on a library default.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from edge_logdet.errors import InvalidParameterError
from edge_logdet.rng import RngStream


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    alpha: float = 1.0
    spike: float = 0.0

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameterError(f"n must be a positive integer, got {self.n!r}")
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise InvalidParameterError(f"alpha must be positive, got {self.alpha!r}")
        if not (self.spike >= 0 and math.isfinite(self.spike)):
            raise InvalidParameterError(f"spike must be nonnegative, got {self.spike!r}")


@dataclass(frozen=True, eq=False)
class TridiagonalMatrix:
    """Symmetric tridiagonal matrix, entries unscaled (no 1/sqrt(N))."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self) -> None:
        diag = np.asarray(self.diag, dtype=np.float64).reshape(-1)
        offdiag = np.asarray(self.offdiag, dtype=np.float64).reshape(-1)
        if diag.size < 1:
            raise InvalidParameterError("matrix must have at least one row")
        if offdiag.size != diag.size - 1:
            raise InvalidParameterError(
                f"expected {diag.size - 1} off-diagonal entries, got {offdiag.size}"
            )
        if np.any(offdiag < 0):
            raise InvalidParameterError("off-diagonal entries must be nonnegative")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", offdiag)

    @property
    def n(self) -> int:
        return self.diag.size

    @property
    def offdiag_sq(self) -> np.ndarray:
        return self.offdiag * self.offdiag

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TridiagonalMatrix):
            return NotImplemented
        return np.array_equal(self.diag, other.diag) and np.array_equal(
            self.offdiag, other.offdiag
        )


def sample_normal(rng: RngStream, size: int) -> np.ndarray:
    """Standard normals by Box-Muller on uniform pairs (u1, u2).

    Pair k yields sqrt(-2 log u1) * (cos 2 pi u2, sin 2 pi u2); an odd
    trailing value is dropped.
    """
    pairs = (size + 1) // 2
    u = rng.uniform(2 * pairs)
    radius = np.sqrt(-2.0 * np.log(u[0::2]))
    angle = 2.0 * np.pi * u[1::2]
    out = np.empty(2 * pairs)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:size]


def _standard_gamma(shape: np.ndarray, rng: RngStream) -> np.ndarray:
    boost = shape < 1.0
    k = np.where(boost, shape + 1.0, shape)
    d = k - 1.0 / 3.0
    c = 1.0 / np.sqrt(9.0 * d)
    out = np.empty_like(k)
    pending = np.arange(k.size)
    with np.errstate(invalid="ignore", divide="ignore"):
        while pending.size:
            x = sample_normal(rng, pending.size)
            u = rng.uniform(pending.size)
            dp = d[pending]
            v = 1.0 + c[pending] * x
            v = v * v * v
            ok = v > 0
            x2 = x * x
            accept = ok & (
                (u < 1.0 - 0.0331 * x2 * x2)
                | (np.log(u) < 0.5 * x2 + dp * (1.0 - v + np.log(v)))
            )
            out[pending[accept]] = dp[accept] * v[accept]
            pending = pending[~accept]
    if np.any(boost):
        u = rng.uniform(int(np.count_nonzero(boost)))
        out[boost] *= np.exp(np.log(u) / shape[boost])
    return out


def sample_gamma(shape, scale, rng: RngStream, size: int | None = None):
    """Gamma(shape, scale) draws; ``shape``/``scale`` may be arrays.

    Returns a float when ``size`` is None and both parameters are scalars.
    """
    shape_arr = np.asarray(shape, dtype=np.float64)
    scale_arr = np.asarray(scale, dtype=np.float64)
    if not (np.all(shape_arr > 0) and np.all(np.isfinite(shape_arr))):
        raise InvalidParameterError("gamma shape must be positive and finite")
    if not (np.all(scale_arr > 0) and np.all(np.isfinite(scale_arr))):
        raise InvalidParameterError("gamma scale must be positive and finite")
    scalar = size is None and shape_arr.ndim == 0 and scale_arr.ndim == 0
    target = np.broadcast_shapes(shape_arr.shape, scale_arr.shape, () if size is None else (size,))
    shape_b = np.broadcast_to(shape_arr, target).reshape(-1)
    draws = _standard_gamma(shape_b, rng).reshape(target) * scale_arr
    return float(draws) if scalar else draws


def sample_tridiagonal(spec: EnsembleSpec, rng: RngStream) -> TridiagonalMatrix:
    """Draw the diagonal first, then the N-1 off-diagonals; the spike is not applied."""
    n, alpha = spec.n, spec.alpha
    diag = math.sqrt(alpha) * sample_normal(rng, n)
    if n > 1:
        shapes = np.arange(1, n, dtype=np.float64) / alpha
        offdiag = np.sqrt(sample_gamma(shapes, alpha, rng))
    else:
        offdiag = np.empty(0)
    return TridiagonalMatrix(diag, offdiag)


def sample_batch(
    spec: EnsembleSpec, master_seed: int, stream_indices
) -> tuple[np.ndarray, np.ndarray]:
    """Stack one matrix per stream index into (R, N) and (R, N-1) arrays.

    Row r equals ``sample_tridiagonal(spec, RngStream(master_seed, stream_indices[r]))``.
    """
    indices = list(stream_indices)
    diag = np.empty((len(indices), spec.n))
    offdiag = np.empty((len(indices), spec.n - 1))
    for row, idx in enumerate(indices):
        m = sample_tridiagonal(spec, RngStream(master_seed, idx))
        diag[row] = m.diag
        offdiag[row] = m.offdiag
    return diag, offdiag


def apply_spike(m: TridiagonalMatrix, h: float) -> TridiagonalMatrix:
    """Add the rank-one spike sqrt(N) * h to the bottom-right entry."""
    if h == 0:
        return m
    diag = m.diag.copy()
    diag[-1] += h * math.sqrt(m.n)
    return replace(m, diag=diag)


def write_matrix_csv(m: TridiagonalMatrix, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "diag", "offdiag"])
        for i in range(m.n):
            off = f"{m.offdiag[i]:.17g}" if i < m.n - 1 else ""
            writer.writerow([i + 1, f"{m.diag[i]:.17g}", off])


def read_matrix_csv(path: str | Path) -> TridiagonalMatrix:
    diag, offdiag = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            diag.append(float(row["diag"]))
            if row["offdiag"]:
                offdiag.append(float(row["offdiag"]))
    return TridiagonalMatrix(np.array(diag), np.array(offdiag))
