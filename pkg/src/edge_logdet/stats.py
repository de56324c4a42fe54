"""Monte Carlo campaigns, normality summaries, Stieltjes sums and the decimation test.

Replicate ``r`` of size ``N`` always draws from
``RngStream(master_seed, campaign_stream_index(N, r))``. The O(N) engines
operate elementwise across replicate rows, so output does not depend on
how replicates are chunked or scheduled.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import special
from scipy import stats as sps

from edge_logdet.clt import CltVariant, center_scale
from edge_logdet.ensemble import EnsembleSpec, sample_batch
from edge_logdet.errors import InsufficientDataError, InvalidParameterError, SingularDeterminantError
from edge_logdet.logdet import (
    EdgeParams,
    eigenvalues_bisection_batch,
    logabsdet_recurrence_batch,
)
from edge_logdet.rng import campaign_stream_index

log = logging.getLogger(__name__)

CHUNK = 256
KS_MIN_COUNT = 8


@dataclass(frozen=True)
class SigmaRule:
    """sigma_N as a function of N: CONST -> c, LOGLOG_SQ -> c (log log N)^2, LOGLOG_CUBE -> c (log log N)^3."""

    kind: str = "loglog_sq"
    c: float = 1.0

    KINDS = ("const", "loglog_sq", "loglog_cube")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise InvalidParameterError(f"unknown sigma rule {self.kind!r}")

    @classmethod
    def parse(cls, text: str) -> "SigmaRule":
        """Parse ``kind:c`` (e.g. ``const:-1``, ``loglog_sq:1``); a bare kind means c = 1."""
        kind, _, value = text.partition(":")
        kind = kind.strip().lower().replace("-", "_")
        try:
            c = float(value) if value else 1.0
        except ValueError as exc:
            raise InvalidParameterError(f"bad sigma rule {text!r}") from exc
        return cls(kind, c)

    def __call__(self, n: int) -> float:
        if self.kind == "const":
            return self.c
        if n < 3:
            raise InvalidParameterError("log log N rules need N >= 3")
        ll = math.log(math.log(n))
        return self.c * ll**2 if self.kind == "loglog_sq" else self.c * ll**3

    def __str__(self) -> str:
        return f"{self.kind}:{self.c:g}"


@dataclass(frozen=True)
class BatchConfig:
    master_seed: int
    reps: int
    n_list: tuple[int, ...]
    sigma_rule: SigmaRule = field(default_factory=SigmaRule)
    alpha: float = 1.0
    spike: float = 0.0
    variant: CltVariant = field(default_factory=CltVariant)

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise InvalidParameterError("reps must be >= 1")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise InvalidParameterError("n_list must hold positive sizes")
        EnsembleSpec(1, self.alpha, self.spike)
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))

    def params(self, n: int) -> EdgeParams:
        sigma = self.sigma_rule(n)
        if n > 1 and sigma >= math.log(n) ** 2:
            warnings.warn(f"sigma_N={sigma:.4g} is not << log^2 N at N={n}", stacklevel=2)
        return EdgeParams.from_sigma(n, sigma)


@dataclass(frozen=True)
class CampaignRecord:
    n: int
    rep: int
    raw_logdet: float
    z: float
    skip: bool = False


@dataclass(frozen=True)
class SummaryStats:
    count: int
    mean: float
    variance: float
    skewness: float
    excess_kurtosis: float
    ks_distance: float
    ks_p_value: float


@dataclass(frozen=True)
class StieltjesSums:
    s1: float
    s2: float


@dataclass(frozen=True)
class KsReport:
    statistic: float
    p_value: float
    n_a: int
    n_b: int


def _chunks(reps: int, size: int = CHUNK) -> list[range]:
    return [range(lo, min(lo + size, reps)) for lo in range(0, reps, size)]


def _map_chunks(fn, chunks, threads: int):
    if threads <= 1:
        return [fn(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, chunks))


def sample_campaign_batch(
    spec: EnsembleSpec, master_seed: int, reps: range
) -> tuple[np.ndarray, np.ndarray]:
    """Matrices for replicates ``reps`` of size spec.n, spike applied to the last diagonal entry."""
    diag, off = sample_batch(spec, master_seed, [campaign_stream_index(spec.n, r) for r in reps])
    if spec.spike:
        diag[:, -1] += spec.spike * math.sqrt(spec.n)
    return diag, off


def run_campaign(cfg: BatchConfig, threads: int = 1) -> list[CampaignRecord]:
    """Raw log|D_N| and z for every (N, replicate), ordered by N then replicate."""
    records: list[CampaignRecord] = []
    for n in cfg.n_list:
        p = cfg.params(n)
        center, scale = center_scale(p, cfg.alpha, cfg.variant, cfg.spike or None)
        spec = EnsembleSpec(n, cfg.alpha, cfg.spike)

        def work(reps: range, spec=spec, p=p):
            diag, off = sample_campaign_batch(spec, cfg.master_seed, reps)
            return reps, logabsdet_recurrence_batch(diag, off, p)

        for reps, (signs, raw) in _map_chunks(work, _chunks(cfg.reps), threads):
            for rep, sgn, value in zip(reps, signs.tolist(), raw.tolist()):
                if sgn == 0:
                    log.warning("singular determinant at n=%d rep=%d; recorded as skip", n, rep)
                    records.append(CampaignRecord(n, rep, value, math.nan, True))
                else:
                    records.append(CampaignRecord(n, rep, value, (value - center) / scale))
    return records


def normal_cdf(x) -> np.ndarray:
    """Phi(x) = erfc(-x / sqrt 2) / 2."""
    return 0.5 * special.erfc(-np.asarray(x, dtype=np.float64) / math.sqrt(2.0))


def kolmogorov_pvalue(statistic: float, effective_n: float) -> float:
    """Asymptotic P(K > sqrt(n) D) from the Kolmogorov series."""
    return float(special.kolmogorov(math.sqrt(effective_n) * statistic))


def ks_normal(samples) -> tuple[float, float]:
    """One-sample KS distance to N(0, 1) and its asymptotic p-value (NaN below 8 points)."""
    x = np.sort(np.asarray(samples, dtype=np.float64))
    n = x.size
    if n == 0:
        raise InsufficientDataError("KS needs at least one sample")
    cdf = normal_cdf(x)
    ranks = np.arange(1, n + 1)
    dist = float(max(np.max(ranks / n - cdf), np.max(cdf - (ranks - 1) / n)))
    p = kolmogorov_pvalue(dist, n) if n >= KS_MIN_COUNT else math.nan
    return dist, p


def ks_two_sample(a, b) -> KsReport:
    """Two-sample KS statistic with the asymptotic p-value at n_a n_b / (n_a + n_b)."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise InsufficientDataError("two-sample KS needs non-empty samples")
    grid = np.concatenate([a, b])
    fa = np.searchsorted(a, grid, side="right") / a.size
    fb = np.searchsorted(b, grid, side="right") / b.size
    dist = float(np.max(np.abs(fa - fb)))
    eff = a.size * b.size / (a.size + b.size)
    return KsReport(dist, kolmogorov_pvalue(dist, eff), a.size, b.size)


def summarize(samples) -> SummaryStats:
    """Unbiased moments plus KS against N(0, 1).

    Variance needs 2 points, skewness 3, excess kurtosis 4; below that, or
    for constant samples, the field is NaN. The KS p-value is reported from 8 points on.
    """
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    n = x.size
    if n == 0:
        raise InsufficientDataError("summarize needs at least one sample")
    mean = math.fsum(x) / n
    var = float(np.var(x, ddof=1)) if n >= 2 else math.nan
    spread = n >= 2 and np.ptp(x) > 0
    skew = float(sps.skew(x, bias=False)) if n >= 3 and spread else math.nan
    kurt = float(sps.kurtosis(x, fisher=True, bias=False)) if n >= 4 and spread else math.nan
    dist, p = ks_normal(x)
    return SummaryStats(n, mean, var, skew, kurt, dist, p)


def summarize_campaign(records: list[CampaignRecord]) -> dict[int, SummaryStats]:
    by_n: dict[int, list[float]] = {}
    for rec in records:
        if not rec.skip:
            by_n.setdefault(rec.n, []).append(rec.z)
    return {n: summarize(z) for n, z in by_n.items()}


def stieltjes_sums(eigs, p: EdgeParams) -> StieltjesSums:
    """s1 = sum 1/mu_i - N and s2 = sum 1/mu_i^2, mu_i = 2 + N^(-2/3) sigma - lambda_i.

    ``eigs`` are eigenvalues of M/sqrt(N).
    """
    lam = np.asarray(eigs, dtype=np.float64).reshape(-1)
    mu = 2.0 * p.theta - lam
    if np.any(mu == 0):
        raise SingularDeterminantError("an eigenvalue sits exactly at the singularity")
    inv = 1.0 / mu
    return StieltjesSums(math.fsum(inv) - lam.size, math.fsum(inv * inv))


def stieltjes_sums_recurrence_batch(
    diag: np.ndarray, offdiag: np.ndarray, p: EdgeParams
) -> tuple[np.ndarray, np.ndarray]:
    """s1, s2 per row in O(N) without eigenvalues.

    With P_i(t) = det(t - M_i/sqrt(N)), sum 1/mu = P'/P and
    sum 1/mu^2 = (P'/P)^2 - P''/P at t = 2 theta. P, P', P'' follow the
    differentiated three-term recurrence; the six state values share one
    power-of-two scale, renormalised every step.
    """
    diag = np.atleast_2d(diag)
    rows, n = diag.shape
    root_n = math.sqrt(n)
    t_minus_a = np.ascontiguousarray((2.0 * p.theta - diag / root_n).T)
    b_sq = np.ascontiguousarray((np.atleast_2d(offdiag) ** 2 / n).T)
    p0, p1 = np.zeros(rows), np.ones(rows)
    d0, d1 = np.zeros(rows), np.zeros(rows)
    e0, e1 = np.zeros(rows), np.zeros(rows)
    for i in range(n):
        c = t_minus_a[i]
        if i:
            b = b_sq[i - 1]
            p2 = c * p1 - b * p0
            d2 = p1 + c * d1 - b * d0
            e2 = 2.0 * d1 + c * e1 - b * e0
        else:
            p2, d2, e2 = c * p1, p1 + c * d1, 2.0 * d1 + c * e1
        big = np.maximum.reduce([np.abs(v) for v in (p1, p2, d1, d2, e1, e2)])
        k = np.frexp(big)[1] - 1
        k[big == 0] = 0
        p0, p1 = np.ldexp(p1, -k), np.ldexp(p2, -k)
        d0, d1 = np.ldexp(d1, -k), np.ldexp(d2, -k)
        e0, e1 = np.ldexp(e1, -k), np.ldexp(e2, -k)
    with np.errstate(divide="ignore", invalid="ignore"):
        first = d1 / p1
        return first - n, first * first - e1 / p1


@dataclass(frozen=True)
class Prop1Row:
    n: int
    sigma: float
    median_abs_s1: float
    median_s2: float


def prop1_sweep(
    n_list, reps: int, sigma: float, alpha: float = 1.0, master_seed: int = 0, threads: int = 1
) -> tuple[list[Prop1Row], dict[int, tuple[np.ndarray, np.ndarray]]]:
    """Median |s1| and s2 per N over ``reps`` replicates at constant sigma."""
    rows, raw = [], {}
    for n in n_list:
        p = EdgeParams.from_sigma(n, sigma)
        spec = EnsembleSpec(n, alpha)

        def work(reps_range, spec=spec, p=p):
            diag, off = sample_campaign_batch(spec, master_seed, reps_range)
            return stieltjes_sums_recurrence_batch(diag, off, p)

        parts = _map_chunks(work, _chunks(reps), threads)
        s1 = np.concatenate([a for a, _ in parts])
        s2 = np.concatenate([b for _, b in parts])
        raw[n] = (s1, s2)
        rows.append(Prop1Row(n, sigma, float(np.median(np.abs(s1))), float(np.median(s2))))
    return rows, raw


def scaling_exponent_fit(points) -> float:
    """Least-squares slope of log|value| against log n."""
    pts = [(float(n), float(v)) for n, v in points]
    if len(pts) < 3:
        raise InvalidParameterError("need at least 3 points")
    if any(v == 0 for _, v in pts) or any(n <= 0 for n, _ in pts):
        raise InvalidParameterError("values must be nonzero and sizes positive")
    x = np.log([n for n, _ in pts])
    if np.ptp(x) == 0:
        raise InvalidParameterError("degenerate abscissae")
    y = np.log([abs(v) for _, v in pts])
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def decimate_spectrum(eigs_a, eigs_b) -> np.ndarray:
    """Even-ranked entries (2nd, 4th, ...) of the merged spectrum sorted descending."""
    merged = np.sort(np.concatenate([np.ravel(eigs_a), np.ravel(eigs_b)]))[::-1]
    return merged[1::2]


def decimation_samples(n: int, reps: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Largest even-ranked value of GOE_N u GOE_{N+1}, and largest GUE_N eigenvalue, per replicate.

    Streams: replicate r uses stream indices 3r (GOE_N), 3r+1 (GOE_{N+1}),
    3r+2 (GUE_N). Only the top two eigenvalues of each GOE enter the
    statistic, so only those ranks are bisected.
    """
    if n < 2:
        raise InvalidParameterError("decimation needs n >= 2")
    reps_idx = np.arange(reps)
    d_a, o_a = sample_batch(EnsembleSpec(n, 2.0), seed, (3 * reps_idx).tolist())
    d_b, o_b = sample_batch(EnsembleSpec(n + 1, 2.0), seed, (3 * reps_idx + 1).tolist())
    d_c, o_c = sample_batch(EnsembleSpec(n, 1.0), seed, (3 * reps_idx + 2).tolist())
    top_a = eigenvalues_bisection_batch(d_a, o_a, [n - 2, n - 1])
    top_b = eigenvalues_bisection_batch(d_b, o_b, [n - 1, n])
    gue = eigenvalues_bisection_batch(d_c, o_c, [n - 1])[:, 0]
    merged = np.sort(np.concatenate([top_a, top_b], axis=1), axis=1)
    return merged[:, -2], gue


def decimation_check(n: int, reps: int, seed: int = 0, shift: float = 0.0) -> KsReport:
    """Two-sample KS between decimated-GOE top values and GUE_N largest (+ ``shift``)."""
    even_top, gue = decimation_samples(n, reps, seed)
    return ks_two_sample(even_top, gue + shift)


SAMPLE_FIELDS = ("n", "rep", "raw_logdet", "z", "skip_flag")
SUMMARY_FIELDS = ("n",) + tuple(SummaryStats.__dataclass_fields__)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_samples_csv(records: list[CampaignRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SAMPLE_FIELDS)
        for r in records:
            writer.writerow([r.n, r.rep, _fmt(r.raw_logdet), _fmt(r.z), int(r.skip)])


def write_summary_csv(summary: dict[int, SummaryStats], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_FIELDS)
        for n in sorted(summary):
            writer.writerow([n] + [_fmt(v) for v in asdict(summary[n]).values()])


__all__ = [
    "BatchConfig",
    "CampaignRecord",
    "KsReport",
    "Prop1Row",
    "SigmaRule",
    "StieltjesSums",
    "SummaryStats",
    "decimate_spectrum",
    "decimation_check",
    "decimation_samples",
    "ks_normal",
    "ks_two_sample",
    "prop1_sweep",
    "run_campaign",
    "scaling_exponent_fit",
    "stieltjes_sums",
    "stieltjes_sums_recurrence_batch",
    "summarize",
    "summarize_campaign",
]
