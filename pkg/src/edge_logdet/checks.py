"""Reproducible numerical checks with frozen thresholds.

Each check returns a :class:`CheckResult`; the ``verify`` command runs the
deterministic ones and the acceptance tests run all of them. Thresholds
are module constants so that they are visible and cannot drift silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from edge_logdet.clt import (
    CltVariant,
    Scaling,
    deterministic_shift_asymptotic,
    deterministic_shift_exact,
)
from edge_logdet.edge_process import (
    compute_trace,
    edge_profile,
    g_weights,
    l_variance_profile,
    predicted_sum_variance,
    t_delta_sum,
    xi_variance_profile,
)
from edge_logdet.ensemble import EnsembleSpec, TridiagonalMatrix
from edge_logdet.logdet import (
    EdgeParams,
    eigenvalues_bisection_batch,
    logabsdet_from_eigs_batch,
    logabsdet_recurrence_batch,
)
from edge_logdet.stats import (
    BatchConfig,
    SigmaRule,
    decimation_check,
    prop1_sweep,
    run_campaign,
    sample_campaign_batch,
    scaling_exponent_fit,
    summarize_campaign,
)

DEFAULT_SEED = 1

ORACLE_REL_TOL = 1e-8
TRACE_REL_TOL = 1e-6
SHIFT_C = 5.0
VARIANCE_RATIO_BAND = (0.85, 1.15)
CLT_MEAN_TOL = 0.35
CLT_VAR_TOL = 0.35
CLT_KS_TOL = 0.10
SPIKE_CRITICAL_TOL = 0.5
SPIKE_SUBCRITICAL_TOL = 0.3
PROP1_SLOPE_TOL = 0.15
DECIMATION_MIN_P = 0.01
DECIMATION_CONTROL_MAX_P = 1e-6
XI_VARIANCE_C = 2.0
DELTA_ADJUSTED_C = 50.0
T_DELTA_C = 5.0


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "passed", bool(self.passed))

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def _loglog(n: int) -> float:
    return math.log(math.log(n))


def oracle_equivalence(
    n_list=(8, 64, 256, 512),
    alphas=(0.5, 1.0, 2.0),
    draws: int = 200,
    seed: int = DEFAULT_SEED,
) -> CheckResult:
    """Recurrence vs eigenvalue product on every (N, alpha, sigma) with sigma in {-2, 0, 1, log N}."""
    worst, sign_mismatch, cases = 0.0, 0, 0
    for n in n_list:
        for alpha in alphas:
            diag, off = sample_campaign_batch(EnsembleSpec(n, alpha), seed, range(draws))
            eigs = eigenvalues_bisection_batch(diag, off)
            for sigma in (-2.0, 0.0, 1.0, math.log(n)):
                p = EdgeParams.from_sigma(n, sigma)
                s_rec, v_rec = logabsdet_recurrence_batch(diag, off, p)
                s_eig, v_eig = logabsdet_from_eigs_batch(eigs, p)
                sign_mismatch += int(np.sum(s_rec != s_eig))
                rel = np.abs(v_rec - v_eig) / np.maximum(1.0, np.abs(v_eig))
                worst = max(worst, float(np.max(rel)))
                cases += draws
    ok = sign_mismatch == 0 and worst <= ORACLE_REL_TOL
    return CheckResult(
        "oracle equivalence",
        ok,
        f"{cases} cases, max rel err {worst:.2e} (tol {ORACLE_REL_TOL:g}), sign mismatches {sign_mismatch}",
    )


def trace_reconstruction(
    n: int = 4096, sigma: float = 5.0, draws: int = 50, seed: int = DEFAULT_SEED
) -> CheckResult:
    """e_log[N] plus the exact deterministic shift against the recurrence."""
    p = EdgeParams.from_sigma(n, sigma)
    shift = deterministic_shift_exact(p)
    diag, off = sample_campaign_batch(EnsembleSpec(n, 1.0), seed, range(draws))
    signs, ref = logabsdet_recurrence_batch(diag, off, p)
    worst = 0.0
    for k in range(draws):
        trace = compute_trace(TridiagonalMatrix(diag[k], off[k]), p, with_r=False)
        worst = max(worst, abs(trace.e_log[n] + shift - ref[k]) / max(1.0, abs(ref[k])))
    return CheckResult(
        "trace reconstruction",
        worst <= TRACE_REL_TOL,
        f"N={n}, {draws} draws, max rel err {worst:.2e} (tol {TRACE_REL_TOL:g})",
    )


def shift_asymptotics(n: int = 10**6, w_list=(5.0, 10.0, 20.0, 40.0)) -> CheckResult:
    """|exact - asymptotic shift| <= C w^(-3/2) at each w, with the gap decreasing in w."""
    gaps, within = [], []
    for w in w_list:
        p = EdgeParams.from_sigma(n, 2.0 * w)
        gap = abs(deterministic_shift_exact(p) - deterministic_shift_asymptotic(p))
        gaps.append(gap)
        within.append(gap <= SHIFT_C * w**-1.5)
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    detail = ", ".join(
        f"w={w:g}: {g:.4f} vs {SHIFT_C * w**-1.5:.4f}" for w, g in zip(w_list, gaps)
    )
    return CheckResult(
        "shift asymptotics",
        all(within) and decreasing,
        f"N={n}; {detail}; decreasing={decreasing}",
    )


def variance_identity(n_small: int = 10**4, n_large: int = 10**6) -> CheckResult:
    """Exact/closed-form ratio of the summed variance, sigma = 2 (log log N)^2, alpha = 1."""
    ratios = []
    for n in (n_small, n_large):
        p = EdgeParams.from_sigma(n, 2.0 * _loglog(n) ** 2)
        exact, closed = predicted_sum_variance(p, 1.0)
        ratios.append(exact / closed)
    lo, hi = VARIANCE_RATIO_BAND
    ok = lo <= ratios[0] <= hi and abs(ratios[1] - 1) < abs(ratios[0] - 1)
    return CheckResult(
        "variance identity",
        ok,
        f"ratio {ratios[0]:.5f} at N={n_small}, {ratios[1]:.5f} at N={n_large}",
    )


def clt_normality(
    n: int = 8192,
    n_small: int = 128,
    alphas=(1.0, 2.0),
    reps: int = 4000,
    seed: int = DEFAULT_SEED,
    threads: int = 1,
) -> list[CheckResult]:
    """Moments and KS of z under theta scaling, plus KS shrinking from N=128 to N=8192."""
    out = []
    variant = CltVariant(Scaling.THM2_THETA)
    for alpha in alphas:
        cfg = BatchConfig(seed, reps, (n_small, n), SigmaRule("loglog_sq", 1.0), alpha, 0.0, variant)
        summary = summarize_campaign(run_campaign(cfg, threads))
        big, small = summary[n], summary[n_small]
        ok = (
            abs(big.mean) <= CLT_MEAN_TOL
            and abs(big.variance - 1) <= CLT_VAR_TOL
            and big.ks_distance <= CLT_KS_TOL
        )
        out.append(
            CheckResult(
                f"clt normality alpha={alpha:g}",
                ok,
                f"N={n}: mean {big.mean:+.4f} (tol {CLT_MEAN_TOL}), var {big.variance:.4f} "
                f"(tol {CLT_VAR_TOL}), KS {big.ks_distance:.4f} (tol {CLT_KS_TOL})",
            )
        )
        out.append(
            CheckResult(
                f"clt KS monotone alpha={alpha:g}",
                big.ks_distance < small.ks_distance,
                f"KS {big.ks_distance:.4f} at N={n} vs {small.ks_distance:.4f} at N={n_small}",
            )
        )
    return out


def spike_shift(
    n: int = 8192, sigma: float = 5.0, reps: int = 2000, seed: int = DEFAULT_SEED
) -> list[CheckResult]:
    """Paired-seed mean change of log|D_N| for h = 1 and h = 0.5 against h = 0."""
    rule = SigmaRule("const", sigma)

    def raw(h: float) -> np.ndarray:
        cfg = BatchConfig(seed, reps, (n,), rule, 1.0, h, CltVariant.for_spike(Scaling.THM1_LOG, h))
        return np.array([r.raw_logdet for r in run_campaign(cfg)])

    base = raw(0.0)
    crit = float(np.mean(raw(1.0) - base))
    sub = float(np.mean(raw(0.5) - base))
    crit_target = -math.log(n) / 3.0 + 0.5 * math.log(sigma)
    sub_target = math.log(0.5)
    return [
        CheckResult(
            "spike critical h=1",
            abs(crit - crit_target) <= SPIKE_CRITICAL_TOL,
            f"mean diff {crit:.4f}, target {crit_target:.4f} +- {SPIKE_CRITICAL_TOL}",
        ),
        CheckResult(
            "spike subcritical h=0.5",
            abs(sub - sub_target) <= SPIKE_SUBCRITICAL_TOL,
            f"mean diff {sub:.4f}, target {sub_target:.4f} +- {SPIKE_SUBCRITICAL_TOL}",
        ),
    ]


def stieltjes_exponents(
    n_list=tuple(2**k for k in range(9, 15)), reps: int = 200, seed: int = DEFAULT_SEED
) -> list[CheckResult]:
    """Fitted growth exponents of median |s1| and median s2 at sigma = 1."""
    rows, _ = prop1_sweep(n_list, reps, 1.0, 1.0, seed)
    s1 = scaling_exponent_fit([(r.n, r.median_abs_s1) for r in rows])
    s2 = scaling_exponent_fit([(r.n, r.median_s2) for r in rows])
    return [
        CheckResult(
            "stieltjes s1 exponent",
            abs(s1 - 2 / 3) <= PROP1_SLOPE_TOL,
            f"slope {s1:.4f}, target 2/3 +- {PROP1_SLOPE_TOL}",
        ),
        CheckResult(
            "stieltjes s2 exponent",
            abs(s2 - 4 / 3) <= PROP1_SLOPE_TOL,
            f"slope {s2:.4f}, target 4/3 +- {PROP1_SLOPE_TOL}",
        ),
    ]


def decimation_identity(n: int = 200, reps: int = 5000, seed: int = DEFAULT_SEED) -> list[CheckResult]:
    """Decimated GOE pair against GUE, plus a shifted null that must be rejected."""
    null = decimation_check(n, reps, seed)
    control = decimation_check(n, reps, seed, shift=0.5)
    return [
        CheckResult(
            "decimation identity",
            null.p_value > DECIMATION_MIN_P,
            f"N={n}, reps={reps}: KS {null.statistic:.4f}, p {null.p_value:.4g} (need > {DECIMATION_MIN_P})",
        ),
        CheckResult(
            "decimation shifted control",
            control.p_value < DECIMATION_CONTROL_MAX_P,
            f"KS {control.statistic:.4f}, p {control.p_value:.3g} (need < {DECIMATION_CONTROL_MAX_P:g})",
        ),
    ]


def g_sandwich(n: int = 10**5, w_factor: float = 1.1) -> CheckResult:
    """base (1 - log^-2 N) < g_i < base (1 + w^-3/2), base = r_i / (2 (r_i - 1)), 3 <= i <= N - N^(1/3)."""
    w = w_factor * _loglog(n) ** 2
    p = EdgeParams.from_sigma(n, 2.0 * w)
    r = edge_profile(p)["r"]
    g = g_weights(p)
    i = np.arange(3, int(math.floor(n - n ** (1.0 / 3.0))) + 1)
    ratio = g[i] / (r[i] / (2.0 * (r[i] - 1.0)))
    lo, hi = 1.0 - math.log(n) ** -2, 1.0 + w**-1.5
    ok = bool(np.all(ratio > lo) and np.all(ratio < hi))
    return CheckResult(
        "g-weight sandwich",
        ok,
        f"N={n}, w={w:.3f}: g/base in [{ratio.min():.5f}, {ratio.max():.5f}] within ({lo:.5f}, {hi:.5f})",
    )


def xi_variance_bound(n: int = 10**4, sigma: float = 5.0, alpha: float = 1.0) -> CheckResult:
    """|E xi_i^2 - 2 alpha/(N theta^2 r_i^3)| <= C (2 alpha/(N theta^2 r_i^3)) / (N (r_i - 1))."""
    p = EdgeParams.from_sigma(n, sigma)
    r = edge_profile(p)["r"]
    ev = xi_variance_profile(p, alpha)
    i = np.arange(3, n + 1)
    lead = 2.0 * alpha / (n * p.theta**2 * r[i] ** 3)
    const = np.abs(ev[i] - lead) / lead * (n * (r[i] - 1.0))
    worst = float(np.max(const))
    return CheckResult(
        "xi variance epsilon bound",
        worst <= XI_VARIANCE_C,
        f"N={n}, sigma={sigma:g}: implied constant {worst:.4f} (C={XI_VARIANCE_C:g})",
    )


def delta_adjusted(n: int = 10**4, sigma: float = 5.0, alpha: float = 1.0) -> CheckResult:
    """|gamma_i V_{i-1}/alpha - delta_i| <= C / (N^2 (r_i - 1)^4) for 4 <= i <= N."""
    p = EdgeParams.from_sigma(n, sigma)
    prof = edge_profile(p)
    v = l_variance_profile(p, alpha)
    i = np.arange(4, n + 1)
    lhs = np.abs(prof["gamma"][i] * v[i - 1] / alpha - prof["delta"][i])
    const = lhs * n**2 * (prof["r"][i] - 1.0) ** 4
    worst = float(np.max(const))
    return CheckResult(
        "delta-adjusted bound",
        worst <= DELTA_ADJUSTED_C,
        f"N={n}, sigma={sigma:g}: implied constant {worst:.4f} (C={DELTA_ADJUSTED_C:g})",
    )


def t_delta_leading(n: int = 10**5, sigma: float = 5.0) -> CheckResult:
    """|sum T_delta - (1/6) log N| <= 5 log log N, with delta nondecreasing."""
    p = EdgeParams.from_sigma(n, sigma)
    delta = edge_profile(p)["delta"][3:]
    monotone = bool(np.all(np.diff(delta) >= 0))
    gap = abs(t_delta_sum(p) - math.log(n) / 6.0)
    bound = T_DELTA_C * _loglog(n)
    return CheckResult(
        "T_delta leading term",
        gap <= bound and monotone,
        f"N={n}: |sum - log(N)/6| = {gap:.4f} (bound {bound:.4f}), delta monotone={monotone}",
    )


def bound_identities() -> list[CheckResult]:
    return [g_sandwich(), xi_variance_bound(), delta_adjusted(), t_delta_leading()]


def verify_suite(quick: bool = True) -> list[CheckResult]:
    """Deterministic identity suite run by the ``verify`` command."""
    if quick:
        oracle = oracle_equivalence(n_list=(8, 64, 256), draws=20)
        trace = trace_reconstruction(draws=5)
    else:
        oracle = oracle_equivalence()
        trace = trace_reconstruction()
    return [oracle, trace, shift_asymptotics(), g_sandwich()]
