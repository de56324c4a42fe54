import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from edge_logdet import checks
from edge_logdet.clt import deterministic_shift_exact
from edge_logdet.edge_process import (
    compute_trace,
    edge_profile,
    edge_quantities,
    exp_consistency_gap,
    g_weights,
    l_variance_profile,
    large_r_fraction,
    log_e_from_ratios,
    predicted_sum_variance,
    rho_plus_log_modulus,
    scatter_pairs,
    sign_alternation_fraction,
    spike_log_ratio,
    t_delta_profile,
    t_delta_sum,
    xi_inputs,
    xi_variance_exact,
    xi_variance_profile,
)
from edge_logdet.ensemble import EnsembleSpec, TridiagonalMatrix, apply_spike, sample_gamma, sample_normal, sample_tridiagonal
from edge_logdet.errors import DomainError, RegimeError
from edge_logdet.logdet import EdgeParams, logabsdet_recurrence
from edge_logdet.rng import RngStream
from edge_logdet.stats import sample_campaign_batch

sizes = st.integers(3, 3000)
sigmas = st.floats(-1.0, 30.0)


def _draw(n, alpha=1.0, seed=0, idx=0):
    return sample_tridiagonal(EnsembleSpec(n, alpha), RngStream(seed, idx))


def _real_params(n, sigma):
    p = EdgeParams.from_sigma(n, sigma)
    if (n - 1) > n * p.theta**2:
        p = EdgeParams.from_sigma(n, 0.0)
    return p


@given(sizes, sigmas)
def test_edge_quantity_invariants(n, sigma):
    p = _real_params(n, sigma)
    prof = edge_profile(p)
    i = np.arange(1, n + 1)
    r, m = prof["r"][i], prof["m"][i]
    assert np.allclose(r + m, 2.0, rtol=0, atol=1e-12)
    assert np.allclose(r * m, (i - 1) / (n * p.theta**2), rtol=1e-12, atol=1e-15)
    assert np.all(r >= 1) and np.all(m >= 0) and np.all(m <= 1)
    delta = prof["delta"][2:]
    assert np.all(delta >= 0)
    assert np.all(np.diff(delta) >= -1e-15 * delta[1:])


def test_edge_quantities_scalar_matches_profile():
    p = EdgeParams.from_sigma(500, 3.0)
    prof = edge_profile(p)
    q = edge_quantities(321, p)
    assert q.r == prof["r"][321] and q.gamma == prof["gamma"][321]
    assert q.delta == pytest.approx(q.m / q.r - q.m / prof["r"][320], rel=1e-9)


def test_rho_plus_moduli():
    p = EdgeParams.from_sigma(100, 0.0)
    assert rho_plus_log_modulus(1, p) == pytest.approx(math.log(2 * math.sqrt(100)))
    assert rho_plus_log_modulus(101, p) == pytest.approx(math.log(10.0))
    q = EdgeParams.from_two_theta(100, 1.0)
    assert rho_plus_log_modulus(90, q) == pytest.approx(0.5 * math.log(89))


def test_reconstruction_against_recurrence():
    n = 4096
    p = EdgeParams.from_sigma(n, 5.0)
    shift = deterministic_shift_exact(p)
    for k in range(5):
        m = _draw(n, 1.0, 8, k)
        trace = compute_trace(m, p)
        ref = logabsdet_recurrence(m, p).log_abs
        assert abs(trace.e_log[n] + shift - ref) <= 1e-6 * n
        assert abs(trace.e_log[n] + shift - ref) <= 1e-6 * abs(ref)
        assert not trace.flagged
        assert exp_consistency_gap(trace) <= 1e-8 * max(1.0, abs(trace.e_log[n]))


def test_r2_closed_form_is_one_generic_step():
    n = 300
    p = EdgeParams.from_sigma(n, 2.0)
    q = edge_quantities(2, p)
    for k in range(100):
        m = _draw(n, 1.0, 31, k)
        xi = xi_inputs(m, p)
        r1 = m.diag[0] / p.shift  # R_1 = E_1/E_0 + 1 with E_0 = 1
        step = xi.alpha_i[2] - q.gamma + (q.gamma + xi.beta_i[2] - q.delta) / (1 - r1)
        assert abs(compute_trace(m, p).r_series[2] - step) <= 1e-12


@given(st.integers(3, 200), st.floats(0.0, 20.0), st.integers(0, 10**6))
def test_ratio_recursion_tracks_e_ratios(n, sigma, seed):
    p = EdgeParams.from_sigma(n, sigma)
    trace = compute_trace(_draw(n, 1.0, seed), p, with_l=True)
    if trace.flagged:
        return
    e = trace.e_sign * np.exp(trace.e_log - trace.e_log.max())
    i = np.arange(3, n + 1)
    ratio = e[i] / e[i - 1]
    assert np.allclose(trace.r_series[i] - 1, ratio, rtol=1e-7, atol=1e-9)
    assert log_e_from_ratios(trace) == pytest.approx(trace.e_log[n], abs=1e-7 * max(1, abs(trace.e_log[n])))


def test_degenerate_input_zero_determinants():
    n = 6
    p = EdgeParams.from_sigma(n, 1.0)
    m = TridiagonalMatrix(np.full(n, p.shift), np.zeros(n - 1))
    trace = compute_trace(m, p, with_r=False)
    assert np.all(trace.e_sign[1:] == 0)
    assert np.all(trace.e_log[1:] == -np.inf)


def test_l_series_follows_its_recursion():
    n = 200
    p = EdgeParams.from_sigma(n, 5.0)
    m = _draw(n, 1.0, 2)
    trace = compute_trace(m, p, with_l=True)
    xi = xi_inputs(m, p).xi_i
    gamma = edge_profile(p)["gamma"]
    assert trace.l_series[2] == 0.0
    for i in (3, 50, n):
        assert trace.l_series[i] == pytest.approx(xi[i] + gamma[i] * trace.l_series[i - 1], abs=1e-14)


def test_regime_error_for_r_below_real_regime():
    p = EdgeParams.from_two_theta(100, 1.0)
    with pytest.raises(RegimeError):
        compute_trace(_draw(100), p)
    trace = compute_trace(_draw(100), p, with_r=False)
    assert np.all(np.isfinite(trace.e_log[1:]))


def test_sign_alternation_and_small_ratios_at_the_edge():
    n = 10**4
    p = EdgeParams.from_two_theta(n, 2.0)
    trace = compute_trace(_draw(n, 1.0, 4), p)
    assert sign_alternation_fraction(trace) >= 0.95
    assert large_r_fraction(trace, n ** (-1 / 3), int(0.9 * n)) < 0.05
    pairs = scatter_pairs(trace)
    assert pairs.shape == (n - 1, 2) and np.all(np.isfinite(pairs))


def test_scatter_saturation():
    p = EdgeParams.from_two_theta(400, 1.0)
    trace = compute_trace(_draw(400), p, with_r=False)
    pairs = scatter_pairs(trace, cap=1e3)
    assert np.all(np.abs(pairs) <= 1e3)


def test_spike_ratio_matches_direct_difference():
    n = 16
    p = EdgeParams.from_sigma(n, 2.0)
    for k in range(20):
        m = _draw(n, 1.0, 6, k)
        base = logabsdet_recurrence(m, p).log_abs
        spiked = logabsdet_recurrence(apply_spike(m, 1.0), p).log_abs
        r_last = compute_trace(m, p).r_series[n]
        assert spiked - base == pytest.approx(spike_log_ratio(r_last, p, 1.0), abs=1e-8)


def test_g_weight_tail_and_large_theta_limit():
    p = EdgeParams.from_sigma(1000, 4.0)
    g = g_weights(p)
    assert g[p.n + 1] == 1.0
    assert g[p.n] == pytest.approx(1 + edge_profile(p)["gamma"][p.n], rel=1e-15)
    big = EdgeParams.from_two_theta(1000, 2e3)
    assert np.allclose(g_weights(big)[3:], 1.0, atol=1e-3)


@given(st.integers(3, 2000), st.floats(0.0, 25.0))
def test_g_weights_satisfy_backward_recursion(n, sigma):
    p = _real_params(n, sigma)
    g = g_weights(p)
    gamma = edge_profile(p)["gamma"]
    i = np.arange(3, n + 1)
    assert np.allclose(g[i], 1 + gamma[i] * g[i + 1], rtol=1e-12)


def test_xi_variance_formula_examples():
    p = EdgeParams.from_sigma(2000, 5.0)
    prof = edge_profile(p)
    i = 1500
    r, m, rp = prof["r"][i], prof["m"][i], prof["r"][i - 1]
    nt2 = p.n * p.theta**2
    assert xi_variance_exact(i, p, 1.0) == pytest.approx(1 / (nt2 * r**2) + m * r / (nt2 * r**2 * rp**2))
    assert xi_variance_exact(i, p, 3.0) == pytest.approx(3 * xi_variance_exact(i, p, 1.0))
    assert xi_variance_profile(p, 1.0)[i] == pytest.approx(xi_variance_exact(i, p, 1.0), rel=1e-14)


def test_xi_variance_monte_carlo():
    n, i, alpha = 2000, 1500, 1.0
    p = EdgeParams.from_sigma(n, 5.0)
    draws = 10**6
    a = math.sqrt(alpha) * sample_normal(RngStream(70, 0), draws)
    b_sq = sample_gamma((i - 1) / alpha, alpha, RngStream(70, 1), size=draws)
    prof = edge_profile(p)
    r, m, rp = prof["r"][i], prof["m"][i], prof["r"][i - 1]
    scale = math.sqrt(n) * p.theta
    xi = a / (scale * r) + math.sqrt(m / r) * (b_sq - (i - 1)) / math.sqrt(i - 1) / (scale * rp)
    assert np.var(xi) == pytest.approx(xi_variance_exact(i, p, alpha), rel=0.01)


def test_xi_inputs_match_entrywise_formula():
    n = 50
    p = EdgeParams.from_sigma(n, 3.0)
    m = _draw(n, 1.0, 9)
    xi = xi_inputs(m, p)
    prof = edge_profile(p)
    scale = math.sqrt(n) * p.theta
    for i in (2, 17, n):
        c = (m.offdiag[i - 2] ** 2 - (i - 1)) / math.sqrt(i - 1)
        expect = m.diag[i - 1] / (scale * prof["r"][i]) + math.sqrt(prof["m"][i] / prof["r"][i]) * c / (
            scale * prof["r"][i - 1]
        )
        assert xi.xi_i[i] == pytest.approx(expect, rel=1e-13)


def test_l_variance_first_step_and_monte_carlo():
    n, reps = 100, 10**5
    p = EdgeParams.from_sigma(n, 5.0)
    v = l_variance_profile(p, 1.0)
    assert v[2] == 0.0
    assert v[3] == pytest.approx(xi_variance_exact(3, p, 1.0), rel=1e-14)
    diag, off = sample_campaign_batch(EnsembleSpec(n, 1.0), 55, range(reps))
    prof = edge_profile(p)
    r, mm, gamma = prof["r"], prof["m"], prof["gamma"]
    scale = math.sqrt(n) * p.theta
    level = np.zeros(reps)
    for i in range(3, n + 1):
        c = (off[:, i - 2] ** 2 - (i - 1)) / math.sqrt(i - 1)
        xi = diag[:, i - 1] / (scale * r[i]) + math.sqrt(mm[i] / r[i]) * c / (scale * r[i - 1])
        level = xi + gamma[i] * level
        if i in (10, 60, n):
            assert np.var(level) == pytest.approx(v[i], rel=0.02)


def test_predicted_variance_alpha_linearity_and_domain():
    p = EdgeParams.from_sigma(10**4, 2 * math.log(math.log(10**4)) ** 2)
    e1, c1 = predicted_sum_variance(p, 1.0)
    e2, c2 = predicted_sum_variance(p, 2.0)
    assert e2 == pytest.approx(2 * e1, rel=1e-14) and c2 == pytest.approx(2 * c1, rel=1e-14)
    with pytest.raises(DomainError):
        predicted_sum_variance(EdgeParams.from_sigma(100, -1.0), 1.0)


def test_t_delta_sum_equals_profile_sum():
    p = EdgeParams.from_sigma(3000, 5.0)
    prof = t_delta_profile(p)
    assert t_delta_sum(p) == pytest.approx(math.fsum(prof[3:]), rel=1e-12)


def test_t_delta_collapses_without_gamma():
    p = EdgeParams.from_two_theta(2000, 2e3)
    delta = edge_profile(p)["delta"]
    assert t_delta_sum(p) == pytest.approx(math.fsum(delta[3:]), rel=1e-3)


def test_t_delta_ratio_improves_with_n():
    ratios = [t_delta_sum(EdgeParams.from_sigma(n, 5.0)) / (math.log(n) / 6) for n in (10**4, 10**7)]
    assert abs(ratios[1] - 1) < abs(ratios[0] - 1)


def test_frozen_bound_checks():
    for result in checks.bound_identities():
        assert result.passed, result.line()
