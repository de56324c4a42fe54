import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats as sps

from edge_logdet.clt import CltVariant, Scaling
from edge_logdet.ensemble import EnsembleSpec, TridiagonalMatrix, sample_normal
from edge_logdet.errors import InsufficientDataError, InvalidParameterError, SingularDeterminantError
from edge_logdet.logdet import EdgeParams, eigenvalues_bisection_batch
from edge_logdet.rng import RngStream
from edge_logdet.stats import (
    BatchConfig,
    SigmaRule,
    decimate_spectrum,
    decimation_samples,
    ks_normal,
    ks_two_sample,
    normal_cdf,
    prop1_sweep,
    run_campaign,
    sample_campaign_batch,
    scaling_exponent_fit,
    stieltjes_sums,
    stieltjes_sums_recurrence_batch,
    summarize,
    summarize_campaign,
    write_samples_csv,
    write_summary_csv,
)


def test_summary_two_points():
    s = summarize([-1.0, 1.0])
    assert s.mean == 0.0 and s.variance == 2.0
    assert math.isnan(s.ks_p_value)


def test_summary_single_zero():
    s = summarize([0.0])
    assert s.ks_distance == 0.5 and math.isnan(s.variance)


def test_summary_requires_data():
    with pytest.raises(InsufficientDataError):
        summarize([])


def test_own_normal_sampler_passes_ks():
    assert summarize(sample_normal(RngStream(123, 0), 10**5)).ks_p_value > 0.001


@given(st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=300))
def test_summary_matches_scipy(values):
    x = np.array(values)
    s = summarize(x)
    assert 0 <= s.ks_distance <= 1 and s.variance >= 0
    assert s.mean == pytest.approx(np.mean(x), abs=1e-9)
    assert s.ks_distance == pytest.approx(sps.kstest(x, "norm").statistic, abs=1e-12)
    if np.ptp(x) > 1e-6 * max(1.0, np.max(np.abs(x))):
        assert s.skewness == pytest.approx(sps.skew(x, bias=False), rel=1e-6, abs=1e-9)


def test_normal_cdf_accuracy():
    x = np.linspace(-8, 8, 2001)
    assert np.max(np.abs(normal_cdf(x) - sps.norm.cdf(x))) < 1e-14


def test_ks_p_value_is_asymptotic_kolmogorov():
    d, p = ks_normal(np.linspace(-2, 2, 400))
    assert p == pytest.approx(sps.kstwobign.sf(math.sqrt(400) * d), rel=1e-10)


def test_two_sample_ks_against_scipy():
    a = sample_normal(RngStream(1, 1), 500)
    b = sample_normal(RngStream(1, 2), 700) + 0.2
    rep = ks_two_sample(a, b)
    assert rep.statistic == pytest.approx(sps.ks_2samp(a, b).statistic, abs=1e-12)
    assert (rep.n_a, rep.n_b) == (500, 700)


def test_stieltjes_examples():
    s = stieltjes_sums([0.0], EdgeParams.from_sigma(1, 0.0))
    assert (s.s1, s.s2) == (pytest.approx(-0.5), pytest.approx(0.25))
    s = stieltjes_sums([1.0, 1.0, 1.0], EdgeParams.from_sigma(3, 0.0))
    assert s.s1 == pytest.approx(0.0, abs=1e-15) and s.s2 == pytest.approx(3.0)
    with pytest.raises(SingularDeterminantError):
        stieltjes_sums([2.0], EdgeParams.from_sigma(1, 0.0))


@pytest.mark.parametrize("n,sigma", [(8, -2.0), (64, 1.0), (200, 4.0), (300, 0.0)])
def test_stieltjes_recurrence_matches_eigenvalues(n, sigma):
    diag, off = sample_campaign_batch(EnsembleSpec(n, 1.0), 17, range(10))
    p = EdgeParams.from_sigma(n, sigma)
    s1, s2 = stieltjes_sums_recurrence_batch(diag, off, p)
    eigs = eigenvalues_bisection_batch(diag, off) / math.sqrt(n)
    for k in range(10):
        ref = stieltjes_sums(eigs[k], p)
        assert s1[k] == pytest.approx(ref.s1, rel=1e-7, abs=1e-7 * n)
        assert s2[k] == pytest.approx(ref.s2, rel=1e-7)
        assert s2[k] > 0


def test_stieltjes_recurrence_handles_large_n():
    diag, off = sample_campaign_batch(EnsembleSpec(4096, 1.0), 3, range(4))
    s1, s2 = stieltjes_sums_recurrence_batch(diag, off, EdgeParams.from_sigma(4096, 1.0))
    assert np.all(np.isfinite(s1)) and np.all(s2 > 0)


def test_scaling_fit_examples():
    ns = [512, 1024, 4096, 16384]
    assert scaling_exponent_fit([(n, n ** (2 / 3)) for n in ns]) == pytest.approx(2 / 3)
    assert scaling_exponent_fit([(n, 7 * n ** (4 / 3)) for n in ns]) == pytest.approx(4 / 3)
    assert scaling_exponent_fit([(n, -3.0 * n) for n in ns]) == pytest.approx(1.0)


@given(st.floats(-3, 3), st.floats(0.01, 100))
def test_scaling_fit_recovers_power(power, const):
    ns = [2**k for k in range(5, 12)]
    assert scaling_exponent_fit([(n, const * n**power) for n in ns]) == pytest.approx(power, abs=1e-9)


def test_scaling_fit_errors():
    with pytest.raises(InvalidParameterError):
        scaling_exponent_fit([(1, 1.0), (2, 2.0)])
    with pytest.raises(InvalidParameterError):
        scaling_exponent_fit([(4, 1.0), (4, 2.0), (4, 3.0)])
    with pytest.raises(InvalidParameterError):
        scaling_exponent_fit([(4, 1.0), (8, 0.0), (16, 3.0)])


def test_sigma_rules():
    assert SigmaRule.parse("const:-1")(100) == -1.0
    ll = math.log(math.log(1000))
    assert SigmaRule.parse("loglog_sq:2")(1000) == pytest.approx(2 * ll**2)
    assert SigmaRule.parse("loglog_cube")(1000) == pytest.approx(ll**3)
    with pytest.raises(InvalidParameterError):
        SigmaRule.parse("cubic:1")
    with pytest.raises(InvalidParameterError):
        SigmaRule.parse("const:x")


def test_batch_config_validation_and_warning():
    with pytest.raises(InvalidParameterError):
        BatchConfig(0, 0, (10,))
    with pytest.raises(InvalidParameterError):
        BatchConfig(0, 1, ())
    cfg = BatchConfig(0, 1, (100,), SigmaRule("const", 30.0))
    with pytest.warns(UserWarning):
        cfg.params(100)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        BatchConfig(0, 1, (100,), SigmaRule("const", 3.0)).params(100)


def _cfg(**kw):
    base = dict(master_seed=5, reps=300, n_list=(32, 90), sigma_rule=SigmaRule("const", 2.0))
    base.update(kw)
    return BatchConfig(**base)


def test_campaign_determinism_and_thread_independence(tmp_path):
    cfg = _cfg()
    a = run_campaign(cfg)
    b = run_campaign(cfg, threads=3)
    assert a == b
    write_samples_csv(a, tmp_path / "a.csv")
    write_samples_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    one = run_campaign(_cfg(reps=1))
    assert one == run_campaign(_cfg(reps=1)) and one[0] == a[0]


def test_campaign_records_and_csv(tmp_path):
    records = run_campaign(_cfg(variant=CltVariant(Scaling.THM2_THETA)))
    assert [(r.n, r.rep) for r in records[:2]] == [(32, 0), (32, 1)]
    assert not any(r.skip for r in records)
    summary = summarize_campaign(records)
    assert set(summary) == {32, 90}
    write_summary_csv(summary, tmp_path / "s.csv")
    header = (tmp_path / "s.csv").read_text().splitlines()[0]
    assert header == "n,count,mean,variance,skewness,excess_kurtosis,ks_distance,ks_p_value"
    write_samples_csv(records, tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text().splitlines()[0] == "n,rep,raw_logdet,z,skip_flag"


def test_campaign_spike_applied_to_last_entry():
    spiked = run_campaign(_cfg(spike=1.0, reps=5, variant=CltVariant.for_spike(Scaling.THM1_LOG, 1.0)))
    plain = run_campaign(_cfg(reps=5))
    diag, off = sample_campaign_batch(EnsembleSpec(32, 1.0, 1.0), 5, range(1))
    base_diag, _ = sample_campaign_batch(EnsembleSpec(32, 1.0), 5, range(1))
    assert diag[0, -1] == pytest.approx(base_diag[0, -1] + math.sqrt(32))
    assert spiked[0].raw_logdet != plain[0].raw_logdet


def test_decimate_spectrum_even_ranks():
    out = decimate_spectrum([5.0, 1.0, 3.0], [4.0, 2.0, 0.0, 6.0])
    assert out.tolist() == [5.0, 3.0, 1.0]


def test_decimation_top_two_matches_full_spectra():
    n, reps, seed = 12, 30, 8
    even_top, gue = decimation_samples(n, reps, seed)
    from edge_logdet.ensemble import sample_batch

    idx = np.arange(reps)
    da, oa = sample_batch(EnsembleSpec(n, 2.0), seed, (3 * idx).tolist())
    db, ob = sample_batch(EnsembleSpec(n + 1, 2.0), seed, (3 * idx + 1).tolist())
    ea, eb = eigenvalues_bisection_batch(da, oa), eigenvalues_bisection_batch(db, ob)
    for k in range(reps):
        assert decimate_spectrum(ea[k], eb[k])[0] == pytest.approx(even_top[k], abs=1e-12)
    dc, oc = sample_batch(EnsembleSpec(n, 1.0), seed, (3 * idx + 2).tolist())
    assert np.allclose(eigenvalues_bisection_batch(dc, oc)[:, -1], gue, atol=1e-12)


def test_decimated_spectrum_matches_gue_moments():
    # all even-ranked values, not only the top one, follow the GUE law
    n, reps = 6, 3000
    idx = np.arange(reps)
    from edge_logdet.ensemble import sample_batch

    da, oa = sample_batch(EnsembleSpec(n, 2.0), 40, (3 * idx).tolist())
    db, ob = sample_batch(EnsembleSpec(n + 1, 2.0), 40, (3 * idx + 1).tolist())
    dc, oc = sample_batch(EnsembleSpec(n, 1.0), 40, (3 * idx + 2).tolist())
    ea, eb = eigenvalues_bisection_batch(da, oa), eigenvalues_bisection_batch(db, ob)
    dec = np.array([decimate_spectrum(ea[k], eb[k]) for k in range(reps)])
    gue = np.sort(eigenvalues_bisection_batch(dc, oc), axis=1)[:, ::-1]
    for rank in range(n):
        assert ks_two_sample(dec[:, rank], gue[:, rank]).p_value > 1e-4


def test_prop1_sweep_shapes():
    rows, raw = prop1_sweep([32, 64, 128], 20, 1.0, master_seed=2)
    assert [r.n for r in rows] == [32, 64, 128]
    assert raw[64][0].shape == (20,) and np.all(raw[64][1] > 0)
    again, _ = prop1_sweep([32, 64, 128], 20, 1.0, master_seed=2, threads=2)
    assert rows == again
