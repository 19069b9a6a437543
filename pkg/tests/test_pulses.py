import json
import struct
from dataclasses import replace

import numpy as np
import pytest

from mmsqueeze import kernels
from mmsqueeze.errors import ConfigurationError, InvalidParameterError
from mmsqueeze.gauss import dB_to_variance
from mmsqueeze.pulses import (
    MAGIC,
    PulseTrainConfig,
    calibration_record,
    estimate_squeezing,
    extract_pulse_quadratures,
    iter_segment,
    optimize_window,
    phase_bins,
    piezo_phase,
    quadrature_variance,
    read_record,
    stream_pulse_quadratures,
    synthesize_train,
    vacuum_variance,
    verify_pulse_isolation,
    window_statistics,
)

HG0 = quadrature_variance(dB_to_variance(-0.47), dB_to_variance(0.55))
IDEAL = dict(detector_bandwidth=float("inf"), samples_per_pulse=32, n_vacuum_pulses=20_000, n_dark_pulses=5_000)


def small(**kw):
    base = dict(samples_per_pulse=32, duration_pulses=20_000, n_vacuum_pulses=20_000, n_dark_pulses=5_000,
                piezo_period_pulses=4_000)
    base.update(kw)
    return PulseTrainConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigurationError, match="bandwidth"):
        PulseTrainConfig(detector_bandwidth=50e6)
    for bad in (dict(rep_rate=0), dict(duration_pulses=0), dict(samples_per_pulse=3),
                dict(pulse_start=30, pulse_width=4, samples_per_pulse=32)):
        with pytest.raises(ConfigurationError):
            PulseTrainConfig(**bad)
    assert PulseTrainConfig().rep_rate == 156e6
    assert PulseTrainConfig().cmrr_dB == 64


def test_record_shape_and_truth():
    cfg = small(duration_pulses=5_000)
    rec = synthesize_train(HG0, cfg)
    assert rec.samples.size == cfg.duration_pulses * cfg.samples_per_pulse
    assert rec.theta.size == rec.x.size == cfg.duration_pulses
    assert rec.theta.min() >= 0 and rec.theta.max() <= np.pi


def test_triangular_sweep():
    t = piezo_phase(np.arange(8), 8)
    assert np.allclose(t, np.pi * np.array([0, 0.25, 0.5, 0.75, 1, 0.75, 0.5, 0.25]))


def test_truth_statistics():
    rec = synthesize_train(HG0, small(duration_pulses=40_000))
    z = rec.x / np.sqrt(HG0(rec.theta))
    assert abs(z.var() - 1) < 3 * np.sqrt(2 / z.size)
    assert abs(np.corrcoef(z[:-1], z[1:])[0, 1]) < 3 / np.sqrt(z.size)


def test_vacuum_integrated_variance_is_one():
    cfg = small(electronic_noise_dB=float("inf"), cmrr_dB=float("inf"), duration_pulses=40_000)
    rec = synthesize_train(vacuum_variance, cfg)
    v = kernels.integrate_windows(rec.samples, cfg.samples_per_pulse, 0, cfg.samples_per_pulse)
    n = v.size
    assert abs(v.var() - 1) < 3 * np.sqrt(2 / n)
    # the leakage between periods is tiny, so the integral tracks the truth closely
    assert abs(v.var() / rec.x.var() - 1) < 1e-3


def test_noiseless_full_period_recovers_truth():
    cfg = small(electronic_noise_dB=float("inf"), cmrr_dB=float("inf"), duration_pulses=5_000)
    rec = synthesize_train(HG0, cfg)
    pv = extract_pulse_quadratures(rec, 0, cfg.samples_per_pulse)
    assert np.corrcoef(pv.values, rec.x)[0, 1] > 0.999
    assert pv.vacuum_values.var(ddof=1) == pytest.approx(1.0, rel=1e-12)


def test_window_preconditions():
    rec = synthesize_train(HG0, small(duration_pulses=1_000))
    with pytest.raises(InvalidParameterError):
        extract_pulse_quadratures(rec, 0, 0)
    with pytest.raises(InvalidParameterError):
        extract_pulse_quadratures(rec, 20, 20)
    with pytest.raises(InvalidParameterError):
        extract_pulse_quadratures(rec, -1, 4)


def test_streaming_matches_materialised():
    cfg = small(duration_pulses=10_000, chunk_pulses=1_500)
    rec = synthesize_train(HG0, cfg)
    pv = extract_pulse_quadratures(rec, 3, 9)
    streamed, head = stream_pulse_quadratures(HG0, cfg, 3, 9, keep_pulses=2_500)
    assert np.array_equal(streamed.values, pv.values)
    assert np.array_equal(streamed.phases, rec.theta)
    assert np.array_equal(head.samples, rec.samples[: 2_500 * cfg.samples_per_pulse])
    assert np.array_equal(head.x, rec.x[:2_500])


def test_chunking_does_not_change_the_record():
    a = synthesize_train(HG0, small(duration_pulses=3_000, chunk_pulses=3_000))
    b = synthesize_train(HG0, small(duration_pulses=3_000, chunk_pulses=700))
    assert np.allclose(a.samples, b.samples, rtol=1e-12, atol=1e-15)
    assert np.array_equal(a.x, b.x)


def test_record_file_round_trip(tmp_path):
    rec = synthesize_train(HG0, small(duration_pulses=1_000, n_vacuum_pulses=1_000, n_dark_pulses=100))
    path, truth = tmp_path / "r.ptrn", tmp_path / "r.csv"
    rec.write(path, truth)
    raw = path.read_bytes()
    assert raw[:4] == MAGIC
    version, hlen = struct.unpack("<II", raw[4:12])
    header = json.loads(raw[12 : 12 + hlen])
    assert version == 1 and header["config"]["samples_per_pulse"] == 32
    assert len(raw) == 12 + hlen + 8 * (rec.samples.size + rec.vacuum_samples.size + rec.dark_samples.size)
    assert truth.read_text().splitlines()[0] == "pulse_index,theta,x_m"
    back = read_record(path, truth)
    assert np.array_equal(back.samples, rec.samples)
    assert np.array_equal(back.dark_samples, rec.dark_samples)
    assert np.array_equal(back.x, rec.x) and back.config == rec.config
    (tmp_path / "bad").write_bytes(b"NOPE" + raw[4:])
    with pytest.raises(InvalidParameterError):
        read_record(tmp_path / "bad")


def test_isolation_detects_two_pulse_windows():
    cfg = small(duration_pulses=20_000)
    rec = synthesize_train(vacuum_variance, cfg)
    spp = cfg.samples_per_pulse
    good = kernels.integrate_windows(rec.samples, spp, 0, spp)
    assert verify_pulse_isolation(good).passed
    # a flat sum over two periods shares every pulse between neighbouring values
    double = kernels.integrate_windows(rec.samples, spp, 0, 2 * spp)
    check = verify_pulse_isolation(double)
    assert not check.passed and check.rho1 > 0.4


def test_isolation_preconditions():
    with pytest.raises(InvalidParameterError):
        verify_pulse_isolation([])
    with pytest.raises(InvalidParameterError):
        verify_pulse_isolation(np.zeros(999))


def test_isolation_ignores_slow_phase_modulation():
    rng = np.random.default_rng(0)
    n = 50_000
    theta = piezo_phase(np.arange(n), 1_000)
    x = rng.standard_normal(n) * np.sqrt(quadrature_variance(0.3, 3.0)(theta))
    assert verify_pulse_isolation(x, theta).passed


def test_ideal_detector_window_is_pulse_support():
    cfg = small(**{**IDEAL, "duration_pulses": 1})
    choice = optimize_window(calibration_record(cfg))
    assert (choice.offset, choice.length) == (cfg.start, cfg.width)


def test_filtered_window_matches_exhaustive_scan():
    cfg = small(samples_per_pulse=16, detector_bandwidth=156e6, duration_pulses=1, n_vacuum_pulses=20_000)
    rec = calibration_record(cfg)
    choice = optimize_window(rec)
    spp = cfg.samples_per_pulse
    sigma2 = np.mean(rec.dark_samples**2)
    thr = 3 / np.sqrt(cfg.n_vacuum_pulses)
    best, arg = -np.inf, None
    for off in range(spp):
        for ln in range(1, spp - off + 1):
            v = kernels.integrate_windows(rec.vacuum_samples, spp, off, ln)
            v = v - v.mean()
            rho = np.dot(v[:-1], v[1:]) / (v.size - 1) / (np.dot(v, v) / v.size)
            snr = (v.var() - ln * sigma2) / (ln * sigma2)
            if abs(rho) < thr and snr > best + 1e-9:
                best, arg = snr, (off, ln)
    assert (choice.offset, choice.length) == arg
    assert choice.offset + choice.length < spp  # the tail region is left out
    assert choice.snr == pytest.approx(best, rel=1e-3)


def test_window_is_deterministic_across_seeds():
    cfg = small(**{**IDEAL, "duration_pulses": 1})
    a = optimize_window(calibration_record(cfg))
    b = optimize_window(calibration_record(replace(cfg, seed=99)))
    assert (a.offset, a.length) == (b.offset, b.length)


def test_optimised_window_passes_isolation():
    cfg = small(duration_pulses=30_000)
    rec = synthesize_train(HG0, cfg)
    choice = optimize_window(rec)
    pv = extract_pulse_quadratures(rec, choice.offset, choice.length)
    assert verify_pulse_isolation(pv.vacuum_values).passed
    assert verify_pulse_isolation(pv.values, pv.phases).passed


def test_window_statistics_shape():
    rec = calibration_record(small(duration_pulses=1, n_vacuum_pulses=2_000))
    snr, rho, n = window_statistics(rec)
    assert snr.shape == (32, 33) and n == 2_000
    assert np.isnan(snr[31, 2]) and np.isfinite(snr[0, 32])


def test_vacuum_estimate_is_zero():
    cfg = small(duration_pulses=100_000)
    rec = synthesize_train(vacuum_variance, cfg)
    pv = extract_pulse_quadratures(rec, cfg.start, cfg.width + 6)
    est = estimate_squeezing(pv.values, pv.phases, pv.vacuum_values, pv.dark_values)
    se_sq, se_asq = est.standard_error_dB
    assert se_sq > 0 and se_asq > 0
    # extremal bins of pure noise drift by about 2 standard errors
    assert abs(est.squeeze_dB) < 4 * se_sq and abs(est.antisqueeze_dB) < 4 * se_asq
    # the independent signal segment reproduces the shot-noise unit
    assert abs(pv.values.var(ddof=1) - 1) < 3 * np.sqrt(2 / pv.values.size) * 1.5


def test_phase_bins_centre_on_zero():
    assert list(phase_bins([0.0, np.pi, np.pi / 16 * 0.49, np.pi / 2], 16)) == [0, 0, 0, 8]


def test_extremes_bracket_intermediate_bins():
    cfg = small(duration_pulses=200_000, piezo_period_pulses=10_000)
    rec = synthesize_train(quadrature_variance(0.5, 2.0), cfg)
    pv = extract_pulse_quadratures(rec, cfg.start, cfg.width + 6)
    est = estimate_squeezing(pv.values, pv.phases, pv.vacuum_values, pv.dark_values)
    v = np.array(est.bin_variances)
    assert v[est.bins[0]] == v.min() and v[est.bins[1]] == v.max()
    assert est.bins == (0, 8)


def test_hg0_recovered():
    cfg = small(samples_per_pulse=64, duration_pulses=400_000, n_vacuum_pulses=50_000, piezo_period_pulses=20_000)
    cal = calibration_record(cfg)
    w = optimize_window(cal)
    pv, _ = stream_pulse_quadratures(HG0, cfg, w.offset, w.length, calibration=cal)
    est = estimate_squeezing(pv.values, pv.phases, pv.vacuum_values, pv.dark_values)
    se = est.standard_error_dB
    assert abs(est.squeeze_dB + 0.47) < 3 * se[0]
    assert abs(est.antisqueeze_dB - 0.55) < 3 * se[1]
    assert est.electronic_noise_subtracted and est.n_pulses_used > 0


def test_inferred_phase_mode():
    cfg = small(duration_pulses=400_000, piezo_period_pulses=40_000)
    rec = synthesize_train(quadrature_variance(0.5, 2.0), cfg)
    pv = extract_pulse_quadratures(rec, cfg.start, cfg.width + 6)
    known = estimate_squeezing(pv.values, pv.phases, pv.vacuum_values, pv.dark_values)
    blind = estimate_squeezing(pv.values, None, pv.vacuum_values, pv.dark_values, block=1_000)
    assert abs(blind.squeeze_dB - known.squeeze_dB) < 0.2
    assert abs(blind.antisqueeze_dB - known.antisqueeze_dB) < 0.2


def test_low_clearance_bias_is_predictable():
    v_sq = 0.5
    cfg = PulseTrainConfig(
        samples_per_pulse=16, detector_bandwidth=float("inf"), electronic_noise_dB=3.0,
        duration_pulses=400_000, n_vacuum_pulses=100_000, n_dark_pulses=50_000, piezo_period_pulses=20_000,
    )
    rec = synthesize_train(quadrature_variance(v_sq, 2.0), cfg)
    pv = extract_pulse_quadratures(rec, 0, cfg.samples_per_pulse)
    raw = estimate_squeezing(pv.values, pv.phases, pv.vacuum_values)
    e = 10 ** (-3 / 10)  # full-period electronic noise relative to shot noise
    bin_half = np.pi / 32
    v_bin = v_sq + (2.0 - v_sq) * (bin_half - np.sin(2 * bin_half) / 2) / (2 * bin_half)  # bin-averaged V
    expected = 10 * np.log10((v_bin + e) / (1 + e))
    assert abs(raw.squeeze_dB - expected) < 3 * raw.standard_error_dB[0]
    fixed = estimate_squeezing(pv.values, pv.phases, pv.vacuum_values, pv.dark_values)
    assert abs(fixed.squeeze_dB - 10 * np.log10(v_bin)) < 3 * fixed.standard_error_dB[0]


def test_estimator_preconditions():
    with pytest.raises(InvalidParameterError):
        estimate_squeezing([1.0], [0.0], np.ones(10))
    with pytest.raises(InvalidParameterError):
        quadrature_variance(0.0, 1.0)
    cfg = small(duration_pulses=100)
    with pytest.raises(InvalidParameterError):
        list(iter_segment(lambda t: -np.ones_like(t), cfg, "signal"))


@pytest.mark.slow
def test_half_period_window_at_full_statistics():
    cfg = PulseTrainConfig(samples_per_pulse=64, duration_pulses=7_800_000, piezo_period_pulses=100_000)
    cal = calibration_record(cfg)
    peak = cfg.start + cfg.width
    offset = max(0, peak - cfg.samples_per_pulse // 4)
    pv, _ = stream_pulse_quadratures(HG0, cfg, offset, cfg.samples_per_pulse // 2, calibration=cal)
    est = estimate_squeezing(pv.values, pv.phases, pv.vacuum_values, pv.dark_values)
    assert abs(est.squeeze_dB + 0.47) < 0.05
    assert abs(est.antisqueeze_dB - 0.55) < 0.05
