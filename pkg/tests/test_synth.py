import numpy as np
import pytest
from hypothesis import given, strategies as st

from photonids.synth import (Label, PulseParams, SynthConfig, pulse_params_for, pulse_peak,
                             pulse_shape, render, synth_dataset, synth_stream, synth_waveform)

quiet = SynthConfig(noise_sigma=0.0, interference_amp=0.0)


def params(**kw):
    base = dict(amplitude_scale=1000.0, rise_tau=1.5, fall_tau=9.0, onset=4.0, position_x=0.3)
    base.update(kw)
    return PulseParams(**base)


def test_zero_amplitude_is_flat():
    p = params(amplitude_scale=0.0)
    assert np.all(pulse_shape(np.linspace(0, 100, 301), p) == 0)


def test_zero_at_onset_and_before():
    p = params()
    assert pulse_shape(p.onset, p) == 0.0
    assert np.all(pulse_shape(np.linspace(0, p.onset, 50), p) == 0)


@given(st.floats(0.3, 5.0), st.floats(1.1, 6.0), st.floats(0.0, 1.0))
def test_closed_form_peak_matches_grid_search(rise, ratio, x):
    p = params(rise_tau=rise, fall_tau=rise * ratio, position_x=x)
    t_star, v_star = pulse_peak(p)
    t = np.linspace(p.onset, p.onset + 20 * p.fall_tau, 400001)
    y = pulse_shape(t, p)
    k = np.argmax(y)
    assert abs(t[k] - t_star) <= 2 * (t[1] - t[0])
    assert y[k] <= v_star * (1 + 1e-12)
    # grid discretization only: second-order in the grid step
    assert v_star - y[k] <= 1e-6 * v_star


@pytest.mark.parametrize("bad", [dict(rise_tau=0.0), dict(fall_tau=1.0, rise_tau=2.0),
                                 dict(amplitude_scale=-1.0), dict(position_x=1.5)])
def test_invalid_params_rejected(bad):
    with pytest.raises(ValueError):
        params(**bad)


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        pulse_shape(-0.1, params())


def test_same_seed_same_waveform():
    cfg = SynthConfig()
    a = synth_waveform(cfg, Label.PHOTON, np.random.default_rng(7))
    b = synth_waveform(cfg, Label.PHOTON, np.random.default_rng(7))
    assert a.samples.tobytes() == b.samples.tobytes()
    assert a.samples.dtype == np.int16 and a.samples.size == cfg.window_samples


def test_noiseless_waveform_is_quantized_shape():
    rng = np.random.default_rng(3)
    w = synth_waveform(quiet, "dark", rng)
    # replay the draws to recover the onset
    rng = np.random.default_rng(3)
    x = float(quiet.position_dist(Label.DARK).sample(rng))
    onset = quiet.onset + rng.uniform(0.0, quiet.onset_jitter)
    p = pulse_params_for(quiet, Label.DARK, x, onset=onset)
    t = np.arange(quiet.window_samples) * quiet.sample_period
    assert np.array_equal(w.samples, np.rint(pulse_shape(t, p)).astype(np.int16))


def test_dataset_is_deterministic_and_balanced():
    a = synth_dataset(SynthConfig(), 200, seed=11)
    b = synth_dataset(SynthConfig(), 200, seed=11)
    for u, v in zip(a, b):
        assert np.asarray(u).tobytes() == np.asarray(v).tobytes()
    assert int(a[1].sum()) == 100


def test_peak_marginals_overlap():
    # Bhattacharyya coefficient of the two classes' peak histograms
    cfg = SynthConfig()
    s, lab, _ = synth_dataset(cfg, 20000, seed=5)
    peak = s.max(axis=1).astype(float)
    bins = np.linspace(peak.min(), peak.max(), 61)
    h0 = np.histogram(peak[lab == 0], bins)[0] / np.sum(lab == 0)
    h1 = np.histogram(peak[lab == 1], bins)[0] / np.sum(lab == 1)
    assert np.sum(np.sqrt(h0 * h1)) >= 0.5


@given(st.floats(0.0, 1.0), st.sampled_from([Label.DARK, Label.PHOTON]))
def test_noiseless_pulses_are_nonnegative_unimodal(x, label):
    p = pulse_params_for(quiet, label, x, onset=3.3)
    w = render(quiet, p).astype(float)
    t = np.arange(quiet.window_samples) * quiet.sample_period
    assert np.all(w >= 0)
    assert np.all(w[t < p.onset] == 0)
    k = int(np.argmax(w))
    assert np.all(np.diff(w[:k + 1]) >= 0) and np.all(np.diff(w[k:]) <= 0)


@given(st.floats(0.0, 0.99), st.floats(0.001, 0.01))
def test_amplitude_strictly_increasing_in_position(x, dx):
    lo = pulse_params_for(quiet, Label.PHOTON, x)
    hi = pulse_params_for(quiet, Label.PHOTON, min(x + dx, 1.0))
    assert pulse_peak(hi)[1] > pulse_peak(lo)[1]


def test_empty_stream_is_baseline_noise():
    s = synth_stream(SynthConfig(), 0, 1e6, np.random.default_rng(0), tail_samples=5000)
    assert s.onsets.size == 0
    assert abs(s.samples.mean()) < 1.0
    assert np.abs(s.samples).max() < 40


def test_noiseless_stream_has_one_excursion_per_pulse():
    s = synth_stream(quiet, 3, 1e6, np.random.default_rng(4))
    above = (s.samples > 20).astype(int)
    rises = np.flatnonzero(np.diff(np.r_[0, above]) == 1)
    assert rises.size == 3
    assert np.all((rises >= s.onsets) & (rises - s.onsets < 20))


def test_stream_rate_matches_request():
    cfg = SynthConfig()
    rate = 2e6
    s = synth_stream(cfg, 5000, rate, np.random.default_rng(9))
    duration = s.samples.size * cfg.sample_period * 1e-9
    assert abs(5000 / duration - rate) / rate < 0.05


def test_stream_rejects_rates_beyond_window():
    with pytest.raises(ValueError):
        synth_stream(SynthConfig(), 10, 2e7, np.random.default_rng(0))
