import numpy as np
import pytest
from scipy import signal as sps

from earaad.errors import ConfigError, DataError
from earaad.signals import (BandpassSpec, MonoSeries, MultiSeries, baseline_correct,
                            common_average_reference, design_bandpass, filtfilt,
                            hilbert_envelope, preprocess_chain, preprocess_envelope, resample)


def _sos_gain(sos, f_hz, fs):
    # evaluate prod_k B_k(z) / A_k(z) on the unit circle by plain polynomial arithmetic
    z = np.exp(1j * 2 * np.pi * f_hz / fs)
    h = 1.0 + 0j
    for b0, b1, b2, a0, a1, a2 in sos:
        h *= (b0 + b1 / z + b2 / z ** 2) / (a0 + a1 / z + a2 / z ** 2)
    return 20 * np.log10(abs(h))


def _central(x, fs, keep_s):
    trim = int(round((x.size / fs - keep_s) / 2 * fs))
    return x[trim:x.size - trim]


# --- containers ---------------------------------------------------------------

def test_series_reject_bad_input():
    with pytest.raises(ConfigError):
        MonoSeries([1.0, 2.0], 0.0)
    with pytest.raises(DataError):
        MonoSeries([1.0, np.nan], 64.0)
    with pytest.raises(ConfigError):
        MultiSeries(np.zeros((4, 2)), 64.0, ("a", "a"))
    with pytest.raises(ConfigError):
        MultiSeries(np.zeros((4, 2)), 64.0, ("a",))


def test_series_are_read_only():
    x = MultiSeries(np.zeros((4, 2)), 64.0)
    assert x.channels == ("C1", "C2")
    with pytest.raises(ValueError):
        x.samples[0, 0] = 1.0


# --- design_bandpass ----------------------------------------------------------------

def test_bandpass_passband_and_stopband():
    sos = design_bandpass(BandpassSpec(2, 8, 4), 64.0)
    assert abs(_sos_gain(sos, 4.0, 64.0)) < 1.0
    assert abs(_sos_gain(sos, np.sqrt(16.0), 64.0)) < 1.0
    assert _sos_gain(sos, 0.5, 64.0) < -12.0
    assert _sos_gain(sos, min(32.0, 0.95 * 32.0), 64.0) < -12.0


def test_bandpass_gain_matches_scipy_response():
    sos = design_bandpass(BandpassSpec(2, 8, 4), 500.0)
    freqs = np.array([0.5, 2.0, 4.0, 8.0, 30.0])
    _, h = sps.sosfreqz(sos, worN=freqs, fs=500.0)
    np.testing.assert_allclose(_sos_gain(sos, freqs, 500.0), 20 * np.log10(np.abs(h)),
                               atol=1e-9)


@pytest.mark.parametrize("lo,hi,fs", [(8, 2, 64), (0, 8, 64), (2, 40, 64), (2, 32, 64)])
def test_bandpass_invalid_edges(lo, hi, fs):
    with pytest.raises(ConfigError):
        design_bandpass(BandpassSpec(lo, hi, 4), fs)


# --- filtfilt ----------------------------------------------------------------

def test_filtfilt_impulse_is_symmetric():
    k = 300
    x = np.zeros(601)
    x[k] = 1.0
    y = filtfilt(MonoSeries(x, 64.0), design_bandpass(BandpassSpec(2, 8, 4), 64.0)).samples
    left = y[k - 200:k][::-1]
    right = y[k + 1:k + 201]
    assert np.max(np.abs(left - right)) < 1e-6 * np.max(np.abs(y))
    assert np.argmax(np.abs(y)) == k


def test_filtfilt_sine_passes():
    fs = 64.0
    t = np.arange(int(10 * fs)) / fs
    x = np.sin(2 * np.pi * 4 * t)
    y = filtfilt(MonoSeries(x, fs), design_bandpass(BandpassSpec(2, 8, 4), fs)).samples
    r = np.corrcoef(_central(x, fs, 8), _central(y, fs, 8))[0, 1]
    assert r > 0.999


def test_filtfilt_zero_and_length():
    sos = design_bandpass(BandpassSpec(2, 8, 4), 64.0)
    y = filtfilt(MultiSeries(np.zeros((100, 3)), 64.0), sos)
    assert y.samples.shape == (100, 3) and not np.any(y.samples)
    with pytest.raises(DataError):
        filtfilt(MonoSeries(np.ones(20), 64.0), sos)


def test_filtfilt_reversal(rng):
    sos = design_bandpass(BandpassSpec(2, 8, 4), 64.0)
    x = rng.standard_normal((500, 3))
    fwd = filtfilt(MultiSeries(x, 64.0), sos).samples
    rev = filtfilt(MultiSeries(x[::-1], 64.0), sos).samples[::-1]
    assert np.max(np.abs(fwd - rev)) <= 1e-9 * np.max(np.abs(fwd))


# --- resample --------------------------------------------------------------------

@pytest.mark.parametrize("fs", [500.0, 1000.0])
def test_resample_device_rates_to_64(fs):
    t = np.arange(int(10 * fs)) / fs
    y = resample(MonoSeries(np.sin(2 * np.pi * 4 * t), fs), 64.0)
    assert y.fs == 64.0 and len(y) == 640
    ref = np.sin(2 * np.pi * 4 * np.arange(640) / 64.0)
    assert np.corrcoef(_central(ref, 64, 8), _central(y.samples, 64, 8))[0, 1] > 0.999


def test_resample_constant_and_identity():
    y = resample(MonoSeries(np.full(5000, 3.5), 500.0), 64.0).samples
    interior = y[20:-20]
    assert np.max(np.abs(interior - 3.5)) < 1e-6 * 3.5
    x = MonoSeries(np.arange(10.0), 64.0)
    np.testing.assert_array_equal(resample(x, 64.0).samples, x.samples)


def test_resample_length_rule():
    y = resample(MonoSeries(np.zeros(1001), 500.0), 64.0)
    assert len(y) == round(1001 * 64 / 500)
    assert len(resample(MonoSeries(np.zeros(100), 32.0), 64.0)) == 200


def test_resample_rejects_fractional_upsampling():
    with pytest.raises(ConfigError):
        resample(MonoSeries(np.zeros(100), 64.0), 100.0)
    with pytest.raises(ConfigError):
        resample(MonoSeries(np.zeros(100), 64.0), -1.0)


# --- CAR and baseline ------------------------------------------------------------

def test_car_definition():
    out = common_average_reference(MultiSeries([[1.0, 3.0], [2.0, 4.0]], 64.0))
    np.testing.assert_array_equal(out.samples, [[-1, 1], [-1, 1]])


def test_car_idempotent_and_zero_mean(rng):
    x = MultiSeries(rng.standard_normal((100, 20)), 64.0)
    once = common_average_reference(x)
    rms = np.sqrt(np.mean(x.samples ** 2))
    # recompute the per-sample mean directly
    means = np.array([sum(row) / row.size for row in once.samples])
    assert np.max(np.abs(means)) < 1e-9 * rms
    np.testing.assert_allclose(common_average_reference(once).samples, once.samples, atol=1e-15)


def test_car_single_channel():
    with pytest.raises(ConfigError):
        common_average_reference(MultiSeries(np.zeros((10, 1)), 64.0))


def test_baseline(rng):
    np.testing.assert_array_equal(baseline_correct(MonoSeries([1.0, 1.0, 1.0], 1.0)).samples,
                                  [0, 0, 0])
    z = MonoSeries([1.0, -1.0, 2.0, -2.0], 1.0)
    np.testing.assert_array_equal(baseline_correct(z).samples, z.samples)
    x = rng.standard_normal(1000) + 4.0
    y = baseline_correct(MonoSeries(x, 1.0)).samples
    assert abs(y.mean()) < 1e-12 * np.sqrt(np.mean(y ** 2))


# --- envelope -----------------------------------------------------------------

def test_hilbert_sine_amplitude():
    fs = 1000.0
    t = np.arange(4000) / fs
    env = hilbert_envelope(MonoSeries(2.5 * np.sin(2 * np.pi * 50 * t), fs)).samples
    assert np.max(np.abs(env[400:-400] - 2.5)) < 0.02 * 2.5


def test_hilbert_am_tone():
    fs = 8000.0
    t = np.arange(int(2 * fs)) / fs
    a = 1.0 + 0.5 * np.sin(2 * np.pi * 3 * t)
    env = hilbert_envelope(MonoSeries(a * np.sin(2 * np.pi * 400 * t), fs)).samples
    sl = slice(int(0.2 * fs), int(1.8 * fs))
    assert np.max(np.abs(env[sl] - a[sl]) / a[sl]) < 0.05


def test_hilbert_zero_exponent_and_length():
    assert not np.any(hilbert_envelope(MonoSeries(np.zeros(64), 64.0)).samples)
    x = MonoSeries(np.sin(np.arange(256) * 0.3), 64.0)
    np.testing.assert_allclose(hilbert_envelope(x, 0.5).samples,
                               hilbert_envelope(x).samples ** 0.5)
    with pytest.raises(DataError):
        hilbert_envelope(MonoSeries(np.ones(8), 64.0))
    with pytest.raises(ConfigError):
        hilbert_envelope(x, 0.0)


# --- chain -------------------------------------------------------------------

def test_chain_500hz_ear_eeg(rng):
    fs = 500.0
    x = MultiSeries(rng.standard_normal((int(20 * fs), 20)), fs)
    y = preprocess_chain(x)
    assert y.fs == 64.0 and y.samples.shape == (1280, 20)
    assert np.max(np.abs(y.samples.mean(axis=1))) < 1e-9
    f, p = sps.periodogram(y.samples, fs=64.0, axis=0)
    band = (f >= 1) & (f <= 10)
    assert p[band].sum() / p.sum() > 0.9


def test_chain_without_car_is_filter_plus_baseline(rng):
    x = MultiSeries(rng.standard_normal((640, 3)), 64.0)
    y = preprocess_chain(x, car=False)
    sos = design_bandpass(BandpassSpec(2, 8, 4), 64.0)
    np.testing.assert_allclose(y.samples, baseline_correct(filtfilt(x, sos)).samples)


def test_envelope_path():
    fs = 8000.0
    t = np.arange(int(4 * fs)) / fs
    a = 1.0 + 0.5 * np.sin(2 * np.pi * 4 * t)
    env = preprocess_envelope(MonoSeries(a * np.sin(2 * np.pi * 500 * t), fs))
    assert env.fs == 64.0 and len(env) == 256
    ref = 0.5 * np.sin(2 * np.pi * 4 * np.arange(256) / 64.0)
    assert np.corrcoef(env.samples[32:-32], ref[32:-32])[0, 1] > 0.99
