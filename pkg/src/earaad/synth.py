"""Synthetic four-speaker trials with known forward kernels.

EEG is generated by the linear forward model: each candidate envelope is
convolved with a per-channel kernel (stronger for the attended stream), the
four contributions are summed and observation noise is added at a requested
SNR. Because the kernels are known, every estimator in the package can be
checked against ground truth.

Randomness uses numpy's Philox counter-based generator. Each draw is keyed
by ``SeedSequence([seed, subject, trial, purpose])`` so any trial can be
regenerated on its own, on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .decoder import DEFAULT_AZIMUTHS, Trial
from .errors import ConfigError
from .layouts import ear_channel_names
from .linmodel import LagConfig
from .signals import BandpassSpec, MonoSeries, MultiSeries, design_bandpass, filtfilt

__all__ = ["SynthConfig", "SynthTruth", "generate_envelope", "generate_trial",
           "generate_dataset", "subject_kernels", "channel_names", "rng_for"]

_PURPOSE_TRIAL = 0
_PURPOSE_KERNEL = 1
_PURPOSE_ENVELOPE = 2
_MASK64 = (1 << 64) - 1

ENVELOPE_BAND = BandpassSpec(1.0, 10.0, 4)
ENVELOPE_OFFSET_SD = 5.0


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    """Philox generator keyed by ``seed`` and any number of integer ids."""
    entropy = [int(seed) & _MASK64] + [int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class SynthConfig:
    n_subjects: int = 16
    trials_per_subject: int = 10
    trial_length_s: float = 60.0
    fs: float = 64.0
    n_channels: int = 20
    n_distal_channels: int = 0
    attended_gain: float = 1.5
    unattended_gain: float = 1.0
    kernel_latency_ms: float = 150.0
    kernel_width_ms: float = 60.0
    snr_db: float = 0.0
    seed: int = 0
    noise: str = "white"
    lag_min_ms: float = -50.0
    lag_max_ms: float = 450.0

    def __post_init__(self):
        if self.attended_gain <= 0 or self.unattended_gain <= 0:
            raise ConfigError("stream gains must be positive")
        if not np.isfinite(self.snr_db):
            raise ConfigError("snr_db must be finite")
        if self.n_subjects < 1 or self.trials_per_subject < 1 or self.n_channels < 1:
            raise ConfigError("subject, trial and channel counts must be positive")
        if self.n_distal_channels < 0:
            raise ConfigError("n_distal_channels must be nonnegative")
        if self.trial_length_s < 1:
            raise ConfigError("trials must last at least 1 s")
        if self.noise not in ("white", "pink"):
            raise ConfigError(f"noise must be 'white' or 'pink', got {self.noise!r}")

    @property
    def lags(self) -> LagConfig:
        return LagConfig(self.lag_min_ms, self.lag_max_ms, self.fs)

    def with_(self, **changes) -> "SynthConfig":
        return replace(self, **changes)


@dataclass(frozen=True)
class SynthTruth:
    """Ground truth behind one synthetic trial."""

    kernels: np.ndarray  # (4 streams, n_lags, n_channels)
    lag_axis_ms: np.ndarray
    clean: np.ndarray  # noiseless EEG, (T, n_channels)
    noise: np.ndarray  # (T, n_channels)


def channel_names(config: SynthConfig) -> tuple[str, ...]:
    if config.n_channels == 20:
        names = ear_channel_names()
    else:
        names = tuple(f"E{i}" for i in range(1, config.n_channels + 1))
    return names + tuple(f"D{i}" for i in range(1, config.n_distal_channels + 1))


def generate_envelope(length_s: float, fs: float, seed) -> MonoSeries:
    """Speech-like surrogate envelope: nonnegative, unit RMS, mostly 1-10 Hz.

    ``seed`` is an int or a ``numpy.random.Generator``.
    """
    if length_s < 1:
        raise ConfigError("envelope must last at least 1 s")
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed, _PURPOSE_ENVELOPE)
    n = int(round(length_s * fs))
    raw = MonoSeries(np.abs(rng.standard_normal(n)), fs)
    ac = filtfilt(raw, design_bandpass(ENVELOPE_BAND, fs)).samples
    ac = ac - ac.mean()
    # a fixed offset keeps the AC share of every envelope the same, so stream
    # gains alone set each stream's contribution to the EEG
    env = ac + max(ENVELOPE_OFFSET_SD * ac.std(), -ac.min())
    env = env / np.sqrt(np.mean(env ** 2))
    return MonoSeries(env, fs)


def _base_kernel(config: SynthConfig) -> np.ndarray:
    lag_ms = config.lags.lag_axis_ms
    u = (lag_ms - config.kernel_latency_ms) / config.kernel_width_ms
    return np.exp(-0.5 * u ** 2) * np.cos(2 * np.pi * u / 4.0)


def _channel_amplitudes(config: SynthConfig, subject: int) -> np.ndarray:
    rng = rng_for(config.seed, subject, 0, _PURPOSE_KERNEL)
    amp = rng.uniform(0.8, 1.2, config.n_channels) * rng.choice([-1.0, 1.0], config.n_channels)
    return np.concatenate([amp, np.zeros(config.n_distal_channels)])


def subject_kernels(config: SynthConfig, subject: int) -> np.ndarray:
    """Unit-gain spatio-temporal kernel of one subject, shape (n_lags, n_channels).

    Every channel gets the same temporal shape with a random sign and a
    +/-20 % amplitude jitter; distal channels get zero.
    """
    return _base_kernel(config)[:, None] * _channel_amplitudes(config, subject)[None, :]


def _convolve_lags(s: np.ndarray, h: np.ndarray, tau_min: int) -> np.ndarray:
    # y(t) = sum_j h[j] * s(t - tau_min - j), zero outside the record
    full = np.convolve(s, h)
    idx = np.arange(s.size) - tau_min
    out = np.zeros(s.size)
    ok = (idx >= 0) & (idx < full.size)
    out[ok] = full[idx[ok]]
    return out


def _pink(rng: np.random.Generator, n: int, n_ch: int) -> np.ndarray:
    spec = rng.standard_normal((n // 2 + 1, n_ch)) + 1j * rng.standard_normal((n // 2 + 1, n_ch))
    f = np.arange(n // 2 + 1, dtype=float)
    f[0] = 1.0
    spec /= np.sqrt(f)[:, None]
    spec[0] = 0.0
    x = np.fft.irfft(spec, n=n, axis=0)
    return x / x.std(axis=0)


def generate_trial(config: SynthConfig, subject: int, trial_id: int) -> tuple[Trial, SynthTruth]:
    rng = rng_for(config.seed, subject, trial_id, _PURPOSE_TRIAL)
    attended = int(rng.integers(0, 4))
    envelopes = [generate_envelope(config.trial_length_s, config.fs, rng) for _ in range(4)]
    gains = np.full(4, config.unattended_gain)
    gains[attended] = config.attended_gain
    temporal = _base_kernel(config)
    spatial = _channel_amplitudes(config, subject)
    kernels = gains[:, None, None] * (temporal[:, None] * spatial[None, :])[None]
    tau_min = config.lags.tau_min
    n = len(envelopes[0])
    drive = sum(g * _convolve_lags(e.samples, temporal, tau_min) for g, e in zip(gains, envelopes))
    clean = drive[:, None] * spatial[None, :]

    n_ch = clean.shape[1]
    informative = clean[:, :config.n_channels]
    power = float(np.mean(informative.var(axis=0)))
    noise_sd = np.sqrt(power / 10 ** (config.snr_db / 10.0))
    if config.noise == "white":
        unit = rng.standard_normal((n, n_ch))
    else:
        unit = _pink(rng, n, n_ch)
    noise = noise_sd * unit
    eeg = MultiSeries(clean + noise, config.fs, channel_names(config))
    trial = Trial(eeg, tuple(envelopes), attended, subject=f"S{subject + 1:02d}",
                  trial_id=f"T{trial_id + 1:02d}", azimuths=DEFAULT_AZIMUTHS)
    return trial, SynthTruth(kernels, config.lags.lag_axis_ms, clean, noise)


def generate_dataset(config: SynthConfig, with_truth: bool = False):
    """All trials of all subjects, subject-major order."""
    out = []
    for s in range(config.n_subjects):
        for t in range(config.trials_per_subject):
            trial, truth = generate_trial(config, s, t)
            out.append((trial, truth) if with_truth else trial)
    return out
