"""Sampled-signal containers and the EEG / envelope preprocessing chain.

All functions are pure: they return new series and never modify inputs.
Sample arrays held by the containers are made read-only on construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import TypeVar, Union

import numpy as np
from scipy import signal as sps

from .errors import ConfigError, DataError

__all__ = [
    "MonoSeries",
    "MultiSeries",
    "BandpassSpec",
    "design_bandpass",
    "filtfilt",
    "resample",
    "common_average_reference",
    "baseline_correct",
    "hilbert_envelope",
    "preprocess_chain",
    "preprocess_envelope",
    "DEFAULT_BAND",
    "DEFAULT_TARGET_FS",
]

DEFAULT_TARGET_FS = 64.0


def _frozen_array(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise DataError(f"expected a {ndim}-D sample array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise DataError(f"non-finite sample at index {tuple(int(i) for i in bad)}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class MonoSeries:
    """A single uniformly sampled signal, e.g. a speech envelope."""

    samples: np.ndarray
    fs: float

    def __post_init__(self):
        if not np.isfinite(self.fs) or self.fs <= 0:
            raise ConfigError(f"sampling rate must be positive, got {self.fs}")
        object.__setattr__(self, "samples", _frozen_array(self.samples, 1))
        object.__setattr__(self, "fs", float(self.fs))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return len(self) / self.fs

    def with_samples(self, samples, fs: float | None = None) -> "MonoSeries":
        return MonoSeries(samples, self.fs if fs is None else fs)

    def segment(self, start: int, stop: int) -> "MonoSeries":
        return MonoSeries(self.samples[start:stop], self.fs)


@dataclass(frozen=True)
class MultiSeries:
    """Multichannel signal, time-major (T rows x N channel columns)."""

    samples: np.ndarray
    fs: float
    channels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if not np.isfinite(self.fs) or self.fs <= 0:
            raise ConfigError(f"sampling rate must be positive, got {self.fs}")
        samples = _frozen_array(self.samples, 2)
        channels = tuple(str(c) for c in self.channels)
        if not channels:
            channels = tuple(f"C{i + 1}" for i in range(samples.shape[1]))
        if samples.shape[1] == 0:
            raise DataError("a MultiSeries needs at least one channel")
        if len(channels) != samples.shape[1]:
            raise ConfigError(
                f"{samples.shape[1]} sample columns but {len(channels)} channel labels"
            )
        if len(set(channels)) != len(channels):
            raise ConfigError("channel labels must be unique")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "fs", float(self.fs))
        object.__setattr__(self, "channels", channels)

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def n_channels(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return len(self) / self.fs

    def with_samples(self, samples, fs: float | None = None) -> "MultiSeries":
        return MultiSeries(samples, self.fs if fs is None else fs, self.channels)

    def segment(self, start: int, stop: int) -> "MultiSeries":
        return MultiSeries(self.samples[start:stop], self.fs, self.channels)

    def channel(self, label: str) -> MonoSeries:
        return MonoSeries(self.samples[:, self.channels.index(label)], self.fs)


Series = Union[MonoSeries, MultiSeries]
S = TypeVar("S", MonoSeries, MultiSeries)


@dataclass(frozen=True)
class BandpassSpec:
    """Pass band edges in Hz and the order of a single (one-pass) Butterworth."""

    low_hz: float
    high_hz: float
    order: int = 4

    def check(self, fs: float) -> None:
        if int(self.order) != self.order or self.order < 1:
            raise ConfigError(f"filter order must be a positive integer, got {self.order}")
        if not (0 < self.low_hz < self.high_hz < fs / 2):
            raise ConfigError(
                f"band edges must satisfy 0 < low < high < fs/2 "
                f"(got {self.low_hz}, {self.high_hz} at fs={fs})"
            )


DEFAULT_BAND = BandpassSpec(2.0, 8.0, 4)


def design_bandpass(spec: BandpassSpec, fs: float) -> np.ndarray:
    """Butterworth band-pass in second-order sections.

    Returns an ``(n_sections, 6)`` SOS array; each band-pass section
    contributes two poles, so the filter order is ``2 * spec.order``.
    """
    spec.check(fs)
    return sps.butter(spec.order, [spec.low_hz, spec.high_hz], btype="bandpass",
                      fs=fs, output="sos")


def _filter_order(sos: np.ndarray) -> int:
    return 2 * sos.shape[0]


def filtfilt(x: S, coeffs: np.ndarray) -> S:
    """Zero-phase forward-backward filtering along time.

    The signal is extended by odd-symmetric reflection of ``3 * order``
    samples at both ends. Each second-order section is then run forward
    and backward with Gustafsson initial conditions, which makes the
    operation commute exactly with time reversal.
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=np.float64))
    pad = 3 * _filter_order(coeffs)
    data = x.samples
    n = data.shape[0]
    if n <= pad:
        raise DataError(f"signal of {n} samples is too short for padding of {pad}")
    head = 2 * data[:1] - data[pad:0:-1]
    tail = 2 * data[-1:] - data[-2:-pad - 2:-1]
    ext = np.concatenate([head, data, tail], axis=0)
    for sec in coeffs:
        ext = sps.filtfilt(sec[:3], sec[3:], ext, axis=0, method="gust")
    return x.with_samples(ext[pad:pad + n])


def _rational_ratio(fs: float, target_fs: float) -> tuple[int, int]:
    ratio = Fraction(target_fs).limit_denominator(100_000) / Fraction(fs).limit_denominator(100_000)
    ratio = ratio.limit_denominator(100_000)
    if abs(float(ratio) - target_fs / fs) > 1e-9 * (target_fs / fs):
        raise ConfigError(f"cannot express {fs} -> {target_fs} Hz as a rational ratio")
    return ratio.numerator, ratio.denominator


def _polyphase_taps(up: int, down: int) -> np.ndarray:
    """Kaiser-windowed low-pass whose every polyphase branch has unit DC gain.

    The stock design leaves a few parts per million of DC ripple between
    output phases; renormalizing each branch (taps congruent modulo ``up``)
    removes it so constant inputs come out constant.
    """
    rate = max(up, down)
    h = sps.firwin(2 * 10 * rate + 1, 1.0 / rate, window=("kaiser", 5.0))
    for phase in range(up):
        h[phase::up] /= up * h[phase::up].sum()
    return h


def resample(x: S, target_fs: float) -> S:
    """Polyphase rational-ratio resampling.

    Downsampling assumes the input is already band-limited below
    ``target_fs / 2``. Upsampling is only supported by integer factors.
    """
    if not np.isfinite(target_fs) or target_fs <= 0:
        raise ConfigError(f"target rate must be positive, got {target_fs}")
    if target_fs == x.fs:
        return x.with_samples(x.samples)
    up, down = _rational_ratio(x.fs, target_fs)
    if up > down and down != 1:
        raise ConfigError(f"unsupported non-integer upsampling ratio {up}/{down}")
    n_in = x.samples.shape[0]
    n_out = int(round(n_in * up / down))
    if n_out < 1:
        raise DataError("signal too short to resample")
    out = sps.resample_poly(x.samples, up, down, axis=0, window=_polyphase_taps(up, down),
                            padtype="line")
    return x.with_samples(out[:n_out], fs=target_fs)


def common_average_reference(eeg: MultiSeries) -> MultiSeries:
    if eeg.n_channels < 2:
        raise ConfigError("common average reference needs at least two channels")
    data = eeg.samples
    return eeg.with_samples(data - data.mean(axis=1, keepdims=True))


def baseline_correct(eeg: S) -> S:
    """Subtract each channel's mean over the whole trial."""
    if len(eeg) == 0:
        raise DataError("cannot baseline-correct an empty series")
    return eeg.with_samples(eeg.samples - eeg.samples.mean(axis=0))


def hilbert_envelope(audio: MonoSeries, exponent: float = 1.0) -> MonoSeries:
    """Magnitude of the analytic signal, optionally power-law compressed.

    The analytic signal is built in the frequency domain (one-sided
    spectrum). ``exponent`` < 1 gives the compressed envelopes common in
    the speech-tracking literature.
    """
    if len(audio) < 16:
        raise DataError("need at least 16 samples for envelope extraction")
    if exponent <= 0:
        raise ConfigError("envelope exponent must be positive")
    env = np.abs(sps.hilbert(audio.samples))
    if exponent != 1.0:
        env = env ** exponent
    return audio.with_samples(env)


def preprocess_chain(eeg: MultiSeries, band: BandpassSpec = DEFAULT_BAND,
                     target_fs: float = DEFAULT_TARGET_FS, car: bool = True) -> MultiSeries:
    """CAR (optional) -> zero-phase band-pass -> demean -> resample."""
    out = common_average_reference(eeg) if car else eeg
    out = filtfilt(out, design_bandpass(band, out.fs))
    out = baseline_correct(out)
    return resample(out, target_fs)


def preprocess_envelope(audio: MonoSeries, band: BandpassSpec = DEFAULT_BAND,
                        target_fs: float = DEFAULT_TARGET_FS,
                        exponent: float = 1.0) -> MonoSeries:
    """Envelope path: analytic envelope -> same band-pass -> resample."""
    env = hilbert_envelope(audio, exponent)
    env = filtfilt(env, design_bandpass(band, env.fs))
    return resample(env, target_fs)
