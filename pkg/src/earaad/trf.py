"""Forward temporal response functions (envelope -> EEG) and their contrast."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError
from .linmodel import LagConfig, build_lag_matrix, lag_matrix, pearson_columns, ridge_solve
from .signals import MonoSeries, MultiSeries

__all__ = ["Trf", "TrfContrast", "estimate_trf", "predict_response", "contrast_trfs",
           "PEAK_WINDOW_MS"]

PEAK_WINDOW_MS = (50.0, 300.0)


@dataclass(frozen=True)
class Trf:
    """Channel-specific forward filters, ``weights[lag, channel]``."""

    weights: np.ndarray
    lag_axis_ms: np.ndarray
    channels: tuple[str, ...]
    lam: float
    fs: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        lag = np.asarray(self.lag_axis_ms, dtype=np.float64)
        if w.ndim != 2 or w.shape != (lag.size, len(self.channels)):
            raise ConfigError(f"weights shape {w.shape} does not match "
                              f"({lag.size} lags, {len(self.channels)} channels)")
        if lag.size > 1 and np.any(np.diff(lag) <= 0):
            raise ConfigError("lag axis must be strictly increasing")
        if not np.all(np.isfinite(w)):
            raise DataError("TRF weights must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lag_axis_ms", lag)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def taus(self) -> np.ndarray:
        return np.rint(self.lag_axis_ms * self.fs / 1000.0).astype(int)

    def peak(self, window_ms: tuple[float, float] = PEAK_WINDOW_MS) -> float:
        """Largest absolute weight inside ``window_ms`` across all channels."""
        return float(self.channel_peaks(window_ms).max())

    def channel_peaks(self, window_ms: tuple[float, float] = PEAK_WINDOW_MS) -> np.ndarray:
        sel = (self.lag_axis_ms >= window_ms[0]) & (self.lag_axis_ms <= window_ms[1])
        if not np.any(sel):
            raise ConfigError(f"no lags inside the peak window {window_ms}")
        return np.abs(self.weights[sel]).max(axis=0)

    def to_dict(self) -> dict:
        return {
            "fs": self.fs,
            "lambda": self.lam,
            "lag_axis_ms": [float(v) for v in self.lag_axis_ms],
            "channels": list(self.channels),
            "weights": [[float(v) for v in row] for row in self.weights],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trf":
        return cls(np.array(d["weights"], dtype=np.float64), np.array(d["lag_axis_ms"]),
                   tuple(d["channels"]), float(d["lambda"]), float(d["fs"]))


def _mean_trf(trfs: Sequence[Trf]) -> Trf:
    first = trfs[0]
    for t in trfs[1:]:
        if t.channels != first.channels or not np.array_equal(t.lag_axis_ms, first.lag_axis_ms):
            raise ConfigError("TRFs to be averaged must share lag axis and channels")
    w = np.mean([t.weights for t in trfs], axis=0)
    return Trf(w, first.lag_axis_ms, first.channels, first.lam, first.fs)


def estimate_trf(envelope: MonoSeries, eeg: MultiSeries, lags: LagConfig,
                 lam: float = 1e-2) -> Trf:
    """Ridge estimate of the forward model ``r(t, n) = sum_tau w(tau, n) s(t - tau)``."""
    if envelope.fs != eeg.fs:
        raise ConfigError("envelope and EEG sampling rates differ")
    if len(envelope) != len(eeg):
        raise ConfigError("envelope and EEG lengths differ")
    X = build_lag_matrix(envelope, lags.at(eeg.fs), "forward")
    sol = ridge_solve(X, eeg.samples, lam)
    return Trf(sol.weights, lags.at(eeg.fs).lag_axis_ms, eeg.channels, lam, eeg.fs)


def predict_response(trf: Trf, envelope: MonoSeries, observed: MultiSeries | None = None):
    """Forward-convolve ``envelope`` with ``trf``.

    Returns ``(prediction, r)`` where ``r`` holds per-channel Pearson
    correlations against ``observed`` (``None`` when no observation given).
    """
    if envelope.fs != trf.fs:
        raise ConfigError("envelope fs does not match TRF fs")
    X = lag_matrix(envelope.samples, trf.taus, "forward")
    pred = MultiSeries(X @ trf.weights, trf.fs, trf.channels)
    if observed is None:
        return pred, None
    if observed.fs != trf.fs or observed.channels != trf.channels:
        raise ConfigError("observed EEG does not match the TRF's fs/channels")
    if len(observed) != len(envelope):
        raise ConfigError("observed EEG length differs from envelope")
    return pred, pearson_columns(pred.samples, observed.samples)


@dataclass
class TrfContrast:
    """Grand-average attended vs unattended TRFs.

    ``unattended`` averages the three ignored streams of each trial before
    averaging over trials; ``per_stream_unattended[k]`` averages the k-th
    ignored stream (in candidate order, attended one skipped).
    """

    attended: Trf
    unattended: Trf
    per_stream_unattended: list[Trf]
    n_trials: int
    window_ms: tuple[float, float] = PEAK_WINDOW_MS
    trial_attended_peaks: np.ndarray = field(default_factory=lambda: np.empty(0))
    trial_unattended_peaks: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def attended_peak(self) -> float:
        return self.attended.peak(self.window_ms)

    @property
    def unattended_peak(self) -> float:
        return self.unattended.peak(self.window_ms)

    @property
    def per_stream_peaks(self) -> list[float]:
        return [t.peak(self.window_ms) for t in self.per_stream_unattended]

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "peak_window_ms": list(self.window_ms),
            "attended_peak": self.attended_peak,
            "unattended_peak": self.unattended_peak,
            "per_stream_unattended_peaks": self.per_stream_peaks,
            "attended": self.attended.to_dict(),
            "unattended": self.unattended.to_dict(),
            "per_stream_unattended": [t.to_dict() for t in self.per_stream_unattended],
        }


def contrast_trfs(items, window_ms: tuple[float, float] = PEAK_WINDOW_MS) -> TrfContrast:
    """Average per-stream TRFs into attended / unattended conditions.

    ``items`` is a sequence of ``(attended_index, [trf_0, ..., trf_3])``
    pairs; a :class:`~earaad.decoder.Trial` may stand in for the index.
    """
    items = list(items)
    if not items:
        raise DataError("no trials to contrast")
    attended, unattended, per_stream = [], [], [[], [], []]
    att_peaks, unatt_peaks = [], []
    for key, trfs in items:
        idx = getattr(key, "attended_index", key)
        trfs = list(trfs)
        if len(trfs) != 4 or not 0 <= idx < 4:
            raise ConfigError("each trial needs four stream TRFs and an index in 0..3")
        others = [t for k, t in enumerate(trfs) if k != idx]
        mean_other = _mean_trf(others)
        attended.append(trfs[idx])
        unattended.append(mean_other)
        for k, t in enumerate(others):
            per_stream[k].append(t)
        att_peaks.append(trfs[idx].peak(window_ms))
        unatt_peaks.append(np.mean([t.peak(window_ms) for t in others]))
    return TrfContrast(
        attended=_mean_trf(attended),
        unattended=_mean_trf(unattended),
        per_stream_unattended=[_mean_trf(s) for s in per_stream],
        n_trials=len(items),
        window_ms=window_ms,
        trial_attended_peaks=np.array(att_peaks),
        trial_unattended_peaks=np.array(unatt_peaks),
    )
