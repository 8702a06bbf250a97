"""Backward stimulus reconstruction and decision-window attention decoding.

A decoder ``g(tau, n)`` maps EEG to an envelope estimate
``s_hat(t) = sum_n sum_tau r(t + tau, n) g(tau, n)``. Attention is decoded
by correlating the estimate with each candidate speaker's envelope over a
decision window and picking the best match.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .errors import ConfigError, DataError, SchemaError, UndefinedCorrelationError
from .layouts import Layout, select_layout
from .linmodel import (DEFAULT_LAMBDA_GRID, GramBlock, LagConfig, contiguous_splits,
                       lag_matrix, select_lambda_blocks, solve_normal_equations)
from .signals import MonoSeries, MultiSeries

__all__ = [
    "Trial",
    "Decoder",
    "AccuracyRow",
    "AccuracyTable",
    "DEFAULT_WINDOWS_S",
    "DEFAULT_AZIMUTHS",
    "CHANCE_LEVEL",
    "pearson",
    "train_decoder",
    "reconstruct",
    "classify_window",
    "evaluate",
    "binomial_significance",
]

log = logging.getLogger(__name__)

DEFAULT_WINDOWS_S = (1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 60.0)
DEFAULT_AZIMUTHS = (30.0, -30.0, 90.0, -90.0)
CHANCE_LEVEL = 0.25
N_CANDIDATES = 4


@dataclass(frozen=True)
class Trial:
    """One listening trial: EEG plus the four competing speech envelopes."""

    eeg: MultiSeries
    candidates: tuple[MonoSeries, ...]
    attended_index: int
    subject: str = "S01"
    trial_id: str = "T00"
    azimuths: tuple[float, ...] = DEFAULT_AZIMUTHS

    def __post_init__(self):
        cands = tuple(self.candidates)
        if len(cands) != N_CANDIDATES:
            raise SchemaError(f"a trial needs exactly {N_CANDIDATES} candidates, got {len(cands)}")
        for c in cands:
            if c.fs != self.eeg.fs or len(c) != len(self.eeg):
                raise SchemaError("candidate envelopes must match the EEG's fs and length")
        if not 0 <= int(self.attended_index) < N_CANDIDATES:
            raise SchemaError(f"attended_index {self.attended_index} out of range")
        if len(self.azimuths) != N_CANDIDATES:
            raise SchemaError("one azimuth per candidate is required")
        object.__setattr__(self, "candidates", cands)
        object.__setattr__(self, "attended_index", int(self.attended_index))
        object.__setattr__(self, "subject", str(self.subject))
        object.__setattr__(self, "trial_id", str(self.trial_id))
        object.__setattr__(self, "azimuths", tuple(float(a) for a in self.azimuths))

    @property
    def attended(self) -> MonoSeries:
        return self.candidates[self.attended_index]

    @property
    def fs(self) -> float:
        return self.eeg.fs

    def with_eeg(self, eeg: MultiSeries) -> "Trial":
        return Trial(eeg, self.candidates, self.attended_index, self.subject,
                     self.trial_id, self.azimuths)


@dataclass(frozen=True)
class Decoder:
    """Backward spatio-temporal filter ``weights[lag, channel]``."""

    weights: np.ndarray
    lag_axis_ms: np.ndarray
    channels: tuple[str, ...]
    lam: float
    fs: float
    subject: str | None = None
    folds_used: int = 0
    lambda_scores: tuple[float, ...] = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        lag = np.asarray(self.lag_axis_ms, dtype=np.float64)
        if w.shape != (lag.size, len(self.channels)):
            raise ConfigError(f"weights shape {w.shape} does not match "
                              f"({lag.size} lags, {len(self.channels)} channels)")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "lag_axis_ms", lag)
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def taus(self) -> np.ndarray:
        return np.rint(self.lag_axis_ms * self.fs / 1000.0).astype(int)


def pearson(a: MonoSeries | np.ndarray, b: MonoSeries | np.ndarray) -> float:
    """Sample Pearson correlation; raises for constant input."""
    x = np.asarray(getattr(a, "samples", a), dtype=np.float64)
    y = np.asarray(getattr(b, "samples", b), dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ConfigError("pearson needs two 1-D series of equal length")
    if x.size < 2:
        raise DataError("pearson needs at least two samples")
    x = x - x.mean()
    y = y - y.mean()
    sxx = float(x @ x)
    syy = float(y @ y)
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation is undefined for a constant series")
    r = float(x @ y) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def _check_channels(decoder: Decoder, eeg: MultiSeries) -> None:
    if eeg.channels != decoder.channels:
        raise SchemaError("EEG channels do not match the decoder's channels "
                          "(reorder with select_layout first)")
    if eeg.fs != decoder.fs:
        raise ConfigError(f"EEG fs {eeg.fs} differs from decoder fs {decoder.fs}")


def _lag_sum(proj: np.ndarray, taus: np.ndarray, start: int, stop: int) -> np.ndarray:
    # proj[t, k] = sum_n r(t, n) g(tau_k, n); out(t) = sum_k proj[t + tau_k, k]
    # with t and t + tau_k both inside [start, stop)
    n = stop - start
    out = np.zeros(n)
    for k, tau in enumerate(taus):
        lo = max(0, -tau)
        hi = min(n, n - tau)
        if lo < hi:
            out[lo:hi] += proj[start + lo + tau:start + hi + tau, k]
    return out


def reconstruct(decoder: Decoder, eeg: MultiSeries) -> MonoSeries:
    """Envelope estimate from EEG; samples beyond either edge count as zero."""
    _check_channels(decoder, eeg)
    proj = eeg.samples @ decoder.weights.T
    return MonoSeries(_lag_sum(proj, decoder.taus, 0, len(eeg)), eeg.fs)


@dataclass
class _TrialStats:
    X: np.ndarray
    y: np.ndarray
    gram: np.ndarray
    cross: np.ndarray

    @classmethod
    def build(cls, trial: Trial, taus: np.ndarray) -> "_TrialStats":
        # per-trial centering stands in for an intercept term
        eeg = trial.eeg.samples - trial.eeg.samples.mean(axis=0)
        X = lag_matrix(eeg, taus, "backward")
        y = (trial.attended.samples - trial.attended.samples.mean())[:, None]
        return cls(X, y, X.T @ X, X.T @ y)

    def block(self) -> GramBlock:
        return GramBlock([(self.X, self.y)], self.gram, self.cross)


def _check_consistent(trials: Sequence[Trial]) -> None:
    if not trials:
        raise DataError("no trials given")
    ref = trials[0].eeg
    for t in trials[1:]:
        if t.eeg.channels != ref.channels:
            raise SchemaError(f"trial {t.subject}/{t.trial_id} has a different channel set")
        if t.eeg.fs != ref.fs:
            raise SchemaError(f"trial {t.subject}/{t.trial_id} has a different sampling rate")


def _fit(stats_list: Sequence[_TrialStats], lam, grid, folds: int):
    if lam is not None:
        gram = sum(s.gram for s in stats_list)
        cross = sum(s.cross for s in stats_list)
        return solve_normal_equations(gram, cross, float(lam)).weights, float(lam), (), 0
    if len(stats_list) >= 2:
        k = max(2, min(folds, len(stats_list)))
        blocks = [GramBlock.merge([stats_list[i].block() for i in range(s.start, s.stop)])
                  for s in contiguous_splits(len(stats_list), k)]
    else:
        only = stats_list[0]
        k = max(2, folds)
        blocks = [GramBlock.from_rows(only.X[s], only.y[s])
                  for s in contiguous_splits(only.X.shape[0], k)]
    best, scores = select_lambda_blocks(blocks, grid)
    total = GramBlock.merge(blocks)
    W = solve_normal_equations(total.gram, total.cross, best).weights
    return W, best, tuple(float(s) for s in scores), k


def _decoder_from_weights(W, lags: LagConfig, channels, lam, fs, subject, k, scores) -> Decoder:
    n_ch = len(channels)
    weights = W[:, 0].reshape(n_ch, lags.n_lags).T
    return Decoder(weights, lags.lag_axis_ms, channels, lam, fs, subject, k, scores)


def train_decoder(trials: Sequence[Trial], lags: LagConfig = LagConfig(),
                  lambda_grid: Iterable[float] = DEFAULT_LAMBDA_GRID, folds: int = 5,
                  lam: float | None = None) -> Decoder:
    """Fit a decoder reconstructing the attended envelope.

    Each trial's backward lag matrix is built separately (zero padding at
    trial edges) and the rows are stacked. With ``lam=None`` the ridge
    parameter is picked by contiguous-block cross-validation; blocks
    follow trial boundaries when there are at least two training trials.
    """
    trials = list(trials)
    _check_consistent(trials)
    lags = lags.at(trials[0].fs)
    taus = lags.taus
    stats_list = [_TrialStats.build(t, taus) for t in trials]
    W, best, scores, k = _fit(stats_list, lam, lambda_grid, folds)
    subjects = {t.subject for t in trials}
    subject = subjects.pop() if len(subjects) == 1 else None
    return _decoder_from_weights(W, lags, trials[0].eeg.channels, best, trials[0].fs,
                                 subject, k, scores)


def _window_bounds(trial: Trial, start_s: float, length_s: float) -> tuple[int, int]:
    if length_s < 1.0:
        raise ConfigError("decision windows must be at least 1 s long")
    start = int(round(start_s * trial.fs))
    n = int(round(length_s * trial.fs))
    if start < 0 or start + n > len(trial.eeg):
        raise ConfigError(f"window [{start_s}, {start_s + length_s}) s exceeds the trial")
    return start, start + n


def _choose(recon: np.ndarray, candidates: Sequence[np.ndarray]) -> tuple[int, np.ndarray]:
    if np.ptp(recon) == 0.0:
        raise UndefinedCorrelationError("reconstruction is constant over the window")
    scores = np.full(len(candidates), np.nan)
    for i, c in enumerate(candidates):
        try:
            scores[i] = pearson(recon, c)
        except UndefinedCorrelationError:
            pass
    if np.all(np.isnan(scores)):
        raise UndefinedCorrelationError("every candidate is constant over the window")
    # argmax on the first maximum: ties resolve to the lowest index
    return int(np.argmax(np.where(np.isnan(scores), -np.inf, scores))), scores


def classify_window(decoder: Decoder, trial: Trial, start_s: float,
                    length_s: float) -> tuple[int, np.ndarray]:
    """Pick the candidate whose envelope best matches the reconstruction.

    Only EEG inside the window is used. Returns ``(index, scores)``.
    """
    start, stop = _window_bounds(trial, start_s, length_s)
    _check_channels(decoder, trial.eeg)
    window = trial.eeg.samples[start:stop]
    proj = (window - window.mean(axis=0)) @ decoder.weights.T
    recon = _lag_sum(proj, decoder.taus, 0, stop - start)
    return _choose(recon, [c.samples[start:stop] for c in trial.candidates])


def binomial_significance(n_correct: int, n_windows: int, chance: float = CHANCE_LEVEL) -> float:
    """One-sided exact binomial p-value ``P[X >= n_correct]``."""
    if int(n_correct) != n_correct or int(n_windows) != n_windows:
        raise ConfigError("counts must be integers")
    if not 0 <= n_correct <= n_windows:
        raise ConfigError(f"need 0 <= n_correct <= n_windows, got {n_correct}/{n_windows}")
    if not 0.0 < chance < 1.0:
        raise ConfigError("chance level must lie in (0, 1)")
    if n_correct == 0:
        return 1.0
    return float(stats.binom.sf(int(n_correct) - 1, int(n_windows), chance))


@dataclass(frozen=True)
class AccuracyRow:
    subject: str
    fold: str
    window_s: float
    n_windows: int
    n_correct: int
    skipped_windows: int = 0

    def __post_init__(self):
        if not 0 <= self.n_correct <= self.n_windows or self.skipped_windows < 0:
            raise ConfigError(f"invalid counts {self.n_correct}/{self.n_windows} "
                              f"(skipped {self.skipped_windows})")

    @property
    def accuracy(self) -> float:
        return self.n_correct / self.n_windows if self.n_windows else float("nan")


CSV_HEADER = ("subject", "fold", "window_s", "n_windows", "n_correct", "accuracy",
              "skipped_windows")


@dataclass
class AccuracyTable:
    """Per (subject, fold, window length) decoding outcomes."""

    rows: list[AccuracyRow] = field(default_factory=list)
    chance: float = CHANCE_LEVEL

    def __post_init__(self):
        for r in self.rows:
            if not 0 <= r.n_correct <= r.n_windows:
                raise DataError(f"invalid counts in row {r}")
        self.rows = sorted(self.rows, key=lambda r: (r.subject, r.fold, r.window_s))

    @property
    def window_lengths(self) -> list[float]:
        return sorted({r.window_s for r in self.rows})

    @property
    def subjects(self) -> list[str]:
        return list(OrderedDict.fromkeys(r.subject for r in self.rows))

    def subject_accuracy(self, window_s: float) -> dict[str, float]:
        out = {}
        for subj in self.subjects:
            sel = [r for r in self.rows if r.subject == subj and r.window_s == window_s]
            n = sum(r.n_windows for r in sel)
            if n:
                out[subj] = sum(r.n_correct for r in sel) / n
        return out

    def mean_accuracy(self, window_s: float) -> float:
        acc = list(self.subject_accuracy(window_s).values())
        return float(np.mean(acc)) if acc else float("nan")

    def summary(self) -> list[dict]:
        """Mean and SD across subjects per window length, with a pooled binomial test."""
        out = []
        for w in self.window_lengths:
            acc = np.array(list(self.subject_accuracy(w).values()))
            sel = [r for r in self.rows if r.window_s == w]
            n = sum(r.n_windows for r in sel)
            k = sum(r.n_correct for r in sel)
            out.append({
                "window_s": w,
                "n_subjects": int(acc.size),
                "n_windows": n,
                "n_correct": k,
                "skipped_windows": sum(r.skipped_windows for r in sel),
                "mean_accuracy": float(acc.mean()) if acc.size else None,
                "sd_accuracy": float(acc.std(ddof=1)) if acc.size > 1 else 0.0,
                "p_value": binomial_significance(k, n, self.chance) if n else None,
            })
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow([r.subject, r.fold, f"{r.window_s:g}", r.n_windows, r.n_correct,
                             f"{r.accuracy:.6f}", r.skipped_windows])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "AccuracyTable":
        reader = csv.DictReader(io.StringIO(text))
        if tuple(reader.fieldnames or ()) != CSV_HEADER:
            raise DataError("unexpected accuracy CSV header")
        rows = [AccuracyRow(d["subject"], d["fold"], float(d["window_s"]), int(d["n_windows"]),
                            int(d["n_correct"]), int(d["skipped_windows"])) for d in reader]
        return cls(rows)


def _score_trial(decoder_w: np.ndarray, taus: np.ndarray, trial: Trial,
                 window_lengths_s: Sequence[float]) -> list[tuple[float, int, int, int]]:
    eeg = trial.eeg.samples
    proj = eeg @ decoder_w.T
    cands = [c.samples for c in trial.candidates]
    out = []
    for w in window_lengths_s:
        n = int(round(w * trial.fs))
        n_win = len(trial.eeg) // n
        correct = skipped = 0
        for i in range(n_win):
            start, stop = i * n, (i + 1) * n
            # centering the window EEG shifts its projection by a constant
            offset = eeg[start:stop].mean(axis=0) @ decoder_w.T
            recon = _lag_sum(proj - offset, taus, start, stop)
            try:
                chosen, _ = _choose(recon, [c[start:stop] for c in cands])
            except UndefinedCorrelationError:
                skipped += 1
                continue
            correct += chosen == trial.attended_index
        out.append((float(w), n_win - skipped, correct, skipped))
    return out


def evaluate(trials: Sequence[Trial], window_lengths_s: Sequence[float] = DEFAULT_WINDOWS_S,
             layout: Layout | None = None, lags: LagConfig = LagConfig(),
             lambda_grid: Iterable[float] = DEFAULT_LAMBDA_GRID, lam: float | None = None,
             folds: int = 5, subject_specific: bool = True) -> AccuracyTable:
    """Leave-one-trial-out decoding accuracy per subject and window length.

    For every held-out trial a decoder is trained on the remaining trials
    (of the same subject unless ``subject_specific`` is false), the held-out
    trial is cut into non-overlapping windows (a trailing partial window is
    dropped) and each window is classified. Windows whose reconstruction is
    constant are counted as skipped rather than scored.
    """
    trials = [t.with_eeg(select_layout(t.eeg, layout)) for t in trials]
    _check_consistent(trials)
    window_lengths_s = [float(w) for w in window_lengths_s]
    if not window_lengths_s:
        raise ConfigError("no window lengths given")
    shortest = min(t.eeg.duration for t in trials)
    if max(window_lengths_s) > shortest + 1e-9:
        raise ConfigError(f"window of {max(window_lengths_s)} s exceeds shortest trial "
                          f"({shortest:.3f} s)")
    if min(window_lengths_s) < 1.0:
        raise ConfigError("decision windows must be at least 1 s long")
    by_subject: "OrderedDict[str, list[int]]" = OrderedDict()
    for i, t in enumerate(trials):
        by_subject.setdefault(t.subject, []).append(i)
    for subj, idx in by_subject.items():
        if len(idx) < 2:
            raise ConfigError(f"subject {subj} has fewer than two trials")

    lags = lags.at(trials[0].fs)
    taus = lags.taus
    cache = [_TrialStats.build(t, taus) for t in trials]
    channels = trials[0].eeg.channels
    rows = []
    for subj, idx in by_subject.items():
        for held in idx:
            pool = idx if subject_specific else range(len(trials))
            train = [cache[i] for i in pool if i != held]
            W, best, _, _ = _fit(train, lam, lambda_grid, folds)
            weights = W[:, 0].reshape(len(channels), lags.n_lags).T
            log.debug("subject %s fold %s lambda %g", subj, trials[held].trial_id, best)
            for w, n_ok, k, skipped in _score_trial(weights, taus, trials[held],
                                                    window_lengths_s):
                rows.append(AccuracyRow(subj, trials[held].trial_id, w, n_ok, k, skipped))
    return AccuracyTable(rows)
