"""Lagged design matrices and ridge-regularized least squares.

Forward (encoding) models regress EEG on delayed copies of a stimulus,
``x(t - tau)``; backward (decoding) models regress the stimulus on advanced
copies of the EEG, ``x(t + tau)``. Both share the same solver.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

from .errors import ConfigError, DataError, RankDeficientError
from .signals import MonoSeries, MultiSeries

__all__ = [
    "LagConfig",
    "DesignMatrix",
    "RidgeSolution",
    "DEFAULT_LAMBDA_GRID",
    "build_lag_matrix",
    "lag_matrix",
    "ridge_solve",
    "solve_normal_equations",
    "select_lambda",
    "select_lambda_blocks",
    "GramBlock",
    "pearson_columns",
]

DEFAULT_LAMBDA_GRID = (1e-6, 1e-4, 1e-2, 1.0, 1e2, 1e4, 1e6)


@dataclass(frozen=True)
class LagConfig:
    """Lag window in milliseconds at a given sampling rate.

    Integer lag indices are obtained by rounding ``ms * fs / 1000`` to the
    nearest sample; -50..450 ms at 64 Hz gives samples -3..29.
    """

    lag_min_ms: float = -50.0
    lag_max_ms: float = 450.0
    fs: float = 64.0

    def __post_init__(self):
        if not self.lag_min_ms < self.lag_max_ms:
            raise ConfigError("lag_min_ms must be smaller than lag_max_ms")
        if self.fs <= 0:
            raise ConfigError("fs must be positive")

    @property
    def tau_min(self) -> int:
        return int(round(self.lag_min_ms * self.fs / 1000.0))

    @property
    def tau_max(self) -> int:
        return int(round(self.lag_max_ms * self.fs / 1000.0))

    @property
    def taus(self) -> np.ndarray:
        return np.arange(self.tau_min, self.tau_max + 1)

    @property
    def n_lags(self) -> int:
        return self.tau_max - self.tau_min + 1

    @property
    def lag_axis_ms(self) -> np.ndarray:
        return self.taus * 1000.0 / self.fs

    def at(self, fs: float) -> "LagConfig":
        return LagConfig(self.lag_min_ms, self.lag_max_ms, fs)


@dataclass(frozen=True)
class DesignMatrix:
    """Lagged copies of one or more inputs, channel-major / lag-minor columns."""

    values: np.ndarray
    tau_min: int
    tau_max: int
    labels: tuple[str, ...]
    direction: str = "forward"

    @property
    def n_lags(self) -> int:
        return self.tau_max - self.tau_min + 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True)
class RidgeSolution:
    weights: np.ndarray
    lam: float
    lambda_scale: float


def lag_matrix(data: np.ndarray, taus: Sequence[int], direction: str = "forward") -> np.ndarray:
    """Raw-array version of :func:`build_lag_matrix`.

    ``data`` is ``(T,)`` or ``(T, n_inputs)``. Out-of-range samples are zero.
    """
    if direction not in ("forward", "backward"):
        raise ConfigError(f"direction must be 'forward' or 'backward', got {direction!r}")
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[:, None]
    n, n_in = data.shape
    taus = np.asarray(taus, dtype=int)
    out = np.zeros((n, n_in, taus.size))
    for k, tau in enumerate(taus):
        # forward column holds x(t - tau); backward holds x(t + tau)
        shift = tau if direction == "forward" else -tau
        if shift >= 0:
            if shift < n:
                out[shift:, :, k] = data[:n - shift]
        elif -shift < n:
            out[:n + shift, :, k] = data[-shift:]
    return out.reshape(n, n_in * taus.size)


def build_lag_matrix(x: MonoSeries | MultiSeries, lags: LagConfig,
                     direction: str = "forward") -> DesignMatrix:
    if x.fs != lags.fs:
        raise ConfigError(f"signal fs {x.fs} does not match lag config fs {lags.fs}")
    labels = x.channels if isinstance(x, MultiSeries) else ("x",)
    values = lag_matrix(x.samples, lags.taus, direction)
    return DesignMatrix(values, lags.tau_min, lags.tau_max, labels, direction)


def _as_array(X) -> np.ndarray:
    return X.values if isinstance(X, DesignMatrix) else np.asarray(X, dtype=np.float64)


def solve_normal_equations(gram: np.ndarray, cross: np.ndarray, lam: float,
                           scale: float | None = None) -> RidgeSolution:
    """Solve ``(G + lam * scale * I) W = C`` by Cholesky factorization.

    ``scale`` defaults to the mean of ``diag(G)``. One step of iterative
    refinement is applied.
    """
    if lam < 0 or not np.isfinite(lam):
        raise ConfigError(f"lambda must be finite and nonnegative, got {lam}")
    gram = np.asarray(gram, dtype=np.float64)
    cross = np.asarray(cross, dtype=np.float64)
    if scale is None:
        scale = float(np.mean(np.diag(gram)))
    if scale == 0.0 and lam > 0:
        # all-zero design: any positive penalty pins the weights to zero
        return RidgeSolution(np.zeros_like(cross), float(lam), scale)
    lam_eff = lam * scale
    A = gram + lam_eff * np.eye(gram.shape[0])
    try:
        factor = linalg.cho_factor(A, lower=False, check_finite=False)
    except linalg.LinAlgError:
        raise RankDeficientError(
            "normal equations are not positive definite; use lambda > 0") from None
    diag = np.abs(np.diag(factor[0]))
    if diag.size and diag.min() ** 2 <= np.finfo(float).eps * A.shape[0] * diag.max() ** 2:
        raise RankDeficientError("normal equations are numerically singular; use lambda > 0")
    W = linalg.cho_solve(factor, cross, check_finite=False)
    W = W + linalg.cho_solve(factor, cross - A @ W, check_finite=False)
    return RidgeSolution(W, float(lam), scale)


def ridge_solve(X, Y, lam: float) -> RidgeSolution:
    """Ridge regression with lambda normalized by the mean Gram diagonal.

    Minimizes ``||Y - X W||^2 + lam * mean(diag(X'X)) * ||W||^2``.
    """
    Xv = _as_array(X)
    Yv = np.asarray(Y, dtype=np.float64)
    squeeze = Yv.ndim == 1
    if squeeze:
        Yv = Yv[:, None]
    if Xv.shape[0] != Yv.shape[0]:
        raise ConfigError(f"X has {Xv.shape[0]} rows but Y has {Yv.shape[0]}")
    sol = solve_normal_equations(Xv.T @ Xv, Xv.T @ Yv, lam)
    if squeeze:
        return RidgeSolution(sol.weights[:, 0], sol.lam, sol.lambda_scale)
    return sol


def pearson_columns(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Pearson correlation; NaN where either column is constant."""
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    num = np.sum(a * b, axis=0)
    den = np.sqrt(np.sum(a * a, axis=0) * np.sum(b * b, axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        r = num / den
    return np.where(den > 0, r, np.nan)


@dataclass
class GramBlock:
    """Sufficient statistics of one cross-validation block.

    A block may span several row segments (e.g. whole trials); ``parts``
    keeps the raw ``(X, Y)`` pairs for held-out prediction.
    """

    parts: list
    gram: np.ndarray
    cross: np.ndarray

    @classmethod
    def from_rows(cls, X: np.ndarray, Y: np.ndarray) -> "GramBlock":
        if Y.ndim == 1:
            Y = Y[:, None]
        return cls([(X, Y)], X.T @ X, X.T @ Y)

    @classmethod
    def merge(cls, blocks: Sequence["GramBlock"]) -> "GramBlock":
        parts = [p for b in blocks for p in b.parts]
        return cls(parts, sum(b.gram for b in blocks), sum(b.cross for b in blocks))

    def predict(self, W: np.ndarray) -> np.ndarray:
        return np.vstack([X @ W for X, _ in self.parts])

    @property
    def Y(self) -> np.ndarray:
        return np.vstack([Y for _, Y in self.parts])


def select_lambda_blocks(blocks: Sequence[GramBlock], grid: Iterable[float]):
    """Leave-one-block-out lambda selection from precomputed block statistics.

    Returns ``(best_lambda, mean_scores)`` with scores in grid order. Ties
    (within 1e-12) go to the smaller lambda.
    """
    grid = [float(g) for g in grid]
    if not grid:
        raise ConfigError("lambda grid is empty")
    if len(blocks) < 2:
        raise ConfigError("need at least two blocks for cross-validation")
    total_gram = sum(b.gram for b in blocks)
    total_cross = sum(b.cross for b in blocks)
    scores = np.full((len(blocks), len(grid)), np.nan)
    for i, held in enumerate(blocks):
        held_Y = held.Y
        gram = total_gram - held.gram
        cross = total_cross - held.cross
        for j, lam in enumerate(grid):
            try:
                W = solve_normal_equations(gram, cross, lam).weights
            except RankDeficientError:
                continue
            r = pearson_columns(held.predict(W), held_Y)
            if np.any(np.isfinite(r)):
                scores[i, j] = np.nanmean(r)
    if np.all(np.isnan(scores)):
        raise DataError("every cross-validation score is undefined (constant target?)")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        mean_scores = np.nanmean(scores, axis=0)
    order = np.argsort(grid, kind="stable")
    best = None
    for j in order:
        s = mean_scores[j]
        if np.isnan(s):
            continue
        if best is None or s > mean_scores[best] + 1e-12:
            best = j
    return grid[best], mean_scores


def contiguous_splits(n: int, k: int) -> list[slice]:
    edges = np.linspace(0, n, k + 1).round().astype(int)
    return [slice(edges[i], edges[i + 1]) for i in range(k)]


def select_lambda(X, Y, grid: Iterable[float] = DEFAULT_LAMBDA_GRID, k_folds: int = 5):
    """k-fold lambda selection with contiguous (unshuffled) time blocks.

    Scores are held-out Pearson correlations averaged over outputs and
    folds. Returns ``(best_lambda, mean_scores)``.
    """
    Xv = _as_array(X)
    Yv = np.asarray(Y, dtype=np.float64)
    if Yv.ndim == 1:
        Yv = Yv[:, None]
    if k_folds < 2:
        raise ConfigError("k_folds must be at least 2")
    if Xv.shape[0] < k_folds:
        raise ConfigError("fewer rows than folds")
    if Xv.shape[0] != Yv.shape[0]:
        raise ConfigError("X and Y row counts differ")
    blocks = [GramBlock.from_rows(Xv[s], Yv[s]) for s in contiguous_splits(Xv.shape[0], k_folds)]
    return select_lambda_blocks(blocks, grid)
