"""Differencing, scaling, splitting, windowing and spike encoding."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class SeriesError(ValueError):
    pass


@dataclass(frozen=True)
class DifferencedSeries:
    values: np.ndarray
    order: int
    anchors: np.ndarray  # first ``order`` values of the original series
    # exact rounding error of every subtraction, one array per stage; lets
    # undifference rebuild the original bit for bit
    residuals: tuple = ()


def _two_diff(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``a - b`` rounded, plus the error term that makes it exact (TwoSum)."""
    s = a - b
    bb = s - a
    return s, (a - (s - bb)) - (b + bb)


def difference(series, d: int) -> DifferencedSeries:
    """Apply first differencing ``d`` times, keeping what is needed to undo it."""
    x = np.asarray(series, dtype=float)
    if d < 0:
        raise SeriesError("difference order must be >= 0")
    if x.size <= d:
        raise SeriesError(f"series of length {x.size} too short for d={d}")
    out, residuals = x.copy(), []
    for _ in range(d):
        out, err = _two_diff(out[1:], out[:-1])
        residuals.append(err)
    return DifferencedSeries(out, d, x[:d].copy(), tuple(residuals))


def _running_sum(head: float, steps: np.ndarray, errs: np.ndarray | None) -> np.ndarray:
    """``head`` followed by its running sums with ``steps + errs``.

    The total is carried as an unevaluated pair (hi, lo), so each output is
    the correctly rounded partial sum rather than one that drifts with length.
    """
    out = np.empty(steps.size + 1)
    hi, lo = float(head), 0.0
    out[0] = hi
    extra = errs.tolist() if errs is not None else [0.0] * steps.size
    for i, (v, e) in enumerate(zip(steps.tolist(), extra), start=1):
        s = hi + v
        bb = s - hi
        lo += (hi - (s - bb)) + (v - bb) + e
        hi = s + lo
        lo -= hi - s
        out[i] = hi
    return out


def undifference(diff: DifferencedSeries) -> np.ndarray:
    d = diff.order
    if d == 0:
        return np.asarray(diff.values, dtype=float).copy()
    anchors = np.asarray(diff.anchors, dtype=float)
    if anchors.size != d:
        raise SeriesError(f"need {d} anchors, got {anchors.size}")
    residuals = diff.residuals or (None,) * d
    if len(residuals) != d:
        raise SeriesError(f"need {d} residual arrays, got {len(residuals)}")
    # heads[k] is the first value of the k-times differenced series; np.diff
    # repeats the forward pass's arithmetic, so these match it exactly
    heads = [np.diff(anchors, n=k)[0] for k in range(d)]
    out = np.asarray(diff.values, dtype=float)
    for k in reversed(range(d)):
        out = _running_sum(heads[k], out, residuals[k])
    return out


def seasonal_difference(x, lag: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size <= lag:
        raise SeriesError(f"series of length {x.size} too short for lag {lag}")
    return x[lag:] - x[:-lag]


@dataclass(frozen=True)
class ScalerParams:
    min: float
    max: float

    def __post_init__(self):
        if not self.max > self.min:
            raise SeriesError(f"degenerate scale: max {self.max} <= min {self.min}")

    @property
    def span(self) -> float:
        return self.max - self.min

    def apply(self, values) -> np.ndarray:
        return (np.asarray(values, dtype=float) - self.min) / self.span

    def invert(self, scaled) -> np.ndarray:
        return np.asarray(scaled, dtype=float) * self.span + self.min

    def invert_scale(self, scaled_spread) -> np.ndarray:
        """Map a spread (e.g. an error or a standard deviation) back to data units."""
        return np.asarray(scaled_spread, dtype=float) * self.span


def fit_minmax(values) -> ScalerParams:
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        raise SeriesError("need at least two values to fit a scaler")
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        raise SeriesError(f"degenerate scale: every value equals {lo}")
    return ScalerParams(lo, hi)


@dataclass(frozen=True)
class WindowedDataset:
    inputs: np.ndarray  # (n_samples, window_len)
    targets: np.ndarray  # (n_samples,)
    window_len: int

    def __len__(self) -> int:
        return self.targets.size

    def subset(self, idx) -> "WindowedDataset":
        idx = np.asarray(idx, dtype=int)
        return WindowedDataset(self.inputs[idx], self.targets[idx], self.window_len)


def make_windows(scaled, window_len: int) -> WindowedDataset:
    x = np.asarray(scaled, dtype=float)
    if window_len < 1:
        raise SeriesError("window_len must be >= 1")
    if x.size <= window_len:
        raise SeriesError(f"series of length {x.size} too short for window {window_len}")
    inputs = np.lib.stride_tricks.sliding_window_view(x, window_len)[:-1].copy()
    return WindowedDataset(inputs, x[window_len:].copy(), window_len)


def split_80_20(n_samples: int, shuffle: bool = False, seed: int = 0):
    """Return ``(train_idx, test_idx)`` with ``floor(0.8 n)`` training indices.

    Chronological mode keeps the leading indices for training.  Shuffled mode
    permutes all indices with ``seed`` first.
    """
    if n_samples < 5:
        raise SeriesError(f"need at least 5 samples to split, got {n_samples}")
    n_train = math.floor(0.8 * n_samples)
    idx = np.arange(n_samples)
    if shuffle:
        idx = np.random.default_rng(seed).permutation(n_samples)
    return idx[:n_train], idx[n_train:]


@dataclass(frozen=True)
class SpikeTrainBatch:
    spikes: np.ndarray  # uint8, (n_samples, time_window, time_steps)
    binary_targets: np.ndarray  # uint8, (n_samples,)
    time_steps: int
    time_window: int

    def __len__(self) -> int:
        return self.binary_targets.size

    def subset(self, idx) -> "SpikeTrainBatch":
        idx = np.asarray(idx, dtype=int)
        return SpikeTrainBatch(
            self.spikes[idx], self.binary_targets[idx], self.time_steps, self.time_window
        )


def spike_times(values, time_steps: int) -> np.ndarray:
    """Time-to-first-spike index for each value: larger values fire earlier."""
    v = np.clip(np.asarray(values, dtype=float), 0.0, 1.0)
    # round-half-up; np.rint would send 7.5 to 8 but 6.5 to 6
    return np.floor((1.0 - v) * (time_steps - 1) + 0.5).astype(np.int64)


def encode_latency(windows: WindowedDataset, time_steps: int, threshold: float = 0.5) -> SpikeTrainBatch:
    if time_steps < 2:
        raise SeriesError("time_steps must be >= 2")
    n, w = windows.inputs.shape
    t = spike_times(windows.inputs, time_steps)
    spikes = np.zeros((n, w, time_steps), dtype=np.uint8)
    spikes[np.arange(n)[:, None], np.arange(w)[None, :], t] = 1
    labels = (windows.targets >= threshold).astype(np.uint8)
    return SpikeTrainBatch(spikes, labels, time_steps, w)
