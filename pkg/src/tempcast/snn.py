"""Feedforward spiking classifier with a leaky integrate-and-fire output node.

Each time step of a latency-coded sample feeds the spike column through
``relu(W1 x_t + b1)`` and ``W2 . + b2`` into one LIF membrane that persists
over the time steps.  The sample is classed 1 when the node fires on at
least half of the steps (optionally: at least once).  Training
backpropagates through the time loop with an arctan surrogate standing in
for the derivative of the hard threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .checkpoint import load_arrays, save_arrays
from .lstm import TrainConfig, TrainingError, validation_split
from .optim import Adam
from .series import SpikeTrainBatch


@dataclass(frozen=True)
class LifConfig:
    """Membrane and read-out settings.

    ``decision`` picks how spikes become a class: ``"rate"`` predicts 1 when
    the node fires on at least half of the time steps, matching the target
    the rate loss trains towards; ``"any"`` predicts 1 on a single spike.
    """

    threshold: float = 0.5
    beta: float = 0.9
    alpha: float = 2.0
    decision: str = "rate"

    def __post_init__(self):
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must lie in (0, 1)")
        if self.threshold <= 0:
            raise ValueError("threshold must be > 0")
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.decision not in ("rate", "any"):
            raise ValueError(f"unknown decision rule {self.decision!r}")

    def classify(self, spike_count, time_steps: int) -> np.ndarray:
        count = np.asarray(spike_count)
        if self.decision == "any":
            return (count >= 1).astype(np.uint8)
        return (count / time_steps >= 0.5).astype(np.uint8)


def lif_step(v, input_current, cfg: LifConfig = LifConfig()):
    """One leaky integrate-and-fire update with hard reset to zero."""
    v_pre = cfg.beta * np.asarray(v, dtype=float) + input_current
    spike = (v_pre >= cfg.threshold).astype(float)
    v_next = np.where(spike > 0, 0.0, v_pre)
    if np.ndim(v_next) == 0:
        return float(v_next), int(spike)
    return v_next, spike


def smooth_spike(v_pre, cfg: LifConfig = LifConfig()):
    """Arctan relaxation of the step function, ranging over (0, 1)."""
    x = math.pi * cfg.alpha * (np.asarray(v_pre, dtype=float) - cfg.threshold) / 2.0
    return np.arctan(x) / math.pi + 0.5


def surrogate_grad(v_pre, cfg: LifConfig = LifConfig()):
    x = math.pi * cfg.alpha * (np.asarray(v_pre, dtype=float) - cfg.threshold) / 2.0
    return cfg.alpha / (2.0 * (1.0 + x * x))


@dataclass
class SnnParams:
    W1: np.ndarray  # (hidden, time_window)
    b1: np.ndarray
    W2: np.ndarray  # (1, hidden)
    b2: np.ndarray  # (1,)

    @classmethod
    def init(cls, time_window: int, hidden: int = 64, seed: int = 0) -> "SnnParams":
        rng = np.random.default_rng(seed)
        k = 1.0 / math.sqrt(hidden)
        return cls(
            W1=rng.uniform(-k, k, (hidden, time_window)),
            b1=rng.uniform(-k, k, hidden),
            W2=rng.uniform(-k, k, (1, hidden)),
            b2=rng.uniform(-k, k, 1),
        )

    @classmethod
    def zeros(cls, time_window: int, hidden: int = 64) -> "SnnParams":
        return cls(np.zeros((hidden, time_window)), np.zeros(hidden), np.zeros((1, hidden)), np.zeros(1))

    @property
    def time_window(self) -> int:
        return self.W1.shape[1]

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "SnnParams":
        return SnnParams(**{k: v.copy() for k, v in self.arrays().items()})

    def save(self, path, meta: dict | None = None) -> None:
        save_arrays(self.arrays(), path, meta)

    @classmethod
    def load(cls, path) -> "SnnParams":
        arrays, _ = load_arrays(path)
        return cls(**arrays)


@dataclass(frozen=True)
class SpikeForecast:
    binary_prediction: np.ndarray
    spike_count: np.ndarray
    surrogate_rate: np.ndarray


def forward_snn(params: SnnParams, spikes, cfg: LifConfig = LifConfig(), smooth: bool = False):
    """Simulate a batch ``(n, time_window, time_steps)`` (or one sample).

    With ``smooth=True`` the hard threshold is replaced by :func:`smooth_spike`
    in the forward pass too, which makes the whole computation differentiable
    and lets finite differences check :func:`backward_snn`.
    """
    x = np.asarray(spikes, dtype=float)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3 or x.shape[1] != params.time_window:
        raise ValueError(f"expected (n, {params.time_window}, time_steps) spikes, got {np.shape(spikes)}")
    n, _, T = x.shape
    v = np.zeros(n)
    a1s, currents, v_pres, outs = [], [], [], []
    for t in range(T):
        a1 = x[:, :, t] @ params.W1.T + params.b1
        current = np.maximum(a1, 0.0) @ params.W2[0] + params.b2[0]
        v_pre = cfg.beta * v + current
        s = smooth_spike(v_pre, cfg) if smooth else (v_pre >= cfg.threshold).astype(float)
        v = v_pre * (1.0 - s)
        a1s.append(a1)
        v_pres.append(v_pre)
        outs.append(s)
    out = np.stack(outs, axis=1)  # (n, T)
    count = out.sum(axis=1)
    rate = count / T
    forecast = SpikeForecast(
        binary_prediction=cfg.classify(count, T),
        spike_count=count if smooth else count.astype(np.int64),
        surrogate_rate=rate,
    )
    return forecast, (x, np.stack(a1s, axis=1), np.stack(v_pres, axis=1), out, smooth)


def backward_snn(params: SnnParams, cache, drate, cfg: LifConfig = LifConfig()) -> dict[str, np.ndarray]:
    """Gradients of ``sum(drate * rate)`` by backpropagation through time.

    The spike's derivative with respect to the pre-reset membrane is always
    :func:`surrogate_grad`; in smooth mode that is the exact derivative.
    The reset ``v = v_pre * (1 - s)`` is differentiated through both factors.
    """
    x, a1, v_pre, s, _ = cache
    n, T = s.shape
    ds_direct = np.asarray(drate, dtype=float)[:, None] / T * np.ones((1, T))
    dcur = np.zeros((n, T))
    dv = np.zeros(n)  # gradient w.r.t. the post-reset membrane of step t
    for t in reversed(range(T)):
        sg = surrogate_grad(v_pre[:, t], cfg)
        ds = ds_direct[:, t] - dv * v_pre[:, t]
        dvp = dv * (1.0 - s[:, t]) + ds * sg
        dcur[:, t] = dvp
        dv = cfg.beta * dvp
    h = np.maximum(a1, 0.0)  # (n, T, hidden)
    dW2 = np.einsum("nt,nth->h", dcur, h)[None, :]
    db2 = np.array([dcur.sum()])
    da1 = dcur[:, :, None] * params.W2[0][None, None, :] * (a1 > 0)
    dW1 = np.einsum("nth,nwt->hw", da1, x)
    db1 = da1.sum(axis=(0, 1))
    return {"W1": dW1, "b1": db1, "W2": dW2, "b2": db2}


def rate_loss(params: SnnParams, batch: SpikeTrainBatch, cfg: LifConfig = LifConfig(), smooth: bool = False):
    """Mean squared error between firing rate and binary target, with gradients."""
    fc, cache = forward_snn(params, batch.spikes, cfg, smooth=smooth)
    err = fc.surrogate_rate - batch.binary_targets
    loss = float(np.mean(err * err))
    return loss, backward_snn(params, cache, 2.0 * err / err.size, cfg)


@dataclass
class SnnTrainResult:
    params: SnnParams
    history: list  # [(train_loss, val_loss)]


def train_snn(
    batch: SpikeTrainBatch,
    config: TrainConfig = TrainConfig(epochs=100, window_len=30),
    cfg: LifConfig = LifConfig(),
    hidden: int = 64,
    keep_best: bool = True,
) -> SnnTrainResult:
    """Minibatch Adam on :func:`rate_loss`.

    With ``keep_best`` the returned parameters are those of the epoch with
    the lowest validation loss (the hard-threshold loss surface is noisy, so
    the last epoch is often not the best one).
    """
    n = len(batch)
    if n == 0:
        raise ValueError("empty spike batch")
    tr_idx, va_idx = validation_split(n, config.validation_fraction)
    bs = min(config.batch_size, tr_idx.size)
    params = SnnParams.init(batch.time_window, hidden, config.seed)
    arrays = params.arrays()
    opt = Adam(lr=config.lr)
    rng = np.random.default_rng(config.seed + 1)
    val = batch.subset(va_idx) if va_idx.size else None
    history = []
    best, best_val = None, math.inf
    for epoch in range(1, config.epochs + 1):
        order = tr_idx[rng.permutation(tr_idx.size)]
        total = 0.0
        for s in range(0, order.size, bs):
            idx = order[s : s + bs]
            loss, grads = rate_loss(params, batch.subset(idx), cfg)
            if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise TrainingError(f"SNN training diverged in epoch {epoch}", epoch)
            opt.step(arrays, grads)
            total += loss * idx.size
        val_loss = rate_loss(params, val, cfg)[0] if val is not None else math.nan
        history.append((total / order.size, val_loss))
        if keep_best and val_loss < best_val:
            best, best_val = params.copy(), val_loss
    return SnnTrainResult(best if best is not None else params, history)


def predict_snn(params: SnnParams, spikes, cfg: LifConfig = LifConfig()) -> SpikeForecast:
    return forward_snn(params, spikes, cfg)[0]


def spike_raster_rows(batch: SpikeTrainBatch):
    """``(sample, window_position, time_step, spike)`` rows for every firing cell."""
    n, w, t = np.nonzero(batch.spikes)
    return [(int(a), int(b), int(c), 1) for a, b, c in zip(n, w, t)]
