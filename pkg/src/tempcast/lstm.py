"""Single-layer LSTM regressor trained with full BPTT and Adam.

Gate layout follows the usual convention: for each step

    f = sigmoid(W_f [x; h] + b_f)     i = sigmoid(W_i [x; h] + b_i)
    o = sigmoid(W_o [x; h] + b_o)     g = tanh(W_g [x; h] + b_g)
    c = f * c_prev + i * g            h = o * tanh(c)

and the prediction is ``W_y h_T + b_y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .checkpoint import load_arrays, save_arrays
from .optim import Adam
from .series import WindowedDataset

GATES = ("f", "i", "o", "g")


class LstmError(RuntimeError):
    pass


class NumericError(LstmError):
    pass


class TrainingError(LstmError):
    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass
class LstmParams:
    W_f: np.ndarray
    W_i: np.ndarray
    W_o: np.ndarray
    W_g: np.ndarray
    b_f: np.ndarray
    b_i: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray
    W_y: np.ndarray  # (1, hidden)
    b_y: np.ndarray  # (1,)

    @property
    def hidden_size(self) -> int:
        return self.W_f.shape[0]

    @property
    def input_size(self) -> int:
        return self.W_f.shape[1] - self.hidden_size

    @classmethod
    def init(cls, hidden_size: int = 64, input_size: int = 1, seed: int = 0) -> "LstmParams":
        rng = np.random.default_rng(seed)
        k = 1.0 / math.sqrt(hidden_size)
        shape = (hidden_size, input_size + hidden_size)
        arrays = {f"W_{g}": rng.uniform(-k, k, shape) for g in GATES}
        arrays.update({f"b_{g}": rng.uniform(-k, k, hidden_size) for g in GATES})
        arrays["b_f"] = np.ones(hidden_size)
        arrays["W_y"] = rng.uniform(-k, k, (1, hidden_size))
        arrays["b_y"] = rng.uniform(-k, k, 1)
        return cls(**arrays)

    @classmethod
    def zeros(cls, hidden_size: int, input_size: int = 1) -> "LstmParams":
        shape = (hidden_size, input_size + hidden_size)
        arrays = {f"W_{g}": np.zeros(shape) for g in GATES}
        arrays.update({f"b_{g}": np.zeros(hidden_size) for g in GATES})
        return cls(**arrays, W_y=np.zeros((1, hidden_size)), b_y=np.zeros(1))

    def arrays(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self) -> "LstmParams":
        return LstmParams(**{k: v.copy() for k, v in self.arrays().items()})

    def save(self, path, meta: dict | None = None) -> None:
        save_arrays(self.arrays(), path, meta)

    @classmethod
    def load(cls, path) -> "LstmParams":
        arrays, _ = load_arrays(path)
        return cls(**arrays)


def _stacked(params: LstmParams):
    W = np.concatenate([params.W_f, params.W_i, params.W_o, params.W_g])
    b = np.concatenate([params.b_f, params.b_i, params.b_o, params.b_g])
    return W, b


def forward_batch(params: LstmParams, windows):
    """Run a batch of windows; returns ``(predictions, cache)``.

    ``windows`` has shape ``(batch, steps)`` for scalar inputs or
    ``(batch, steps, input_size)``.
    """
    X = np.asarray(windows, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim == 2:
        X = X[:, :, None]
    B, T, _ = X.shape
    H = params.hidden_size
    W, b = _stacked(params)
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = []
    for t in range(T):
        z = np.concatenate([X[:, t, :], h], axis=1)
        a = z @ W.T + b
        f = sigmoid(a[:, :H])
        i = sigmoid(a[:, H : 2 * H])
        o = sigmoid(a[:, 2 * H : 3 * H])
        g = np.tanh(a[:, 3 * H :])
        c_prev = c
        c = f * c_prev + i * g
        tc = np.tanh(c)
        h = o * tc
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(h))):
            raise NumericError(f"non-finite LSTM state at step {t}")
        cache.append((z, f, i, o, g, c_prev, tc))
    pred = h @ params.W_y[0] + params.b_y[0]
    if not np.all(np.isfinite(pred)):
        raise NumericError(f"non-finite prediction after step {T - 1}")
    return pred, (cache, h)


def forward(params: LstmParams, window):
    """Predict the value following one window; returns ``(prediction, cache)``."""
    pred, cache = forward_batch(params, np.asarray(window, dtype=float)[None, :])
    return float(pred[0]), cache


def backward(params: LstmParams, cache, dpred) -> dict[str, np.ndarray]:
    """Gradients of ``sum(dpred * prediction)`` with respect to every parameter."""
    steps, h_last = cache
    H = params.hidden_size
    W, _ = _stacked(params)
    dpred = np.asarray(dpred, dtype=float)
    grads = {"W_y": (dpred @ h_last)[None, :], "b_y": np.array([dpred.sum()])}
    dW = np.zeros_like(W)
    db = np.zeros(4 * H)
    dh = dpred[:, None] * params.W_y[0][None, :]
    dc = np.zeros_like(dh)
    for z, f, i, o, g, c_prev, tc in reversed(steps):
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        da = np.concatenate(
            [
                dc * c_prev * f * (1.0 - f),
                dc * g * i * (1.0 - i),
                do * o * (1.0 - o),
                dc * i * (1.0 - g * g),
            ],
            axis=1,
        )
        dW += da.T @ z
        db += da.sum(axis=0)
        dh = (da @ W)[:, W.shape[1] - H :]
        dc = dc * f
    for k, gate in enumerate(GATES):
        grads[f"W_{gate}"] = dW[k * H : (k + 1) * H]
        grads[f"b_{gate}"] = db[k * H : (k + 1) * H]
    return grads


def mse_loss_and_grads(params: LstmParams, inputs, targets):
    pred, cache = forward_batch(params, inputs)
    err = pred - np.asarray(targets, dtype=float)
    loss = float(np.mean(err * err))
    return loss, backward(params, cache, 2.0 * err / err.size)


def predict(params: LstmParams, inputs, batch_size: int = 1024) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=float)
    out = [forward_batch(params, inputs[s : s + batch_size])[0] for s in range(0, len(inputs), batch_size)]
    return np.concatenate(out) if out else np.zeros(0)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    window_len: int = 12
    batch_size: int = 32
    seed: int = 0
    validation_fraction: float = 0.1
    lr: float = 1e-3
    hidden_size: int = 64

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.window_len < 1:
            raise ValueError("window_len must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in [0, 1)")


def validation_split(n: int, fraction: float) -> tuple[np.ndarray, np.ndarray]:
    """Chronological split: the trailing ``floor(fraction * n)`` samples validate."""
    n_val = int(math.floor(fraction * n))
    return np.arange(n - n_val), np.arange(n - n_val, n)


@dataclass
class TrainResult:
    params: LstmParams
    history: list  # [(train_loss, val_loss)] per epoch


def train(dataset: WindowedDataset, config: TrainConfig = TrainConfig()) -> TrainResult:
    """Minibatch MSE training; the last ``validation_fraction`` of the samples
    (in the order given) is held out for the validation curve."""
    n = len(dataset)
    if n == 0:
        raise ValueError("empty dataset")
    if dataset.window_len != config.window_len:
        raise ValueError(f"dataset window {dataset.window_len} != config window {config.window_len}")
    tr_idx, va_idx = validation_split(n, config.validation_fraction)
    if config.batch_size > tr_idx.size:
        raise ValueError(f"batch_size {config.batch_size} exceeds {tr_idx.size} training samples")
    params = LstmParams.init(config.hidden_size, dataset.inputs.shape[2] if dataset.inputs.ndim == 3 else 1, config.seed)
    opt = Adam(lr=config.lr)
    rng = np.random.default_rng(config.seed + 1)
    arrays = params.arrays()
    history = []
    X, y = dataset.inputs, dataset.targets
    for epoch in range(1, config.epochs + 1):
        order = tr_idx[rng.permutation(tr_idx.size)]
        total = 0.0
        try:
            for s in range(0, order.size, config.batch_size):
                batch = order[s : s + config.batch_size]
                loss, grads = mse_loss_and_grads(params, X[batch], y[batch])
                if not math.isfinite(loss):
                    raise TrainingError(f"training loss became {loss} in epoch {epoch}", epoch)
                opt.step(arrays, grads)
                total += loss * batch.size
            train_loss = total / order.size
            val_loss = float(np.mean((predict(params, X[va_idx]) - y[va_idx]) ** 2)) if va_idx.size else math.nan
        except NumericError as exc:
            raise TrainingError(f"diverged in epoch {epoch}: {exc}", epoch) from exc
        history.append((train_loss, val_loss))
    return TrainResult(params, history)


def forecast_recursive(params: LstmParams, seed_window, horizon: int, window_len: int | None = None) -> np.ndarray:
    """Roll the model forward, feeding each prediction back as the newest input.

    ``window_len`` is the length the model was trained on; when given, the
    seed window must match it.
    """
    window = np.asarray(seed_window, dtype=float).copy()
    if window_len is not None and window.size != window_len:
        raise ValueError(f"seed window has length {window.size}, model expects {window_len}")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    out = np.empty(horizon)
    for h in range(horizon):
        out[h], _ = forward(params, window)
        window[:-1] = window[1:]
        window[-1] = out[h]
    return out
