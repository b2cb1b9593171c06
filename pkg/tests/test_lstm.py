import time

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tempcast import lstm
from tempcast.lstm import LstmParams, NumericError, TrainConfig, TrainingError
from tempcast.series import make_windows


def numeric_grads(params, inputs, targets, eps=1e-5):
    out = {}
    for name, arr in params.arrays().items():
        g = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            keep = arr[i]
            arr[i] = keep + eps
            up = lstm.mse_loss_and_grads(params, inputs, targets)[0]
            arr[i] = keep - eps
            down = lstm.mse_loss_and_grads(params, inputs, targets)[0]
            arr[i] = keep
            g[i] = (up - down) / (2 * eps)
        out[name] = g
    return out


def rel_error(a, b):
    return np.abs(a - b).max() / max(np.abs(a).max(), np.abs(b).max(), 1e-8)


def test_forward_matches_reference_implementation():
    # frozen from torch.nn.LSTM loaded with the same weights (gate order remapped)
    p = LstmParams.init(hidden_size=3, seed=5)
    pred, _ = lstm.forward(p, [0.1, 0.5, 0.9, 0.3, 0.7])
    assert pred == pytest.approx(0.06349122825862323, rel=1e-12)


def test_zero_weights_predict_zero():
    assert lstm.forward(LstmParams.zeros(8), np.random.default_rng(0).random(6))[0] == 0.0


def test_init_conventions():
    p = LstmParams.init(16, seed=3)
    np.testing.assert_array_equal(p.b_f, 1.0)
    assert np.abs(p.W_i).max() <= 0.25
    assert p.W_g.shape == (16, 17) and p.W_y.shape == (1, 16) and p.b_y.shape == (1,)
    q = LstmParams.init(16, seed=3)
    assert lstm.forward(p, [0.2, 0.4])[0] == lstm.forward(q, [0.2, 0.4])[0]


def test_gradient_check_five_step_window():
    rng = np.random.default_rng(1)
    p = LstmParams.init(4, seed=2)
    x, y = rng.random((3, 5)), rng.random(3)
    _, analytic = lstm.mse_loss_and_grads(p, x, y)
    numeric = numeric_grads(p, x, y)
    for name in analytic:
        assert rel_error(analytic[name], numeric[name]) < 1e-4, name


@given(st.integers(0, 1000), st.integers(1, 4), st.integers(1, 4))
def test_gradient_check_property(seed, hidden, steps):
    rng = np.random.default_rng(seed)
    p = LstmParams.init(hidden, seed=seed)
    x, y = rng.random((2, steps)), rng.random(2)
    _, analytic = lstm.mse_loss_and_grads(p, x, y)
    numeric = numeric_grads(p, x, y)
    for name in analytic:
        assert rel_error(analytic[name], numeric[name]) < 1e-4, name


def test_non_finite_state_names_step():
    p = LstmParams.init(2, seed=0)
    with pytest.raises(NumericError, match="step 1"):
        lstm.forward(p, [0.5, np.nan, 0.5])


def test_batch_and_single_agree():
    p = LstmParams.init(5, seed=4)
    X = np.random.default_rng(2).random((7, 6))
    batch = lstm.predict(p, X)
    single = [lstm.forward(p, row)[0] for row in X]
    np.testing.assert_allclose(batch, single, rtol=1e-12)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(window_len=0)
    with pytest.raises(ValueError):
        TrainConfig(validation_fraction=1.0)


def test_batch_larger_than_data_rejected():
    ds = make_windows(np.linspace(0, 1, 20), 4)
    with pytest.raises(ValueError, match="batch_size"):
        lstm.train(ds, TrainConfig(epochs=1, window_len=4, batch_size=64))


def test_constant_target_fits():
    x = np.full(80, 0.5)
    ds = make_windows(x, 12)
    res = lstm.train(ds, TrainConfig(epochs=50, window_len=12, batch_size=8, seed=0, hidden_size=8))
    assert res.history[-1][0] <= 1e-4
    fc = lstm.forecast_recursive(res.params, x[-12:], 10, 12)
    assert np.ptp(fc) < 1e-2


def sine_dataset():
    t = np.arange(480)
    return 0.5 + 0.4 * np.sin(2 * np.pi * t / 12)


def test_sine_smoke_benchmark():
    x = sine_dataset()
    ds = make_windows(x[:456], 12)
    t0 = time.perf_counter()
    res = lstm.train(ds, TrainConfig(epochs=50, window_len=12, batch_size=32, seed=0, hidden_size=16, lr=1e-2))
    assert time.perf_counter() - t0 < 60
    assert res.history[-1][1] <= 1e-3
    fc = lstm.forecast_recursive(res.params, x[444:456], 24, 12)
    assert np.corrcoef(fc, x[456:480])[0, 1] >= 0.8


def test_training_is_deterministic():
    ds = make_windows(sine_dataset()[:100], 12)
    cfg = TrainConfig(epochs=3, window_len=12, batch_size=16, seed=7, hidden_size=6)
    a, b = lstm.train(ds, cfg), lstm.train(ds, cfg)
    assert a.history == b.history
    for k, v in a.params.arrays().items():
        np.testing.assert_array_equal(v, b.params.arrays()[k])


def test_divergence_raises_training_error():
    ds = make_windows(np.linspace(0, 1, 40), 4)
    big = make_windows(np.linspace(0, 1, 40), 4)
    big = type(big)(big.inputs, big.targets * 1e300, 4)
    with np.errstate(over="ignore", invalid="ignore"), pytest.raises(TrainingError) as err:
        lstm.train(big, TrainConfig(epochs=2, window_len=4, batch_size=8))
    assert err.value.epoch == 1
    assert len(lstm.train(ds, TrainConfig(epochs=1, window_len=4, batch_size=8)).history) == 1


def test_forecast_recursive_contract():
    p = LstmParams.init(4, seed=1)
    w = np.array([0.1, 0.2, 0.3])
    assert lstm.forecast_recursive(p, w, 1, 3)[0] == lstm.forward(p, w)[0]
    with pytest.raises(ValueError):
        lstm.forecast_recursive(p, w, 5, 4)
    with pytest.raises(ValueError):
        lstm.forecast_recursive(p, w, 0)


def test_params_save_load(tmp_path):
    p = LstmParams.init(3, seed=9)
    p.save(tmp_path / "p.json")
    q = LstmParams.load(tmp_path / "p.json")
    assert lstm.forward(p, [0.3, 0.6])[0] == lstm.forward(q, [0.3, 0.6])[0]
