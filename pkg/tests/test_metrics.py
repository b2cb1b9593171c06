import json

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tempcast.metrics import CSV_COLUMNS, EvalReport, evaluate, evaluate_binary, seasonal_naive

vec = arrays(float, st.integers(2, 50), elements=st.floats(-100, 100))


def test_hand_example():
    r = evaluate([0, 1, 2, 3], [0, 1, 2, 5])
    assert (r.mse, r.rmse, r.mae) == (1.0, 1.0, 0.5)


def test_matches_reference_r2_and_ev():
    # frozen from sklearn.metrics.r2_score / explained_variance_score
    t = [3.1, 4.7, 2.2, 8.9, 5.5, 6.0]
    p = [2.9, 5.1, 2.0, 8.1, 6.2, 5.4]
    r = evaluate(t, p)
    assert r.r_squared == pytest.approx(0.9381553860819828, rel=1e-12)
    assert r.explained_variance == pytest.approx(0.9410748331744518, rel=1e-12)


def test_perfect_and_mean_predictions():
    y = np.array([1.0, 4.0, 2.0, 8.0])
    perfect = evaluate(y, y)
    assert (perfect.mse, perfect.mae, perfect.r_squared, perfect.explained_variance) == (0, 0, 1, 1)
    assert evaluate(y, np.full(4, y.mean())).r_squared == pytest.approx(0.0, abs=1e-15)


def test_constant_truth_has_undefined_r2():
    r = evaluate([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
    assert r.r_squared is None and r.explained_variance is None
    assert r.mse == pytest.approx(2 / 3)


def test_length_checks():
    with pytest.raises(ValueError):
        evaluate([], [])
    with pytest.raises(ValueError):
        evaluate([1, 2], [1])


@given(vec, st.data())
def test_identities(t, data):
    p = data.draw(arrays(float, t.size, elements=st.floats(-100, 100)))
    r = evaluate(t, p)
    assert r.rmse**2 == pytest.approx(r.mse, rel=1e-12, abs=1e-300)
    assert r.mse >= 0 and r.mae >= 0
    assert r.mae <= r.rmse + 1e-12
    if r.r_squared is not None:
        assert r.r_squared <= 1 and r.explained_variance <= 1 + 1e-12
        e = t - p
        gap = np.mean(e) ** 2 / np.var(t)
        assert r.explained_variance - r.r_squared == pytest.approx(gap, abs=1e-9 * max(1, gap))


@given(vec, st.data(), st.floats(0.01, 100), st.floats(-100, 100))
def test_scale_equivariance(t, data, a, b):
    assume(np.var(t) > 1e-6)
    p = data.draw(arrays(float, t.size, elements=st.floats(-100, 100)))
    base = evaluate(t, p)
    scaled = evaluate(a * t + b, a * p + b)
    assert scaled.mse == pytest.approx(a * a * base.mse, rel=1e-9, abs=1e-12)
    assert scaled.r_squared == pytest.approx(base.r_squared, rel=1e-9, abs=1e-9)
    assert scaled.explained_variance == pytest.approx(base.explained_variance, rel=1e-9, abs=1e-9)


def test_binary_examples():
    y = np.array([0, 1, 1, 0, 1, 0, 0, 1, 1, 0])
    assert evaluate_binary(y, y) == 0
    assert evaluate_binary(y, 1 - y) == 1
    flipped = y.copy()
    flipped[3] = 1
    assert evaluate_binary(y, flipped) == pytest.approx(0.1)
    assert evaluate_binary(y, flipped) == evaluate(y, flipped).mae
    with pytest.raises(ValueError):
        evaluate_binary([0, 2], [0, 1])


def test_report_serialisation():
    r = evaluate([1.0, 2.0, 4.0], [1.5, 2.0, 3.0], "lstm", "Berlin", 1)
    assert json.loads(r.to_json())["model_name"] == "lstm"
    header, row = r.to_csv().splitlines()
    assert header.split(",") == list(CSV_COLUMNS)
    assert row.startswith("lstm,Berlin,3,1,")
    assert EvalReport.from_dict(r.to_dict()) == r


def test_seasonal_naive():
    out = seasonal_naive(np.arange(30.0), 12)
    assert np.isnan(out[:12]).all()
    np.testing.assert_array_equal(out[12:], np.arange(18.0))
