"""
Sliding windows and an LSTM
===========================

Scale a monthly series to [0, 1], cut it into 12-month windows, train a
small LSTM with Adam and roll it forward recursively.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from tempcast import lstm
from tempcast.lstm import TrainConfig
from tempcast.series import fit_minmax, make_windows
from tempcast.synthetic import synthetic_city

y = synthetic_city(years=30, seed=2).values
n_train = int(0.8 * y.size)

# The scaler only sees the training months, so the test months may fall
# slightly outside [0, 1].
scaler = fit_minmax(y[:n_train])
scaled = scaler.apply(y)
train_set = make_windows(scaled[:n_train], 12)
print(f"{len(train_set)} training windows of length {train_set.window_len}")

config = TrainConfig(epochs=50, window_len=12, batch_size=32, hidden_size=16, seed=0)
result = lstm.train(train_set, config)
for epoch in (1, 10, 50):
    tr, va = result.history[epoch - 1]
    print(f"epoch {epoch:2d}  train {tr:.5f}  validation {va:.5f}")

# One-step predictions over the test months, each from the true last 12 months.
test_set = make_windows(scaled[n_train - 12:], 12)
one_step = scaler.invert(lstm.predict(result.params, test_set.inputs))
print(f"one-step test MSE {np.mean((one_step - y[n_train:]) ** 2):.3f} C^2")

# Recursive forecasts feed each prediction back in as the newest input.
rolled = scaler.invert(lstm.forecast_recursive(result.params, scaled[n_train - 12:n_train], 36))

t = np.arange(y.size)
plt.figure(figsize=(9, 3.5))
plt.plot(t[n_train - 48:n_train + 36], y[n_train - 48:n_train + 36], color="0.3", lw=1, label="observed")
plt.plot(t[n_train:], one_step, color="C0", label="one step")
plt.plot(t[n_train:n_train + 36], rolled, color="C3", ls="--", label="recursive")
plt.legend(loc="upper left")
plt.xlabel("month")
plt.tight_layout()
plt.savefig("lstm_windows.png", dpi=100)
print("wrote lstm_windows.png")
