"""
ARIMA on a trending monthly series
==================================

A seasonal cycle riding on a slowly wandering level is not stationary.
The ADF test says so, a first difference fixes it, and a seasonal model
beats a non-seasonal one by a wide margin on held-out months.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from tempcast import arima
from tempcast.arima import ArimaSpec
from tempcast.stattests import adf_test
from tempcast.synthetic import synthetic_city

city = synthetic_city(years=40, noise=0.8, seed=4)
drift = np.cumsum(np.random.default_rng(4).normal(0.0, 0.3, city.values.size))
y = city.values + drift

# The wandering level leaves a unit root in the levels; differencing removes it.
for label, series in (("levels", y), ("first difference", np.diff(y))):
    res = adf_test(series)
    print(f"ADF on {label:<16} stat {res.statistic:7.2f}  lags {res.lags_used:2d}  "
          f"stationary at 5%: {res.is_stationary_5pct}")

# Fit a non-seasonal ARIMA and a seasonal one on the first 80% of months and
# forecast the remaining 20% in one go.  The non-seasonal model can only
# carry the last level forward, so it misses the whole annual swing.
n_train = int(0.8 * y.size)
plain = arima.fit(y[:n_train], ArimaSpec(2, 1, 1), strict=False)
seasonal = arima.fit(y[:n_train], ArimaSpec(1, 1, 1, seasonal=(1, 0, 1, 12)), strict=False)
for name, fit in (("ARIMA(2,1,1)", plain), ("SARIMA(1,1,1)(1,0,1,12)", seasonal)):
    fc = arima.forecast(fit, y.size - n_train)
    mse = np.mean((fc.mean - y[n_train:]) ** 2)
    print(f"{name:<24} AIC {fit.aic:9.1f}  test MSE {mse:6.3f}")

# Plot the seasonal model's forecast band against what actually happened.
fc = arima.forecast(seasonal, y.size - n_train)
t = np.arange(y.size)
plt.figure(figsize=(9, 3.5))
plt.plot(t[-200:], y[-200:], color="0.3", lw=1, label="observed")
plt.plot(t[n_train:], fc.mean, color="C1", label="forecast")
plt.fill_between(t[n_train:], fc.lower, fc.upper, color="C1", alpha=0.25, label="95% band")
plt.xlabel("month")
plt.ylabel("temperature (C)")
plt.legend(loc="upper left")
plt.tight_layout()
plt.savefig("arima_walkthrough.png", dpi=100)
print("wrote arima_walkthrough.png")
