"""
Latency-coded spikes and a LIF classifier
=========================================

Each scaled value becomes one spike; larger values fire earlier.  A small
feedforward network drives a leaky integrate-and-fire node, and the node's
firing rate answers "will next month be above the midpoint of the scale?".
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from tempcast import snn
from tempcast.lstm import TrainConfig
from tempcast.series import encode_latency, fit_minmax, make_windows
from tempcast.snn import LifConfig
from tempcast.synthetic import synthetic_city

# A single membrane driven by a constant current: it charges, fires, resets.
v, trace = 0.0, []
for _ in range(12):
    v, s = snn.lif_step(v, 0.2)
    trace.append(s)
print("spikes under constant input 0.2:", trace)

y = synthetic_city(years=80, seed=1).values
scaled = fit_minmax(y).apply(y)
batch = encode_latency(make_windows(scaled, 30), time_steps=16)
print(f"{len(batch)} samples, raster shape {batch.spikes.shape[1:]}, "
      f"{batch.binary_targets.mean():.0%} labelled warm")

n_train = int(0.8 * len(batch))
train, test = batch.subset(np.arange(n_train)), batch.subset(np.arange(n_train, len(batch)))
# Small batches matter here: the hard threshold leaves a flat plateau at
# "rate 0.5 for everything" that few, large steps rarely escape.
config = TrainConfig(epochs=100, window_len=30, batch_size=16, lr=3e-3, seed=0)
result = snn.train_snn(train, config, LifConfig(), hidden=64)
pred = snn.predict_snn(result.params, test.spikes).binary_prediction
print(f"test accuracy {np.mean(pred == test.binary_targets):.3f}")

# The raster of one sample: window position against time step.
plt.figure(figsize=(5, 4))
rows = np.argwhere(batch.spikes[0])
plt.scatter(rows[:, 1], rows[:, 0], marker="|", s=80, color="k")
plt.xlabel("time step")
plt.ylabel("window position")
plt.title("latency code of one 30-month window")
plt.tight_layout()
plt.savefig("spiking_threshold.png", dpi=100)
print("wrote spiking_threshold.png")
