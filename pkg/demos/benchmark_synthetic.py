"""
A full benchmark run on synthetic cities
========================================

Writes two synthetic cities and a CO2 table in the same CSV layouts as the
real datasets, then runs every model through the harness: per-pair reports,
forecasts, the comparison table and SVG plots land in ``benchmark_run/``.
The same run is available from the shell as ``tempcast run --config``.
"""

import json
from pathlib import Path

from tempcast import harness
from tempcast.synthetic import linear_co2, synthetic_city, write_co2_csv, write_temperature_csv

root = Path("benchmark_run")
root.mkdir(exist_ok=True)
write_temperature_csv(
    root / "temps.csv",
    [(synthetic_city(years=60, seed=0), "Synthland"),
     (synthetic_city(years=60, seed=1, label="Coolbury", mean=2.0, amplitude=12.0), "Synthland")],
)
write_co2_csv(root / "co2.csv", linear_co2("Synthland", 1900, 1959))

config = {
    "temperature_csv": "temps.csv",
    "co2_csv": "co2.csv",
    "cities": ["Synthetica", "Coolbury"],
    "models": ["arima", "sarimax", "lstm", "snn"],
    "output_dir": "out",
    "lstm": {"epochs": 20},
    "snn": {"epochs": 40},
    "jobs": 2,
}
(root / "config.json").write_text(json.dumps(config, indent=2))

manifest = harness.run(harness.ExperimentConfig.load(root / "config.json"))
for entry in manifest["entries"]:
    print(f"{entry['city']:<11} {entry['model']:<8} {entry['status']}  {entry['wall_time_s']:.1f}s")

# Rankings are by test-split MSE; the SNN's entry is a misclassification rate.
for row in harness.compare(root / "out")["table"]:
    print()
    print(harness.format_mse_table(row))

plots = harness.emit_plots(root / "out")
print(f"\n{len(plots)} plots written under {root / 'out'}")
