import json

import numpy as np
import pytest

from tempcast.cli import main
from tempcast.ingest import TimeSeries
from tempcast.synthetic import synthetic_city, write_temperature_csv


@pytest.fixture
def config(tmp_path):
    short = TimeSeries(np.datetime64("1990-01", "M"), np.arange(18.0), "Shortville")
    write_temperature_csv(tmp_path / "t.csv", [(synthetic_city(years=15), "S"), (short, "S")])
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({
        "temperature_csv": "t.csv", "cities": ["Synthetica"], "models": ["arima"],
        "arima": {"order": [1, 1, 1]}, "horizon": 12, "output_dir": "out",
    }))
    return path


def test_run_compare_plots(config, capsys):
    assert main(["run", "--config", str(config)]) == 0
    assert "success" in capsys.readouterr().out
    run_dir = str(config.parent / "out")
    assert main(["compare", "--run", run_dir]) == 0
    assert "Statistical Model (ARIMA) &" in capsys.readouterr().out
    assert main(["plots", "--run", run_dir]) == 0
    assert capsys.readouterr().out.strip().endswith("forecast.svg")


def test_global_flags_either_side(config):
    assert main(["--seed", "4", "run", "--config", str(config)]) == 0
    manifest = json.loads((config.parent / "out" / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 4
    assert main(["run", "--config", str(config), "--jobs", "2", "--verbose"]) == 0
    assert json.loads((config.parent / "out" / "manifest.json").read_text())["config"]["jobs"] == 2


def test_partial_failure_exit_code(config):
    doc = json.loads(config.read_text())
    doc["cities"] = ["Synthetica", "Shortville"]
    config.write_text(json.dumps(doc))
    assert main(["run", "--config", str(config)]) == 2


def test_fatal_errors_exit_one(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 1
    assert "error" in capsys.readouterr().err
    (tmp_path / "bad.json").write_text('{"cities": []}')
    assert main(["run", "--config", str(tmp_path / "bad.json")]) == 1
    assert main(["compare", "--run", str(tmp_path)]) == 1


def test_adf(config, capsys):
    csv_path = str(config.parent / "t.csv")
    assert main(["adf", "--csv", csv_path, "--column", "AverageTemperature", "--city", "Synthetica"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["stationary_at_5pct"] is True
    assert out["critical_values"]["5%"] == -2.86
    assert main(["adf", "--csv", csv_path, "--column", "Nope"]) == 1


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "tempcast", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "adf" in res.stdout
