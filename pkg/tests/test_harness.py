import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tempcast import harness
from tempcast.harness import ConfigError, ExperimentConfig
from tempcast.ingest import TimeSeries
from tempcast.synthetic import linear_co2, synthetic_city, write_co2_csv, write_temperature_csv

FAST = {
    "lstm": {"epochs": 2, "hidden_size": 8},
    "snn": {"epochs": 2, "hidden": 8},
    "arima": {"order": [1, 1, 1]},
    "sarimax": {"order": [1, 1, 1], "seasonal": [1, 0, 0, 12]},
    "horizon": 24,
}


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    city = synthetic_city(years=20, seed=1)
    other = synthetic_city(years=20, seed=2, label="Otherton", mean=20)
    short = TimeSeries(np.datetime64("1990-01", "M"), np.arange(18.0), "Shortville")
    write_temperature_csv(
        d / "temps.csv", [(city, "Synthland"), (other, "Otherland"), (short, "Synthland")],
        missing={"Synthetica": [3, 50]},
    )
    write_co2_csv(d / "co2.csv", linear_co2("Synthland", 1850, 2020) + linear_co2("Otherland", 1900, 1910))
    return d


def make_config(data_dir, tmp_path, **overrides):
    doc = {
        "temperature_csv": str(data_dir / "temps.csv"),
        "co2_csv": str(data_dir / "co2.csv"),
        "cities": ["Synthetica"],
        "models": ["arima"],
        "output_dir": str(tmp_path / "out"),
        **FAST,
    }
    doc.update(overrides)
    return ExperimentConfig.from_dict(doc)


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_config_validation(tmp_path):
    base = {"temperature_csv": "t.csv", "cities": ["A"]}
    for bad in ({"cities": []}, {"models": []}, {"models": ["gru"]}, {"horizon": 0},
                {"split_mode": "random"}, {"metric_space": "kelvin"}, {"cities": "random:0"},
                {"models": ["sarimax"]}, {"unknown": 1}):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({**base, **bad})


def test_config_paths_relative_to_file(tmp_path):
    path = tmp_path / "cfg" / "c.json"
    path.parent.mkdir()
    path.write_text(json.dumps({"temperature_csv": "t.csv", "cities": "random:2", "output_dir": "o"}))
    cfg = ExperimentConfig.load(path)
    assert cfg.temperature_csv == str(path.parent / "t.csv")
    assert cfg.output_dir == str(path.parent / "o")
    assert cfg.arima.order == (5, 1, 3)
    assert cfg.sarimax.seasonal == (1, 0, 1, 12)
    assert cfg.horizon == 120


def test_config_hash_ignores_jobs_and_output_dir():
    a = ExperimentConfig.from_dict({"temperature_csv": "t.csv", "cities": ["A"]})
    b = ExperimentConfig.from_dict({"temperature_csv": "t.csv", "cities": ["A"], "jobs": 4})
    c = ExperimentConfig.from_dict({"temperature_csv": "t.csv", "cities": ["A"], "seed": 1})
    d = ExperimentConfig.from_dict({"temperature_csv": "t.csv", "cities": ["A"], "output_dir": "elsewhere"})
    assert a.hash() == d.hash()
    assert a.hash() == b.hash() != c.hash()


def test_smallest_run(data_dir, tmp_path):
    cfg = make_config(data_dir, tmp_path)
    manifest = harness.run(cfg)
    [entry] = manifest["entries"]
    assert entry["status"] == "success"
    assert harness.exit_code(manifest) == 0
    out = tmp_path / "out"
    report = json.loads((out / entry["artifacts"]["report"]).read_text())
    assert report["metrics"]["model_name"] == "arima"
    rows = read_rows(out / entry["artifacts"]["forecast"])
    assert [r["kind"] for r in rows].count("future") == 24
    assert rows[-1]["date"] == "1921-12"
    assert list(rows[0]) == ["date", "kind", "actual", "predicted", "lower", "upper"]
    assert (out / "Synthetica" / "series.csv").exists()


def test_insufficient_city_is_skipped(data_dir, tmp_path):
    cfg = make_config(data_dir, tmp_path, cities=["Synthetica", "Shortville"])
    manifest = harness.run(cfg)
    statuses = {(e["city"], e["model"]): e["status"] for e in manifest["entries"]}
    assert statuses == {("Synthetica", "arima"): "success", ("Shortville", "arima"): "skipped"}
    skipped = [e for e in manifest["entries"] if e["status"] == "skipped"][0]
    assert skipped["reason"].startswith("insufficient data")
    assert harness.exit_code(manifest) == 2


def test_failures_are_isolated(data_dir, tmp_path):
    # Otherland's CO2 ends in 1910, before its temperatures start, so it is
    # carried flat and the exogenous column is constant; force a failure via
    # an unknown country instead
    cfg = make_config(data_dir, tmp_path, cities=["Synthetica", "Otherton"], models=["arima", "sarimax"],
                      co2_columns={"country": "country", "year": "year", "value": "co2"})
    (tmp_path / "co2.csv").write_text("country,year,co2\nSynthland,1900,1.0\nSynthland,1901,2.0\n")
    cfg.co2_csv = str(tmp_path / "co2.csv")
    manifest = harness.run(cfg)
    by = {(e["city"], e["model"]): e for e in manifest["entries"]}
    assert len(by) == 4
    assert by[("Otherton", "sarimax")]["status"] == "failed"
    assert "Otherland" in by[("Otherton", "sarimax")]["reason"]
    assert by[("Otherton", "arima")]["status"] == "success"
    assert by[("Synthetica", "sarimax")]["status"] == "success"


def test_arima_and_sarimax_comparison_rows(data_dir, tmp_path):
    cfg = make_config(data_dir, tmp_path, models=["arima", "sarimax"])
    harness.run(cfg)
    rows = read_rows(tmp_path / "out" / "comparison.csv")
    assert len([r for r in rows if r["city"] == "Synthetica"]) == 2
    assert sorted(r["rank"] for r in rows) == ["1", "2"]
    table = json.loads((tmp_path / "out" / "comparison.json").read_text())
    assert table[0]["mse"]["lstm"] == "absent"
    assert len(table[0]["ranking"]) == 2


def test_all_models_and_leakage_audit(data_dir, tmp_path):
    cfg = make_config(data_dir, tmp_path, models=["arima", "sarimax", "lstm", "snn"])
    manifest = harness.run(cfg)
    assert all(e["status"] == "success" for e in manifest["entries"])
    out = tmp_path / "out" / "Synthetica"
    for model in ("arima", "sarimax", "lstm", "snn"):
        report = json.loads((out / model / "report.json").read_text())
        audit = report["leakage_audit"]
        assert audit["leaked_indices"] == 0
        assert audit["fit_index_max"] < audit["test_index_min"]
        assert "baseline_seasonal_naive" in report
        assert set(report) >= {"metrics_celsius", "metrics_scaled"}
    snn_report = json.loads((out / "snn" / "report.json").read_text())
    assert 0 <= snn_report["accuracy"] <= 1
    assert snn_report["accuracy"] == pytest.approx(1 - snn_report["metrics"]["mae"])
    assert (out / "lstm" / "loss.csv").exists() and (out / "snn" / "loss.csv").exists()
    assert not (out / "arima" / "loss.csv").exists()
    from tempcast.lstm import LstmParams

    params = LstmParams.load(out / "lstm" / "checkpoint.json")
    assert params.hidden_size == 8


def test_shuffled_split_is_flagged_by_audit(data_dir, tmp_path):
    cfg = make_config(data_dir, tmp_path, models=["lstm"], split_mode="shuffled")
    harness.run(cfg)
    report = json.loads((tmp_path / "out" / "Synthetica" / "lstm" / "report.json").read_text())
    assert report["leakage_audit"]["leaked_indices"] > 0


def test_scaled_metric_space(data_dir, tmp_path):
    cfg = make_config(data_dir, tmp_path, metric_space="scaled")
    harness.run(cfg)
    report = json.loads((tmp_path / "out" / "Synthetica" / "arima" / "report.json").read_text())
    assert report["metrics"] == report["metrics_scaled"]
    assert report["metrics"]["mse"] < report["metrics_celsius"]["mse"]


def test_runs_are_deterministic_and_parallel_safe(data_dir, tmp_path):
    a = make_config(data_dir, tmp_path / "a", models=["arima", "lstm", "snn"], cities=["Synthetica", "Otherton"])
    b = make_config(data_dir, tmp_path / "b", models=["arima", "lstm", "snn"], cities=["Synthetica", "Otherton"], jobs=2)
    ma, mb = harness.run(a), harness.run(b)
    strip = lambda m: [{k: v for k, v in e.items() if k != "wall_time_s"} for e in m["entries"]]
    assert strip(ma) == strip(mb)
    assert ma["config_hash"] == mb["config_hash"]
    for rel in ("comparison.csv", "Synthetica/lstm/forecast.csv", "Otherton/snn/checkpoint.json"):
        assert (tmp_path / "a" / "out" / rel).read_bytes() == (tmp_path / "b" / "out" / rel).read_bytes()


def test_random_city_selection(data_dir, tmp_path):
    cfg = make_config(data_dir, tmp_path, cities="random:2", seed=3)
    keys, _ = harness.load_cities(cfg)
    again, _ = harness.load_cities(cfg)
    assert keys == again and len(keys) == 2


def test_unknown_city(data_dir, tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        harness.run(make_config(data_dir, tmp_path, cities=["Atlantis"]))


@given(st.lists(st.tuples(st.sampled_from(["arima", "lstm", "snn", "sarimax"]), st.sampled_from([0.1, 0.2, 0.3])),
                min_size=1, max_size=4, unique_by=lambda t: t[0]))
@settings(max_examples=30)
def test_compare_ranking_rule(tmp_path_factory, entries):
    run = tmp_path_factory.mktemp("cmp")
    for model, mse in entries:
        d = run / "X" / model
        d.mkdir(parents=True)
        metrics = {"model_name": model, "city": "X", "mse": mse, "rmse": mse**0.5, "mae": mse, "r_squared": None,
                   "explained_variance": None, "n_points": 5, "horizon_months": 1}
        (d / "report.json").write_text(json.dumps({"model": model, "city": "X", "metric_space": "celsius", "metrics": metrics}))
    table = harness.compare(run)["table"][0]
    assert table["ranking"] == [m for m, _ in sorted(entries, key=lambda e: (e[1], e[0]))]
    assert sum(v != "absent" for v in table["mse"].values()) == len(entries)


def test_compare_empty_dir(tmp_path):
    with pytest.raises(FileNotFoundError):
        harness.compare(tmp_path)


def test_plots(data_dir, tmp_path):
    cfg = make_config(data_dir, tmp_path, models=["arima", "sarimax", "lstm"])
    harness.run(cfg)
    out = tmp_path / "out"
    written = harness.emit_plots(out)
    names = sorted(p.relative_to(out).as_posix() for p in written)
    assert names == [
        "Synthetica/arima/forecast.svg",
        "Synthetica/co2_comparison.svg",
        "Synthetica/lstm/forecast.svg",
        "Synthetica/lstm/loss.svg",
        "Synthetica/sarimax/forecast.svg",
    ]
    first = {p: p.read_bytes() for p in written}
    harness.emit_plots(out)
    assert all(p.read_bytes() == b for p, b in first.items())
    (out / "Synthetica" / "lstm" / "loss.csv").unlink()
    with pytest.raises(FileNotFoundError, match="loss.csv"):
        harness.emit_plots(out)


def test_plots_arima_only(data_dir, tmp_path):
    harness.run(make_config(data_dir, tmp_path))
    written = harness.emit_plots(tmp_path / "out")
    assert [p.name for p in written] == ["forecast.svg"]


def test_mse_table_format():
    entry = {"city": "Irkutsk", "mse": {"snn": 0.0257, "lstm": 0.0021, "arima": 0.013, "sarimax": "absent"}}
    assert harness.format_mse_table(entry).splitlines() == [
        "Irkutsk: Model & MSE",
        "Spiking Neural Network & 0.0257",
        "LSTM & 0.0021",
        "Statistical Model (ARIMA) & 0.013",
    ]
