"""Config-driven experiment runner for the per-city model comparison.

Output layout under ``output_dir``::

    manifest.json
    comparison.csv / comparison.json
    <city>/series.csv
    <city>/<model>/report.json, forecast.csv, loss.csv, checkpoint.json
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import arima as arima_mod
from . import lstm as lstm_mod
from . import snn as snn_mod
from .ingest import (
    CityKey,
    IngestError,
    InsufficientDataError,
    TimeSeries,
    align_exogenous,
    iter_temperature_csv,
    parse_co2_csv,
    repair_and_resample,
)
from .metrics import CSV_COLUMNS, EvalReport, evaluate, evaluate_binary
from .series import encode_latency, fit_minmax, make_windows, split_80_20

log = logging.getLogger(__name__)

MODELS = ("arima", "sarimax", "lstm", "snn")
SEASON = 12


class ConfigError(ValueError):
    pass


# -- configuration -----------------------------------------------------------


@dataclass
class ArimaSettings:
    order: tuple = (5, 1, 3)
    seasonal: tuple | None = None
    maxiter: int = 2000
    tol: float = 1e-8
    restarts: int = 2

    def spec(self, use_exogenous: bool) -> arima_mod.ArimaSpec:
        seasonal = arima_mod.SeasonalOrder(*self.seasonal) if self.seasonal else None
        return arima_mod.ArimaSpec(*self.order, seasonal=seasonal, use_exogenous=use_exogenous)


@dataclass
class LstmSettings:
    window_len: int = 12
    epochs: int = 50
    batch_size: int = 32
    hidden_size: int = 64
    lr: float = 1e-3
    validation_fraction: float = 0.1
    seed: int | None = None


@dataclass
class SnnSettings:
    time_window: int = 30
    time_steps: int = 16
    epochs: int = 100
    batch_size: int = 16
    hidden: int = 64
    lr: float = 3e-3
    validation_fraction: float = 0.1
    threshold: float = 0.5
    beta: float = 0.9
    alpha: float = 2.0
    decision: str = "rate"
    export_raster: bool = False
    seed: int | None = None


@dataclass
class ExperimentConfig:
    temperature_csv: str
    cities: list | str
    models: list = field(default_factory=lambda: ["arima", "lstm", "snn"])
    co2_csv: str | None = None
    co2_columns: dict = field(default_factory=lambda: {"country": "country", "year": "year", "value": "co2"})
    output_dir: str = "run"
    seed: int = 0
    split_mode: str = "chronological"
    split_seed: int | None = None
    horizon: int = 120
    metric_space: str = "celsius"
    arima: ArimaSettings = field(default_factory=ArimaSettings)
    sarimax: ArimaSettings = field(default_factory=lambda: ArimaSettings(seasonal=(1, 0, 1, 12)))
    lstm: LstmSettings = field(default_factory=LstmSettings)
    snn: SnnSettings = field(default_factory=SnnSettings)
    jobs: int = 1

    def __post_init__(self):
        if isinstance(self.cities, str):
            if not self.cities.startswith("random:"):
                self.cities = [self.cities]
            else:
                try:
                    k = int(self.cities.split(":", 1)[1])
                except ValueError:
                    raise ConfigError(f"bad city selector {self.cities!r}") from None
                if k < 1:
                    raise ConfigError("random:k needs k >= 1")
        elif not self.cities:
            raise ConfigError("need at least one city")
        if not self.models:
            raise ConfigError("need at least one model")
        unknown = set(self.models) - set(MODELS)
        if unknown:
            raise ConfigError(f"unknown model(s) {sorted(unknown)}; choose from {MODELS}")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.split_mode not in ("chronological", "shuffled"):
            raise ConfigError(f"split_mode must be chronological or shuffled, not {self.split_mode!r}")
        if self.metric_space not in ("celsius", "scaled"):
            raise ConfigError(f"metric_space must be celsius or scaled, not {self.metric_space!r}")
        if "sarimax" in self.models and not self.co2_csv:
            raise ConfigError("the sarimax model needs co2_csv")

    @classmethod
    def from_dict(cls, d: dict, base_dir: Path | None = None) -> "ExperimentConfig":
        d = dict(d)
        sub = {"arima": ArimaSettings, "sarimax": ArimaSettings, "lstm": LstmSettings, "snn": SnnSettings}
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config key(s): {sorted(extra)}")
        try:
            for key, klass in sub.items():
                if key in d and isinstance(d[key], dict):
                    block = dict(d[key])
                    for k in ("order", "seasonal"):
                        if block.get(k) is not None:
                            block[k] = tuple(block[k])
                    if key == "sarimax" and "seasonal" not in block:
                        block["seasonal"] = (1, 0, 1, 12)
                    d[key] = klass(**block)
            cfg = cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None
        if base_dir is not None:
            for attr in ("temperature_csv", "co2_csv", "output_dir"):
                value = getattr(cfg, attr)
                if value and not Path(value).is_absolute():
                    setattr(cfg, attr, str(base_dir / value))
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(doc, base_dir=path.parent)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(dataclasses.asdict(self)))

    def hash(self) -> str:
        d = self.to_dict()
        # neither parallelism nor the output location changes results
        d.pop("jobs")
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


# -- leakage audit -----------------------------------------------------------


class IndexAudit:
    """Records which series positions were read while fitting scalers and models."""

    def __init__(self):
        self.touched: dict[str, set[int]] = {}

    def touch(self, what: str, indices) -> None:
        self.touched.setdefault(what, set()).update(int(i) for i in np.asarray(indices).ravel())

    def summary(self, test_indices) -> dict:
        test = set(int(i) for i in np.asarray(test_indices).ravel())
        all_fit = set().union(*self.touched.values()) if self.touched else set()
        return {
            "fit_index_max": max(all_fit) if all_fit else None,
            "test_index_min": min(test) if test else None,
            "leaked_indices": len(all_fit & test),
            "by_stage": {k: [min(v), max(v), len(v)] for k, v in sorted(self.touched.items())},
        }


# -- per-model pipelines -----------------------------------------------------


@dataclass
class CityData:
    key: CityKey
    series: TimeSeries
    co2: TimeSeries | None = None
    co2_error: str | None = None


@dataclass
class PipelineOutput:
    reports: dict  # space -> EvalReport
    baseline: dict  # space -> EvalReport
    forecast_rows: list  # [date, kind, actual, predicted, lower, upper]
    loss_history: list | None
    checkpoint: dict | None
    fit_info: dict
    audit: dict
    extra: dict = field(default_factory=dict)


def _month_str(m) -> str:
    return str(np.datetime64(m, "M"))


def _both_spaces(name, city, y_true, y_pred, scaler):
    return {
        "celsius": evaluate(y_true, y_pred, name, city),
        "scaled": evaluate(scaler.apply(y_true), scaler.apply(y_pred), name, city),
    }


def _seasonal_naive_reports(name, city, y, target_idx, scaler):
    idx = np.asarray(target_idx)
    idx = idx[idx >= SEASON]
    return _both_spaces(name + ":seasonal_naive", city, y[idx], y[idx - SEASON], scaler)


def run_arima(data: CityData, cfg: ExperimentConfig, exogenous: bool) -> PipelineOutput:
    settings = cfg.sarimax if exogenous else cfg.arima
    name = "sarimax" if exogenous else "arima"
    city = data.key.city
    y = np.asarray(data.series.values)
    x = None
    if exogenous:
        if data.co2 is None:
            raise IngestError(data.co2_error or "no CO2 series for this city")
        x = np.asarray(data.co2.values)
    tr, te = split_80_20(y.size)  # a time-series fit needs the contiguous past
    n_train = tr.size
    audit = IndexAudit()
    spec = settings.spec(exogenous)
    fitted = arima_mod.fit(
        y[:n_train],
        spec,
        None if x is None else x[:n_train],
        maxiter=settings.maxiter,
        tol=settings.tol,
        restarts=settings.restarts,
        strict=False,
    )
    audit.touch("model", tr)
    scaler = fit_minmax(y[:n_train])
    audit.touch("scaler", tr)
    rolled = arima_mod.extend(fitted, y, x)
    idx, pred = rolled.one_step_predictions()
    mask = idx >= n_train
    idx, pred = idx[mask], pred[mask]
    reports = _both_spaces(name, city, y[idx], pred, scaler)
    baseline = _seasonal_naive_reports(name, city, y, idx, scaler)

    half = 1.96 * math.sqrt(fitted.sigma2)
    months = data.series.months
    rows = [[_month_str(months[i]), "test", y[i], p, p - half, p + half] for i, p in zip(idx, pred)]
    future_x = None if x is None else np.full(cfg.horizon, x[-1])
    fc = arima_mod.forecast(rolled, cfg.horizon, future_x)
    future_months = data.series.end + 1 + np.arange(cfg.horizon)
    rows += [
        [_month_str(m), "future", None, mu, lo, hi]
        for m, mu, lo, hi in zip(future_months, fc.mean, fc.lower, fc.upper)
    ]
    return PipelineOutput(
        reports=reports,
        baseline=baseline,
        forecast_rows=rows,
        loss_history=None,
        checkpoint=fitted.to_dict(),
        fit_info={k: v for k, v in fitted.to_dict().items() if k not in ("phi", "theta", "seasonal_phi", "seasonal_theta")},
        audit=audit.summary(idx),
    )


def _window_split(n_values: int, window: int, cfg: ExperimentConfig, seed: int):
    n_samples = n_values - window
    shuffle = cfg.split_mode == "shuffled"
    split_seed = cfg.split_seed if cfg.split_seed is not None else seed
    return split_80_20(n_samples, shuffle=shuffle, seed=split_seed)


def _touched_by_windows(sample_idx, window: int) -> np.ndarray:
    """Series positions read by windows ``sample_idx`` (inputs and target)."""
    s = np.asarray(sample_idx)
    return np.unique((s[:, None] + np.arange(window + 1)[None, :]).ravel())


def run_lstm(data: CityData, cfg: ExperimentConfig) -> PipelineOutput:
    st = cfg.lstm
    city = data.key.city
    seed = cfg.seed if st.seed is None else st.seed
    y = np.asarray(data.series.values)
    L = st.window_len
    tr, te = _window_split(y.size, L, cfg, seed)
    audit = IndexAudit()
    fit_positions = _touched_by_windows(tr, L)
    scaler = fit_minmax(y[fit_positions])
    audit.touch("scaler", fit_positions)
    z = scaler.apply(y)
    ds = make_windows(z, L)
    train_ds = ds.subset(tr)
    n_fit = len(tr) - int(math.floor(st.validation_fraction * len(tr)))
    tc = lstm_mod.TrainConfig(
        epochs=st.epochs,
        window_len=L,
        batch_size=min(st.batch_size, n_fit),
        seed=seed,
        validation_fraction=st.validation_fraction,
        lr=st.lr,
        hidden_size=st.hidden_size,
    )
    result = lstm_mod.train(train_ds, tc)
    audit.touch("model", fit_positions)
    pred_scaled = lstm_mod.predict(result.params, ds.inputs[te])
    target_idx = te + L
    pred = scaler.invert(pred_scaled)
    reports = _both_spaces("lstm", city, y[target_idx], pred, scaler)
    baseline = _seasonal_naive_reports("lstm", city, y, target_idx, scaler)

    months = data.series.months
    order = np.argsort(target_idx)
    rows = [[_month_str(months[target_idx[k]]), "test", y[target_idx[k]], pred[k], None, None] for k in order]
    future = scaler.invert(lstm_mod.forecast_recursive(result.params, z[-L:], cfg.horizon, L))
    future_months = data.series.end + 1 + np.arange(cfg.horizon)
    rows += [[_month_str(m), "future", None, v, None, None] for m, v in zip(future_months, future)]
    ckpt = {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in result.params.arrays().items()}
    ckpt["__meta__"] = {"window_len": L, "scaler": [scaler.min, scaler.max]}
    return PipelineOutput(
        reports=reports,
        baseline=baseline,
        forecast_rows=rows,
        loss_history=result.history,
        checkpoint=ckpt,
        fit_info={"window_len": L, "epochs": st.epochs, "final_train_loss": result.history[-1][0], "final_val_loss": result.history[-1][1]},
        audit=audit.summary(target_idx),
    )


def run_snn(data: CityData, cfg: ExperimentConfig) -> PipelineOutput:
    st = cfg.snn
    city = data.key.city
    seed = cfg.seed if st.seed is None else st.seed
    y = np.asarray(data.series.values)
    W = st.time_window
    tr, te = _window_split(y.size, W, cfg, seed)
    audit = IndexAudit()
    fit_positions = _touched_by_windows(tr, W)
    scaler = fit_minmax(y[fit_positions])
    audit.touch("scaler", fit_positions)
    z = scaler.apply(y)
    ds = make_windows(z, W)
    batch = encode_latency(ds, st.time_steps, threshold=st.threshold)
    lif = snn_mod.LifConfig(threshold=st.threshold, beta=st.beta, alpha=st.alpha, decision=st.decision)
    tc = lstm_mod.TrainConfig(
        epochs=st.epochs,
        window_len=W,
        batch_size=st.batch_size,
        seed=seed,
        validation_fraction=st.validation_fraction,
        lr=st.lr,
    )
    result = snn_mod.train_snn(batch.subset(tr), tc, lif, st.hidden)
    audit.touch("model", fit_positions)
    test = batch.subset(te)
    fc = snn_mod.predict_snn(result.params, test.spikes, lif)
    truth = test.binary_targets.astype(float)
    predicted = fc.binary_prediction.astype(float)
    target_idx = te + W
    report = evaluate(truth, predicted, "snn", city)
    reports = {"celsius": report, "scaled": report}
    naive_idx = target_idx[target_idx >= SEASON]
    naive_pred = (z[naive_idx - SEASON] >= st.threshold).astype(float)
    naive_true = (z[naive_idx] >= st.threshold).astype(float)
    naive = evaluate(naive_true, naive_pred, "snn:seasonal_naive", city)
    baseline = {"celsius": naive, "scaled": naive}

    months = data.series.months
    order = np.argsort(target_idx)
    rows = [[_month_str(months[target_idx[k]]), "test", truth[k], predicted[k], None, None] for k in order]
    last = encode_latency(make_windows(np.append(z[-W:], 0.0), W), st.time_steps, st.threshold)
    nxt = snn_mod.predict_snn(result.params, last.spikes, lif)
    rows.append([_month_str(data.series.end + 1), "future", None, float(nxt.binary_prediction[0]), None, None])
    ckpt = {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in result.params.arrays().items()}
    ckpt["__meta__"] = {"time_window": W, "time_steps": st.time_steps, "lif": dataclasses.asdict(lif), "scaler": [scaler.min, scaler.max]}
    extra = {
        "accuracy": 1.0 - evaluate_binary(truth, predicted),
        "misclassification_rate": evaluate_binary(truth, predicted),
        "baseline_accuracy": 1.0 - evaluate_binary(naive_true, naive_pred),
    }
    if st.export_raster:
        extra["raster"] = snn_mod.spike_raster_rows(test)
    return PipelineOutput(
        reports=reports,
        baseline=baseline,
        forecast_rows=rows,
        loss_history=result.history,
        checkpoint=ckpt,
        fit_info={"time_window": W, "time_steps": st.time_steps, "epochs": st.epochs, "final_train_loss": result.history[-1][0]},
        audit=audit.summary(target_idx),
        extra=extra,
    )


PIPELINES = {
    "arima": lambda d, c: run_arima(d, c, exogenous=False),
    "sarimax": lambda d, c: run_arima(d, c, exogenous=True),
    "lstm": run_lstm,
    "snn": run_snn,
}


# -- writing artifacts -------------------------------------------------------


def _num(v):
    if v is None:
        return ""
    return repr(float(v))


def _write_forecast_csv(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "kind", "actual", "predicted", "lower", "upper"])
        for date, kind, actual, pred, lo, hi in rows:
            w.writerow([date, kind, _num(actual), _num(pred), _num(lo), _num(hi)])


def _write_series_csv(path: Path, series: TimeSeries) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", "value"])
        for m, v in zip(series.months, series.values):
            w.writerow([_month_str(m), repr(float(v))])


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_json_default) + "\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _clean(obj):
    """Replace NaN/inf (not valid JSON) with None, recursively."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _task(args):
    data, model, cfg, pair_dir = args
    pair_dir = Path(pair_dir)
    start = time.perf_counter()
    entry = {"city": data.key.city, "country": data.key.country, "model": model}
    try:
        out = PIPELINES[model](data, cfg)
    except Exception as exc:  # isolate every pair; the run carries on
        log.debug("%s/%s failed\n%s", data.key.city, model, traceback.format_exc())
        entry.update(status="failed", reason=f"{type(exc).__name__}: {exc}", artifacts={})
        entry["wall_time_s"] = time.perf_counter() - start
        return entry
    pair_dir.mkdir(parents=True, exist_ok=True)
    space = cfg.metric_space
    report = {
        "model": model,
        "city": data.key.city,
        "country": data.key.country,
        "metric_space": space,
        "metrics": out.reports[space].to_dict(),
        "metrics_celsius": out.reports["celsius"].to_dict(),
        "metrics_scaled": out.reports["scaled"].to_dict(),
        "baseline_seasonal_naive": {k: v.to_dict() for k, v in out.baseline.items()},
        "fit": out.fit_info,
        "leakage_audit": out.audit,
    }
    raster = out.extra.pop("raster", None)
    report.update(out.extra)
    artifacts = {"report": "report.json", "forecast": "forecast.csv"}
    _dump_json(pair_dir / "report.json", _clean(report))
    _write_forecast_csv(pair_dir / "forecast.csv", out.forecast_rows)
    if out.loss_history is not None:
        from .checkpoint import write_loss_csv

        write_loss_csv(out.loss_history, pair_dir / "loss.csv")
        artifacts["loss"] = "loss.csv"
    if out.checkpoint is not None:
        _dump_json(pair_dir / "checkpoint.json", _clean(out.checkpoint))
        artifacts["checkpoint"] = "checkpoint.json"
    if raster is not None:
        with open(pair_dir / "raster.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample", "window_position", "time_step", "spike"])
            w.writerows(raster)
        artifacts["raster"] = "raster.csv"
    entry.update(status="success", reason=None, artifacts=artifacts)
    entry["wall_time_s"] = time.perf_counter() - start
    return entry


# -- data loading ------------------------------------------------------------


def _match(selector: str, key: CityKey) -> bool:
    if "/" in selector:
        city, country = (s.strip() for s in selector.split("/", 1))
        return key.city == city and key.country == country
    return key.city == selector.strip()


def load_cities(cfg: ExperimentConfig) -> tuple[list[CityKey], dict[CityKey, list]]:
    """Pick the configured cities and collect their records in one streaming pass
    (two passes for ``random:k``)."""
    path = cfg.temperature_csv
    if isinstance(cfg.cities, str):  # random:k
        k = int(cfg.cities.split(":", 1)[1])
        keys = sorted({rec.key for rec in iter_temperature_csv(path)})
        if not keys:
            raise ConfigError("temperature file has no cities")
        rng = np.random.default_rng(cfg.seed)
        chosen = [keys[i] for i in sorted(rng.choice(len(keys), size=min(k, len(keys)), replace=False))]
        wanted = set(chosen)
        records = {k: [] for k in chosen}
        for rec in iter_temperature_csv(path):
            if rec.key in wanted:
                records[rec.key].append(rec)
        return chosen, records

    records: dict[CityKey, list] = {}
    for rec in iter_temperature_csv(path):
        if any(_match(sel, rec.key) for sel in cfg.cities):
            records.setdefault(rec.key, []).append(rec)
    chosen = []
    for sel in cfg.cities:
        hits = sorted(k for k in records if _match(sel, k))
        if len(hits) > 1:
            raise ConfigError(f"city {sel!r} is ambiguous: {[f'{k.city}/{k.country}' for k in hits]}")
        if not hits:
            raise ConfigError(f"city {sel!r} not found in {path}")
        if hits[0] not in chosen:
            chosen.append(hits[0])
    return chosen, records


def _build_city_data(cfg: ExperimentConfig):
    keys, records = load_cities(cfg)
    co2_records = None
    if cfg.co2_csv and "sarimax" in cfg.models:
        cols = cfg.co2_columns
        co2_records = parse_co2_csv(cfg.co2_csv, cols.get("country", "country"), cols.get("year", "year"), cols.get("value", "co2"))
    out = []
    for key in keys:
        recs = sorted(records[key], key=lambda r: r.date)
        try:
            series = repair_and_resample(recs, key.city)
        except InsufficientDataError as exc:
            out.append((key, None, str(exc)))
            continue
        data = CityData(key, series)
        if co2_records is not None:
            try:
                data.co2 = align_exogenous(series, co2_records, key.country)
            except IngestError as exc:
                data.co2_error = str(exc)
        out.append((key, data, None))
    return out


# -- public operations -------------------------------------------------------


def run(cfg: ExperimentConfig) -> dict:
    """Run every (city, model) pair and write the artifacts; returns the manifest."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cities = _build_city_data(cfg)
    models = [m for m in MODELS if m in cfg.models]
    slugs = [key.slug for key, _, _ in cities]
    if len(set(slugs)) != len(slugs):
        raise ConfigError(f"selected cities share an output directory name: {slugs}")
    tasks, entries = [], []
    for key, data, skip_reason in cities:
        city_dir = out_dir / key.slug
        if data is None:
            for model in models:
                entries.append(
                    {"city": key.city, "country": key.country, "model": model, "status": "skipped",
                     "reason": f"insufficient data: {skip_reason}", "artifacts": {}, "wall_time_s": 0.0}
                )
            continue
        city_dir.mkdir(parents=True, exist_ok=True)
        _write_series_csv(city_dir / "series.csv", data.series)
        for model in models:
            tasks.append((data, model, cfg, str(city_dir / model)))

    if cfg.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            entries += list(pool.map(_task, tasks))
    else:
        entries += [_task(t) for t in tasks]

    for e in entries:
        slug = CityKey(e["city"], e["country"]).slug
        e["artifacts"] = {k: f"{slug}/{e['model']}/{v}" for k, v in e["artifacts"].items()}
        log.info("%s/%s: %s %s", e["city"], e["model"], e["status"], e.get("reason") or "")
    city_order = {key: i for i, (key, _, _) in enumerate(cities)}
    entries.sort(key=lambda e: (city_order[CityKey(e["city"], e["country"])], MODELS.index(e["model"])))
    manifest = {
        "tool": "tempcast",
        "version": __version__,
        "config_hash": cfg.hash(),
        "config": cfg.to_dict(),
        "entries": entries,
    }
    _dump_json(out_dir / "manifest.json", _clean(manifest))
    if any(e["status"] == "success" for e in entries):
        compare(out_dir)
    return manifest


def exit_code(manifest: dict) -> int:
    return 0 if all(e["status"] == "success" for e in manifest["entries"]) else 2


def _load_reports(run_dir: Path) -> list[dict]:
    reports = []
    for path in sorted(run_dir.glob("*/*/report.json")):
        reports.append(json.loads(path.read_text()))
    return reports


def compare(run_dir) -> dict:
    """Rank the models of each city by test MSE; writes comparison.csv/json."""
    run_dir = Path(run_dir)
    reports = _load_reports(run_dir)
    if not reports:
        raise FileNotFoundError(f"no report.json files under {run_dir}")
    by_city: dict[str, list[dict]] = {}
    for r in reports:
        by_city.setdefault(r["city"], []).append(r)
    rows, table = [], []
    for city in sorted(by_city):
        ranked = sorted(by_city[city], key=lambda r: (r["metrics"]["mse"], r["model"]))
        for rank, r in enumerate(ranked, start=1):
            rows.append(EvalReport.from_dict(r["metrics"]).csv_row() + [rank])
        present = {r["model"]: r for r in ranked}
        table.append(
            {
                "city": city,
                "metric_space": ranked[0]["metric_space"],
                "mse": {m: (present[m]["metrics"]["mse"] if m in present else "absent") for m in MODELS},
                "ranking": [r["model"] for r in ranked],
            }
        )
    with open(run_dir / "comparison.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(CSV_COLUMNS) + ["rank"])
        w.writerows(rows)
    _dump_json(run_dir / "comparison.json", table)
    return {"rows": rows, "table": table}


def format_mse_table(table_entry: dict) -> str:
    """Two-column ``Model & MSE`` text table for one city."""
    names = {"snn": "Spiking Neural Network", "lstm": "LSTM", "arima": "Statistical Model (ARIMA)", "sarimax": "Statistical Model (SARIMAX)"}
    lines = [f"{table_entry['city']}: Model & MSE"]
    for m in ("snn", "lstm", "arima", "sarimax"):
        v = table_entry["mse"][m]
        if v != "absent":
            lines.append(f"{names[m]} & {v:.4g}")
    return "\n".join(lines)


# -- plots -------------------------------------------------------------------


def _read_csv(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _col(rows, name) -> np.ndarray:
    return np.array([float(r[name]) if r[name] != "" else np.nan for r in rows])


def _months(rows, name="date") -> np.ndarray:
    return np.array([np.datetime64(r[name][:7], "M") for r in rows]).astype("datetime64[D]")


def _require(path: Path) -> Path:
    if not path.exists():
        raise FileNotFoundError(f"missing artifact: {path}")
    return path


def _save_svg(fig, path: Path) -> None:
    import matplotlib

    matplotlib.rcParams["svg.hashsalt"] = "tempcast"
    fig.savefig(path, format="svg", metadata={"Date": None})


def emit_plots(run_dir) -> list[Path]:
    """Write SVG figures for every successful pair of a finished run.

    Per pair: a history/forecast overlay (with interval band when the
    forecast has one) and, for trained networks, a loss-curve plot.  Per city
    with both ARIMA and SARIMAX successes: a with/without CO2 overlay.
    """
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    run_dir = Path(run_dir)
    manifest = json.loads(_require(run_dir / "manifest.json").read_text())
    written: list[Path] = []
    ok: dict[str, set] = {}
    for e in manifest["entries"]:
        if e["status"] != "success":
            continue
        slug = CityKey(e["city"], e["country"]).slug
        ok.setdefault(slug, set()).add(e["model"])
        pair = run_dir / slug / e["model"]
        series = _read_csv(_require(run_dir / slug / "series.csv"))
        fc = _read_csv(_require(pair / "forecast.csv"))

        fig, ax = plt.subplots(figsize=(9, 4))
        if e["model"] == "snn":
            test = [r for r in fc if r["kind"] == "test"]
            t = _months(test)
            ax.step(t, _col(test, "actual"), where="mid", label="threshold label")
            ax.step(t, _col(test, "predicted") + 0.02, where="mid", label="SNN prediction")
            ax.set_ylabel("class")
        else:
            ax.plot(_months(series), _col(series, "value"), lw=0.6, color="0.5", label="history")
            for kind, colour in (("test", "tab:blue"), ("future", "tab:red")):
                part = [r for r in fc if r["kind"] == kind]
                if not part:
                    continue
                t = _months(part)
                ax.plot(t, _col(part, "predicted"), lw=0.9, color=colour, label=f"{kind} prediction")
                lo, hi = _col(part, "lower"), _col(part, "upper")
                if np.isfinite(lo).any():
                    ax.fill_between(t, lo, hi, color=colour, alpha=0.2, lw=0)
            ax.set_ylabel("temperature (°C)")
        ax.set_title(f"{e['city']}: {e['model']}")
        ax.legend(loc="upper left", fontsize=8)
        fig.tight_layout()
        path = pair / "forecast.svg"
        _save_svg(fig, path)
        plt.close(fig)
        written.append(path)

        if "loss" in e["artifacts"]:
            loss = _read_csv(_require(pair / "loss.csv"))
            fig, ax = plt.subplots(figsize=(6, 4))
            epochs = _col(loss, "epoch")
            ax.plot(epochs, _col(loss, "train_loss"), label="train")
            val = _col(loss, "val_loss")
            if np.isfinite(val).any():
                ax.plot(epochs, val, label="validation")
            ax.set_xlabel("epoch")
            ax.set_ylabel("MSE")
            ax.set_yscale("log")
            ax.set_title(f"{e['city']}: {e['model']} loss")
            ax.legend()
            fig.tight_layout()
            path = pair / "loss.svg"
            _save_svg(fig, path)
            plt.close(fig)
            written.append(path)

    for slug in sorted(ok):
        if not {"arima", "sarimax"} <= ok[slug]:
            continue
        fig, ax = plt.subplots(figsize=(9, 4))
        for model, label in (("arima", "without CO2"), ("sarimax", "with CO2")):
            fc = [r for r in _read_csv(_require(run_dir / slug / model / "forecast.csv")) if r["kind"] == "future"]
            t = _months(fc)
            line = ax.plot(t, _col(fc, "predicted"), label=label)[0]
            ax.fill_between(t, _col(fc, "lower"), _col(fc, "upper"), color=line.get_color(), alpha=0.15, lw=0)
        ax.set_ylabel("temperature (°C)")
        ax.set_title(f"{slug}: forecast with and without CO2")
        ax.legend(loc="upper left")
        fig.tight_layout()
        path = run_dir / slug / "co2_comparison.svg"
        _save_svg(fig, path)
        plt.close(fig)
        written.append(path)
    return written
