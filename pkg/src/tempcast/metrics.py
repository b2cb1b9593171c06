"""Point-forecast error metrics and their report record."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

CSV_COLUMNS = ("model", "city", "n", "horizon", "mse", "rmse", "mae", "r2", "ev")


@dataclass(frozen=True)
class EvalReport:
    model_name: str
    city: str
    mse: float
    rmse: float
    mae: float
    r_squared: float | None  # None when y_true is constant
    explained_variance: float | None
    n_points: int
    horizon_months: int = 1

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def csv_row(self) -> list:
        def fmt(v):
            return "" if v is None else repr(float(v))

        return [
            self.model_name,
            self.city,
            self.n_points,
            self.horizon_months,
            fmt(self.mse),
            fmt(self.rmse),
            fmt(self.mae),
            fmt(self.r_squared),
            fmt(self.explained_variance),
        ]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(CSV_COLUMNS)
        w.writerow(self.csv_row())
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__})


def _pair(y_true, y_pred):
    t = np.asarray(y_true, dtype=float).ravel()
    p = np.asarray(y_pred, dtype=float).ravel()
    if t.size == 0 or t.size != p.size:
        raise ValueError(f"need equal non-zero lengths, got {t.size} and {p.size}")
    return t, p


def evaluate(y_true, y_pred, model_name: str = "", city: str = "", horizon_months: int = 1) -> EvalReport:
    """MSE, RMSE, MAE, R^2 and explained variance of ``y_pred`` against ``y_true``."""
    t, p = _pair(y_true, y_pred)
    e = t - p
    mse = float(np.mean(e * e))
    var_t = float(np.var(t))
    if var_t > 0:
        r2 = 1.0 - mse / var_t
        ev = 1.0 - float(np.var(e)) / var_t
    else:
        r2 = ev = None
    return EvalReport(
        model_name=model_name,
        city=city,
        mse=mse,
        rmse=math.sqrt(mse),
        mae=float(np.mean(np.abs(e))),
        r_squared=r2,
        explained_variance=ev,
        n_points=int(t.size),
        horizon_months=horizon_months,
    )


def evaluate_binary(y_true, y_pred) -> float:
    """Misclassification rate of two 0/1 vectors (their mean absolute error)."""
    t, p = _pair(y_true, y_pred)
    if not (np.isin(t, (0.0, 1.0)).all() and np.isin(p, (0.0, 1.0)).all()):
        raise ValueError("evaluate_binary expects values in {0, 1}")
    return float(np.mean(np.abs(t - p)))


def seasonal_naive(values, season: int = 12) -> np.ndarray:
    """Prediction for ``values[t]`` is ``values[t - season]`` (first ``season`` are NaN)."""
    v = np.asarray(values, dtype=float)
    out = np.full(v.size, np.nan)
    out[season:] = v[:-season]
    return out
