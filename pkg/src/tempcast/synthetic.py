"""Deterministic synthetic cities written in the same CSV layouts as the real data."""

from __future__ import annotations

import csv

import numpy as np

from .ingest import TEMPERATURE_COLUMNS, TimeSeries


def synthetic_city(
    years: int = 80,
    start: str = "1900-01",
    mean: float = 10.0,
    amplitude: float = 8.0,
    trend_per_century: float = 1.5,
    noise: float = 1.0,
    seed: int = 0,
    label: str = "Synthetica",
) -> TimeSeries:
    """12-month sinusoid plus a linear trend plus Gaussian noise."""
    n = 12 * years
    t = np.arange(n)
    rng = np.random.default_rng(seed)
    values = (
        mean
        + amplitude * np.sin(2.0 * np.pi * t / 12.0)
        + trend_per_century * t / 1200.0
        + rng.normal(0.0, noise, n)
    )
    return TimeSeries(np.datetime64(start, "M"), values, label)


def write_temperature_csv(path, cities: list[tuple[TimeSeries, str]], missing: dict | None = None) -> None:
    """Write ``(series, country)`` pairs in the major-city CSV layout.

    ``missing`` maps a city label to month offsets whose temperature cell is
    left empty.
    """
    missing = missing or {}
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TEMPERATURE_COLUMNS)
        for series, country in cities:
            gaps = set(missing.get(series.label, ()))
            for i, (month, value) in enumerate(zip(series.months, series.values)):
                temp = "" if i in gaps else f"{value:.3f}"
                w.writerow([f"{month}-01", temp, "0.300", series.label, country, "50.00N", "10.00E"])


def write_co2_csv(path, rows: list[tuple[str, int, float]], columns=("country", "year", "co2")) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for country, year, value in rows:
            w.writerow([country, year, repr(float(value))])


def linear_co2(country: str, first_year: int, last_year: int, start: float = 100.0, slope: float = 5.0):
    return [(country, y, start + slope * (y - first_year)) for y in range(first_year, last_year + 1)]
