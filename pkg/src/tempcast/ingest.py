"""Reading the city temperature and country CO2 tables into monthly series."""

from __future__ import annotations

import csv
import io
import math
import os
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import date
from typing import BinaryIO, Iterable, Iterator

import numpy as np

TEMPERATURE_COLUMNS = (
    "dt",
    "AverageTemperature",
    "AverageTemperatureUncertainty",
    "City",
    "Country",
    "Latitude",
    "Longitude",
)
TEMP_BOUNDS = (-95.0, 60.0)
MIN_MONTHS = 24


class IngestError(ValueError):
    pass


class FormatError(IngestError):
    pass


class RowError(IngestError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class InsufficientDataError(IngestError):
    pass


class AlignmentError(IngestError):
    pass


@dataclass(frozen=True)
class RawRecord:
    date: date
    avg_temperature: float | None
    temperature_uncertainty: float | None
    city: str
    country: str
    latitude: str
    longitude: str

    @property
    def key(self) -> "CityKey":
        return CityKey(self.city, self.country)


@dataclass(frozen=True, order=True)
class CityKey:
    city: str
    country: str

    def __post_init__(self):
        object.__setattr__(self, "city", self.city.strip())
        object.__setattr__(self, "country", self.country.strip())
        if not self.city or not self.country:
            raise ValueError("city and country must be non-empty")

    @property
    def slug(self) -> str:
        return "".join(c if c.isalnum() else "_" for c in self.city)


@dataclass(frozen=True)
class Co2Record:
    country: str
    year: int
    emissions: float


@dataclass(frozen=True)
class TimeSeries:
    """Gap-free monthly series.

    ``start`` is a ``datetime64[M]``; value ``i`` belongs to month ``start + i``.
    """

    start: np.datetime64
    values: np.ndarray
    label: str = ""
    frequency: str = field(default="M", init=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("TimeSeries needs a non-empty 1-D value array")
        if not np.all(np.isfinite(values)):
            raise ValueError("TimeSeries values must be finite; repair gaps first")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "start", np.datetime64(self.start, "M"))

    def __len__(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    @property
    def months(self) -> np.ndarray:
        return self.start + np.arange(len(self))

    @property
    def end(self) -> np.datetime64:
        return self.start + (len(self) - 1)

    def with_values(self, values, label: str | None = None) -> "TimeSeries":
        return TimeSeries(self.start, values, self.label if label is None else label)

    def slice(self, start: int, stop: int) -> "TimeSeries":
        return TimeSeries(self.start + start, self.values[start:stop], self.label)


@contextmanager
def _text_stream(source) -> Iterator[io.TextIOBase]:
    if isinstance(source, (str, os.PathLike)):
        with open(source, encoding="utf-8-sig", newline="") as fh:
            yield fh
        return
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    wrapper = io.TextIOWrapper(source, encoding="utf-8-sig", newline="")
    try:
        yield wrapper
    finally:
        # leave the caller's binary handle open
        wrapper.detach()


def _optional_float(cell: str, line: int, name: str) -> float | None:
    cell = cell.strip()
    if not cell:
        return None
    try:
        value = float(cell)
    except ValueError:
        raise RowError(line, f"{name} is not a number: {cell!r}") from None
    if not math.isfinite(value):
        raise RowError(line, f"{name} is not finite")
    return value


def iter_temperature_csv(source: bytes | BinaryIO | str | os.PathLike) -> Iterator[RawRecord]:
    """Stream records out of a major-city temperature CSV.

    ``source`` may be raw bytes, a binary file object or a path.  Rows are
    yielded one at a time so large files never have to be held in memory.
    """
    with _text_stream(source) as stream:
        reader = csv.reader(stream)
        header = next(reader, None)
        if header is None:
            raise FormatError("empty file: header row missing")
        header = [h.strip() for h in header]
        missing = [c for c in TEMPERATURE_COLUMNS if c not in header]
        if missing:
            raise FormatError(f"missing column(s): {', '.join(missing)}")
        idx = [header.index(c) for c in TEMPERATURE_COLUMNS]
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise RowError(line, f"expected {len(header)} fields, got {len(row)}")
            dt, temp, unc, city, country, lat, lon = (row[i] for i in idx)
            try:
                day = date.fromisoformat(dt.strip())
            except ValueError:
                raise RowError(line, f"unparseable date {dt!r}") from None
            t = _optional_float(temp, line, "AverageTemperature")
            if t is not None and not TEMP_BOUNDS[0] <= t <= TEMP_BOUNDS[1]:
                raise RowError(line, f"temperature {t} outside {TEMP_BOUNDS}")
            u = _optional_float(unc, line, "AverageTemperatureUncertainty")
            yield RawRecord(day, t, u, city.strip(), country.strip(), lat.strip(), lon.strip())


def parse_temperature_csv(source) -> list[RawRecord]:
    return list(iter_temperature_csv(source))


def split_by_city(records: Iterable[RawRecord]) -> dict[CityKey, list[RawRecord]]:
    """Bucket records per (city, country), each bucket sorted by date.

    The sort is stable, so duplicate dates keep their input order.
    """
    buckets: dict[CityKey, list[RawRecord]] = defaultdict(list)
    for rec in records:
        buckets[rec.key].append(rec)
    return {k: sorted(v, key=lambda r: r.date) for k, v in buckets.items()}


def repair_and_resample(records: list[RawRecord], label: str | None = None) -> TimeSeries:
    """Interpolate missing readings and collapse them to monthly means.

    Leading and trailing runs of missing temperatures are dropped.  Interior
    gaps are filled linearly by row position between the nearest valid
    readings (rows are evenly spaced in the source files).
    Calendar months without any rows are filled the same way at the monthly
    level so the result has no holes.
    """
    if label is None:
        label = records[0].city if records else ""
    temps = np.array(
        [np.nan if r.avg_temperature is None else r.avg_temperature for r in records],
        dtype=float,
    )
    valid = np.flatnonzero(np.isfinite(temps))
    if valid.size == 0:
        raise InsufficientDataError(f"{label}: no non-missing temperatures")
    lo, hi = valid[0], valid[-1] + 1
    temps = temps[lo:hi]
    ok = np.isfinite(temps)
    if not ok.all():
        pos = np.arange(temps.size)
        temps = temps.copy()
        temps[~ok] = np.interp(pos[~ok], pos[ok], temps[ok])

    months = np.array(
        [r.date.year * 12 + (r.date.month - 1) for r in records[lo:hi]], dtype=np.int64
    )
    first, last = months[0], months[-1]
    if np.any(np.diff(months) < 0):
        raise IngestError(f"{label}: records are not sorted by date")
    n_months = int(last - first) + 1
    sums = np.bincount(months - first, weights=temps, minlength=n_months)
    counts = np.bincount(months - first, minlength=n_months)
    monthly = np.full(n_months, np.nan)
    have = counts > 0
    monthly[have] = sums[have] / counts[have]
    if not have.all():
        grid = np.arange(n_months)
        monthly[~have] = np.interp(grid[~have], grid[have], monthly[have])
    if n_months < MIN_MONTHS:
        raise InsufficientDataError(
            f"{label}: {n_months} usable months, need at least {MIN_MONTHS}"
        )
    start = np.datetime64(f"{first // 12:04d}-{first % 12 + 1:02d}", "M")
    return TimeSeries(start, monthly, label)


def parse_co2_csv(
    source,
    country_col: str = "country",
    year_col: str = "year",
    value_col: str = "co2",
) -> list[Co2Record]:
    """Read annual per-country emissions.

    Rows whose emissions cell is empty are skipped (the public CO2 tables
    leave early years blank); anything else that fails to parse is an error.
    """
    with _text_stream(source) as stream:
        reader = csv.DictReader(stream)
        if reader.fieldnames is None:
            raise FormatError("empty file: header row missing")
        fields = [f.strip() for f in reader.fieldnames]
        reader.fieldnames = fields
        missing = [c for c in (country_col, year_col, value_col) if c not in fields]
        if missing:
            raise FormatError(f"missing column(s): {', '.join(missing)}")
        out: list[Co2Record] = []
        seen: set[tuple[str, int]] = set()
        for row in reader:
            line = reader.line_num
            country = (row[country_col] or "").strip()
            raw_year = (row[year_col] or "").strip()
            raw_value = (row[value_col] or "").strip()
            try:
                year = int(raw_year)
            except ValueError:
                raise RowError(line, f"unparseable year {raw_year!r}") from None
            if not raw_value:
                continue
            try:
                value = float(raw_value)
            except ValueError:
                raise RowError(line, f"unparseable emissions {raw_value!r}") from None
            if not math.isfinite(value) or value < 0:
                raise RowError(line, f"emissions must be finite and >= 0, got {value}")
            if (country, year) in seen:
                raise RowError(line, f"duplicate entry for ({country}, {year})")
            seen.add((country, year))
            out.append(Co2Record(country, year, value))
        return out


def align_exogenous(temps: TimeSeries, co2: Iterable[Co2Record], country: str) -> TimeSeries:
    """Spread annual emissions over the months of ``temps`` as a step function.

    Years before (after) the covered range take the first (last) covered
    year's value.  Emissions that end before the temperature record begins
    are carried forward flat; emissions that only start after it ends have
    no observation to carry and raise :class:`AlignmentError`.
    """
    country = country.strip()
    by_year = {r.year: r.emissions for r in co2 if r.country.strip() == country}
    if not by_year:
        raise AlignmentError(f"no CO2 records for {country!r}")
    years = temps.months.astype("datetime64[Y]").astype(int) + 1970
    known = np.array(sorted(by_year))
    if known[0] > years[-1]:
        raise AlignmentError(
            f"CO2 years {known[0]}-{known[-1]} start after temperatures "
            f"{years[0]}-{years[-1]} end for {country!r}"
        )
    vals = np.array([by_year[y] for y in known])
    # last covered year at or before each month's year, clipped at both ends
    pos = np.clip(np.searchsorted(known, years, side="right") - 1, 0, known.size - 1)
    return TimeSeries(temps.start, vals[pos], f"{country} CO2")
