"""Hourly load/temperature series: CSV ingest, synthetic generation, perturbation."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from danet.errors import ContractError, IngestError

HOUR = np.timedelta64(1, "h")
CSV_HEADER = ("timestamp", "load", "temperature")


class SeriesRow(NamedTuple):
    timestamp: np.datetime64
    load: float
    temperature: float


@dataclass(frozen=True)
class Series:
    """Hour-continuous columns: ``timestamps`` (datetime64[h]), ``load`` (MW), ``temperature``."""

    timestamps: np.ndarray
    load: np.ndarray
    temperature: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype="datetime64[h]")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "load", np.asarray(self.load, dtype=np.float64))
        object.__setattr__(self, "temperature", np.asarray(self.temperature, dtype=np.float64))
        if not (len(ts) == len(self.load) == len(self.temperature)):
            raise ContractError("series columns differ in length")
        if len(ts) > 1:
            steps = np.diff(ts)
            if (steps != HOUR).any():
                i = int(np.flatnonzero(steps != HOUR)[0])
                raise ContractError(f"series is not hour-continuous after {ts[i]}")

    def __len__(self) -> int:
        return len(self.timestamps)

    def __iter__(self) -> Iterator[SeriesRow]:
        for ts, load, temp in zip(self.timestamps, self.load, self.temperature):
            yield SeriesRow(ts, float(load), float(temp))

    @property
    def start(self) -> np.datetime64:
        return self.timestamps[0]

    @property
    def end(self) -> np.datetime64:
        """Exclusive end: one hour past the last row."""
        return self.timestamps[-1] + HOUR

    def index_of(self, ts) -> int:
        return int((np.datetime64(ts, "h") - self.start) // HOUR)

    def mask(self, start=None, end=None) -> np.ndarray:
        """Boolean mask of rows with ``start <= timestamp < end``."""
        m = np.ones(len(self), dtype=bool)
        if start is not None:
            m &= self.timestamps >= np.datetime64(start, "h")
        if end is not None:
            m &= self.timestamps < np.datetime64(end, "h")
        return m


def _parse_timestamp(text: str) -> np.datetime64:
    dt = datetime.fromisoformat(text.strip())
    if dt.minute or dt.second or dt.microsecond:
        raise ValueError(f"timestamp {text!r} is not on the hour")
    return np.datetime64(dt.replace(tzinfo=None), "h")


def ingest_csv(path) -> Series:
    """Read a ``timestamp,load,temperature`` CSV and verify hourly continuity.

    Errors carry the 1-based line number of the offending row.
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"no such file: {path}")
    stamps, loads, temps = [], [], []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != CSV_HEADER:
            raise IngestError(f"header must be {','.join(CSV_HEADER)}, got {header}", line=1)
        for line, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != 3:
                raise IngestError(f"expected 3 fields, got {len(record)}", line=line)
            try:
                ts = _parse_timestamp(record[0])
                load, temp = float(record[1]), float(record[2])
            except ValueError as exc:
                raise IngestError(str(exc), line=line) from None
            if not (np.isfinite(load) and np.isfinite(temp)):
                raise IngestError("non-finite value", line=line)
            if load <= 0:
                raise IngestError(f"load must be positive, got {load}", line=line)
            if stamps:
                expected = stamps[-1] + HOUR
                if ts == stamps[-1]:
                    raise IngestError(f"duplicate timestamp {ts}", line=line)
                if ts < stamps[-1]:
                    raise IngestError(f"timestamp {ts} goes backwards", line=line)
                if ts != expected:
                    raise IngestError(f"missing hour {expected} (next row is {ts})", line=line)
            stamps.append(ts)
            loads.append(load)
            temps.append(temp)
    if not stamps:
        raise IngestError("file has no data rows", line=2)
    return Series(np.array(stamps, dtype="datetime64[h]"), loads, temps)


def series_to_csv(series: Series) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for ts, load, temp in zip(series.timestamps, series.load, series.temperature):
        writer.writerow([f"{ts.astype(datetime):%Y-%m-%dT%H:%M}", repr(float(load)), repr(float(temp))])
    return buf.getvalue()


def write_csv(series: Series, path) -> None:
    Path(path).write_text(series_to_csv(series))


def synthesize_series(days: int, seed: int = 0, start: str = "2006-11-15T00") -> Series:
    """Generate ``days * 24`` hourly rows of synthetic load and temperature.

    With ``t`` the hour index, ``d = t / 24`` and ``hod`` the hour of day::

        temperature = 12 - 10 cos(2 pi (doy - 15) / 365) + 4 sin(2 pi (hod - 9) / 24) + N(0, 0.5)
        load = 1000 + 150 sin(2 pi (hod - 8) / 24) + 60 sin(4 pi (hod - 5) / 24)
               + 40 cos(2 pi d / 7) + 1.5 (temperature - 16)^2 + AR1

    where ``doy`` is the fractional day of year and AR1 is a first-order
    autoregressive noise with coefficient 0.8 and innovation sd 5 MW.
    """
    if days < 60:
        raise ContractError(f"need at least 60 days, got {days}")
    rng = np.random.default_rng(seed)
    n = days * 24
    t0 = np.datetime64(start, "h")
    stamps = t0 + np.arange(n) * HOUR
    hours = np.arange(n, dtype=np.float64)
    hod = (stamps - stamps.astype("datetime64[D]")).astype(np.int64).astype(np.float64)
    year_start = stamps.astype("datetime64[Y]").astype("datetime64[h]")
    doy = (stamps - year_start).astype(np.float64) / 24.0
    temperature = (12.0 - 10.0 * np.cos(2 * np.pi * (doy - 15.0) / 365.0)
                   + 4.0 * np.sin(2 * np.pi * (hod - 9.0) / 24.0)
                   + rng.normal(0.0, 0.5, n))
    innovations = rng.normal(0.0, 5.0, n)
    ar = np.empty(n)
    ar[0] = innovations[0]
    for i in range(1, n):
        ar[i] = 0.8 * ar[i - 1] + innovations[i]
    load = (1000.0
            + 150.0 * np.sin(2 * np.pi * (hod - 8.0) / 24.0)
            + 60.0 * np.sin(4 * np.pi * (hod - 5.0) / 24.0)
            + 40.0 * np.cos(2 * np.pi * hours / (24.0 * 7.0))
            + 1.5 * (temperature - 16.0) ** 2
            + ar)
    return Series(stamps, load, temperature)


def perturb_training(series: Series, load_sd: float, temp_sd: float, seed: int,
                     start=None, end=None) -> Series:
    """Add independent zero-mean Gaussian noise to rows in ``[start, end)``.

    Rows outside the range are returned untouched; with both sds at 0 the
    result equals the input exactly.
    """
    if load_sd < 0 or temp_sd < 0:
        raise ContractError("noise standard deviations must be non-negative")
    m = series.mask(start, end)
    rng = np.random.default_rng(seed)
    k = int(m.sum())
    load_noise = rng.normal(0.0, 1.0, k) * load_sd
    temp_noise = rng.normal(0.0, 1.0, k) * temp_sd
    load = series.load.copy()
    temp = series.temperature.copy()
    load[m] += load_noise
    temp[m] += temp_noise
    return Series(series.timestamps.copy(), load, temp)
