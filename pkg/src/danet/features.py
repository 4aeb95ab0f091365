"""Model inputs for one-hour-ahead forecasting.

For a target hour ``h`` a bundle holds the 48 normalised loads and
temperatures of hours ``h-48 .. h-1``, the slope of the load window (the
first slope uses hour ``h-49``), the slope/load pairs as a ``48 x 2`` map,
and one-hot weekday and month of ``h``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from danet.data import HOUR, Series
from danet.errors import ContractError

WINDOW = 48
WARMUP = WINDOW + 1


def compute_slope(loads) -> np.ndarray:
    """First differences ``loads[i+1] - loads[i]`` of a window plus its anchor value."""
    loads = np.asarray(loads, dtype=np.float64)
    if loads.ndim != 1 or len(loads) != WINDOW + 1:
        raise ContractError(f"compute_slope needs {WINDOW + 1} values, got shape {loads.shape}")
    return np.diff(loads)


def weekday_index(stamps) -> np.ndarray:
    """Monday = 0 ... Sunday = 6."""
    days = np.asarray(stamps, dtype="datetime64[h]").astype("datetime64[D]").astype(np.int64)
    return (days + 3) % 7  # 1970-01-01 was a Thursday


def month_index(stamps) -> np.ndarray:
    """January = 0 ... December = 11."""
    return np.asarray(stamps, dtype="datetime64[h]").astype("datetime64[M]").astype(np.int64) % 12


@dataclass(frozen=True)
class NormStats:
    """Z-score parameters for load and temperature."""

    load_mean: float
    load_sd: float
    temp_mean: float
    temp_sd: float

    def __post_init__(self):
        if not (self.load_sd > 0 and self.temp_sd > 0):
            raise ContractError(f"standard deviations must be positive: {self}")

    @classmethod
    def fit(cls, series: Series, start=None, end=None) -> "NormStats":
        m = series.mask(start, end)
        if m.sum() < 2:
            raise ContractError("need at least two rows to fit normalisation statistics")
        return cls(float(series.load[m].mean()), float(series.load[m].std()),
                   float(series.temperature[m].mean()), float(series.temperature[m].std()))

    def normalize_load(self, x):
        return (np.asarray(x, dtype=np.float64) - self.load_mean) / self.load_sd

    def denormalize_load(self, z):
        return np.asarray(z, dtype=np.float64) * self.load_sd + self.load_mean

    def normalize_temp(self, x):
        return (np.asarray(x, dtype=np.float64) - self.temp_mean) / self.temp_sd

    def fingerprint(self) -> str:
        text = ",".join(repr(float(v)) for v in (self.load_mean, self.load_sd, self.temp_mean, self.temp_sd))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def to_document(self) -> dict:
        return {"load_mean": self.load_mean, "load_sd": self.load_sd,
                "temp_mean": self.temp_mean, "temp_sd": self.temp_sd}


def _hour(value) -> np.datetime64:
    return np.datetime64(value, "h")


@dataclass(frozen=True)
class SplitSpec:
    """Half-open hour ranges; validation is the tail of the training range."""

    train_start: np.datetime64
    validation_start: np.datetime64
    train_end: np.datetime64
    test_start: np.datetime64
    test_end: np.datetime64

    def __post_init__(self):
        for name in ("train_start", "validation_start", "train_end", "test_start", "test_end"):
            object.__setattr__(self, name, _hour(getattr(self, name)))
        if not (self.train_start < self.validation_start < self.train_end):
            raise ContractError("validation must be a non-empty proper tail of the training range")
        if not (self.train_end <= self.test_start < self.test_end):
            raise ContractError("test range must follow the training range and be non-empty")

    @property
    def train(self):
        return self.train_start, self.train_end

    @property
    def fit_range(self):
        """Training range minus the validation tail."""
        return self.train_start, self.validation_start

    @property
    def validation(self):
        return self.validation_start, self.train_end

    @property
    def test(self):
        return self.test_start, self.test_end

    @classmethod
    def default(cls, series: Series, test_days: int = 30, validation_days: int = 30) -> "SplitSpec":
        """Last ``test_days`` for test, the ``validation_days`` before them for validation."""
        test_end = series.end
        test_start = test_end - np.timedelta64(test_days * 24, "h")
        val_start = test_start - np.timedelta64(validation_days * 24, "h")
        return cls(series.start + WARMUP * HOUR, val_start, test_start, test_start, test_end)

    def to_document(self) -> dict:
        return {k: str(getattr(self, k)) for k in
                ("train_start", "validation_start", "train_end", "test_start", "test_end")}

    @classmethod
    def from_document(cls, doc) -> "SplitSpec":
        return cls(**{k: doc[k] for k in
                      ("train_start", "validation_start", "train_end", "test_start", "test_end")})


class FeatureBundle(NamedTuple):
    """Inputs and target for a single forecast hour."""

    timestamp: np.datetime64
    L: np.ndarray
    T: np.ndarray
    S: np.ndarray
    LS: np.ndarray
    W: np.ndarray
    M: np.ndarray
    target: float


@dataclass(frozen=True)
class BundleSet:
    """Column-stacked bundles; row ``i`` describes target hour ``timestamps[i]``.

    ``actual`` keeps the target in megawatts; ``target`` is normalised.
    """

    timestamps: np.ndarray
    L: np.ndarray
    T: np.ndarray
    S: np.ndarray
    LS: np.ndarray
    W: np.ndarray
    M: np.ndarray
    target: np.ndarray
    actual: np.ndarray
    stats_fingerprint: str

    def __len__(self) -> int:
        return len(self.timestamps)

    def __getitem__(self, i: int) -> FeatureBundle:
        return FeatureBundle(self.timestamps[i], self.L[i], self.T[i], self.S[i], self.LS[i],
                             self.W[i], self.M[i], float(self.target[i]))

    def take(self, idx) -> "BundleSet":
        idx = np.asarray(idx)
        return BundleSet(self.timestamps[idx], self.L[idx], self.T[idx], self.S[idx], self.LS[idx],
                         self.W[idx], self.M[idx], self.target[idx], self.actual[idx],
                         self.stats_fingerprint)


def bundles_for_range(series: Series, start, end, stats: NormStats) -> BundleSet:
    """One bundle per target hour in ``[start, end)``."""
    start, end = _hour(start), _hour(end)
    if end <= start:
        raise ContractError(f"empty range [{start}, {end})")
    first = series.index_of(start)
    last = series.index_of(end)
    if first < WARMUP:
        raise ContractError(f"target hour {start} needs {WARMUP} hours of warm-up before it; "
                            f"series starts at {series.start}")
    if last > len(series):
        raise ContractError(f"range end {end} is past the series end {series.end}")
    load_z = stats.normalize_load(series.load)
    temp_z = stats.normalize_temp(series.temperature)
    targets = np.arange(first, last)
    # windows[j] covers rows j .. j+48; target h uses window starting at h-49
    load_windows = sliding_window_view(load_z, WARMUP)[targets - WARMUP]
    L = load_windows[:, 1:]
    S = np.diff(load_windows, axis=1)
    T = sliding_window_view(temp_z, WINDOW)[targets - WINDOW]
    LS = np.stack([S, L], axis=-1)
    stamps = series.timestamps[targets]
    W = np.eye(7)[weekday_index(stamps)]
    M = np.eye(12)[month_index(stamps)]
    return BundleSet(stamps, L.copy(), T.copy(), S, LS, W, M, load_z[targets].copy(),
                     series.load[targets].copy(), stats.fingerprint())


class Bundles(NamedTuple):
    train: BundleSet
    validation: BundleSet
    test: BundleSet


def build_bundles(series: Series, split: SplitSpec, stats: NormStats,
                  test_series: Series | None = None) -> Bundles:
    """Training, validation and test bundles for ``split``.

    ``test_series`` lets test bundles come from clean rows while training
    bundles come from a perturbed copy of the same series.
    """
    return Bundles(
        bundles_for_range(series, *split.fit_range, stats),
        bundles_for_range(series, *split.validation, stats),
        bundles_for_range(series if test_series is None else test_series, *split.test, stats),
    )
