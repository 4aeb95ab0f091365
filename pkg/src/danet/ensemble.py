"""Bagging ensembles, error-variance diagnostics, and the ensemble-size and noise studies."""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from danet.data import Series, perturb_training
from danet.errors import ContractError
from danet.features import BundleSet, NormStats, SplitSpec, build_bundles
from danet.layers import ModelSpec
from danet.metrics import EvaluationReport, evaluate
from danet.training import TrainConfig, TrainedModel, predict, train, with_seed

DEFAULT_SD_GRID = (0.0, 0.3, 0.6, 0.9, 1.2, 1.5, 1.8, 2.1)
DEFAULT_FRACTION = 0.9
DEFAULT_SIZE = 5


def member_seed(master_seed: int, index: int) -> int:
    """Seed of ensemble member ``index``: ``master_seed XOR index``."""
    return int(master_seed) ^ int(index)


def subsample_indices(n: int, fraction: float, seed: int) -> np.ndarray:
    """Sorted ``floor(fraction * n)`` distinct indices drawn uniformly from ``range(n)``."""
    if not 0 < fraction <= 1:
        raise ContractError(f"subsample fraction must lie in (0, 1], got {fraction}")
    size = max(1, math.floor(fraction * n))
    rng = np.random.default_rng([int(seed), 0xBA6])
    return np.sort(rng.choice(n, size=size, replace=False))


@dataclass
class EnsembleModel:
    members: list[TrainedModel]
    fraction: float = DEFAULT_FRACTION
    seeds: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.members:
            raise ContractError("an ensemble needs at least one member")
        fp = {m.stats.fingerprint() for m in self.members}
        if len(fp) != 1:
            raise ContractError("ensemble members use different normalisation statistics")

    def __len__(self) -> int:
        return len(self.members)

    @property
    def stats(self) -> NormStats:
        return self.members[0].stats

    def head(self, k: int) -> "EnsembleModel":
        return EnsembleModel(self.members[:k], self.fraction, self.seeds[:k])


def _train_member(args):
    train_set, config, spec, stats, validation, data_ranges = args
    return train(train_set, config, spec, stats, validation, data_ranges)


def _run(jobs, n_jobs: int):
    if n_jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(_train_member, jobs))
    return [_train_member(job) for job in jobs]


def train_ensemble(train_set: BundleSet, k: int, config: TrainConfig, spec: ModelSpec,
                   stats: NormStats, master_seed: int, fraction: float = DEFAULT_FRACTION,
                   validation: BundleSet | None = None, n_jobs: int = 1,
                   data_ranges=None) -> EnsembleModel:
    """Train ``k`` members, each on its own uniform subsample without replacement."""
    if int(k) < 1:
        raise ContractError(f"ensemble size must be >= 1, got {k}")
    seeds = [member_seed(master_seed, i) for i in range(k)]
    jobs = []
    for s in seeds:
        idx = subsample_indices(len(train_set), fraction, s)
        jobs.append((train_set.take(idx), with_seed(config, s), spec, stats, validation, data_ranges))
    return EnsembleModel(_run(jobs, n_jobs), fraction, seeds)


def member_forecasts(ens: EnsembleModel, bundles: BundleSet) -> np.ndarray:
    """``(k, n)`` forecasts in megawatts."""
    return np.stack([predict(m, bundles) for m in ens.members])


def combine_forecasts(forecasts) -> np.ndarray:
    """Unweighted mean over the member axis, independent of member order."""
    forecasts = np.asarray(forecasts, dtype=np.float64)
    # sorting fixes the summation order so the mean is bit-identical under permutation
    return np.sort(forecasts, axis=0).mean(axis=0)


def predict_ensemble(ens: EnsembleModel, bundles: BundleSet) -> np.ndarray:
    return combine_forecasts(member_forecasts(ens, bundles))


@dataclass(frozen=True)
class VarianceDiagnostics:
    """Empirical check of ``E[mean error^2] = v / k + (k - 1) / k * c``.

    ``v`` is the mean squared member error, ``c`` the mean over unordered
    member pairs of ``mean(e_i * e_j)``.  With these sample moments the
    predicted value equals the observed one up to rounding.
    """

    k: int
    n: int
    v: float
    c: float
    predicted_mse: float
    observed_mse: float


def variance_diagnostics(errors) -> VarianceDiagnostics:
    """``errors`` is ``(k, n)``: member ``i``'s error on sample ``j``."""
    e = np.asarray(errors, dtype=np.float64)
    if e.ndim != 2 or e.shape[0] < 2:
        raise ContractError(f"need errors of at least 2 members as a (k, n) array, got shape {e.shape}")
    k, n = e.shape
    v = float(np.mean(e * e))
    gram = (e @ e.T) / n
    c = float(gram[np.triu_indices(k, 1)].mean())
    predicted = v / k + (k - 1) / k * c
    observed = float(np.mean(e.mean(axis=0) ** 2))
    return VarianceDiagnostics(k, n, v, c, predicted, observed)


@dataclass(frozen=True)
class BiasVariance:
    """Mean member MSE split into spread around the member mean and that mean's squared bias."""

    mse: float
    variance: float
    bias_squared: float


def bias_variance_decomposition(forecasts, actuals) -> BiasVariance:
    """Decompose ``mean((f_i - y)^2)`` over members ``i`` and samples, estimating ``E[f]`` by the member mean."""
    f = np.asarray(forecasts, dtype=np.float64)
    y = np.asarray(actuals, dtype=np.float64)
    fbar = f.mean(axis=0)
    return BiasVariance(float(np.mean((f - y) ** 2)), float(np.mean((f - fbar) ** 2)),
                        float(np.mean((fbar - y) ** 2)))


@dataclass(frozen=True)
class SweepRow:
    k: int
    mape: float
    mae: float
    max: float
    sd: float


def size_sweep_from_ensemble(ens: EnsembleModel, test_set: BundleSet) -> list[SweepRow]:
    """Row ``k`` evaluates the mean of the first ``k`` members."""
    preds = member_forecasts(ens, test_set)
    rows = []
    for k in range(1, len(ens) + 1):
        r = evaluate(combine_forecasts(preds[:k]), test_set.actual)
        rows.append(SweepRow(k, r.mape, r.mae, r.max_abs_bias, r.bias_sd))
    return rows


def ensemble_size_sweep(train_set: BundleSet, test_set: BundleSet, max_size: int,
                        config: TrainConfig, spec: ModelSpec, stats: NormStats, seed: int,
                        fraction: float = DEFAULT_FRACTION, validation: BundleSet | None = None,
                        n_jobs: int = 1) -> list[SweepRow]:
    """MAPE, MAE, max |bias| and bias SD for ensembles of size 1..``max_size``.

    Sizes are nested: one set of members is trained and each row uses a prefix.
    """
    if int(max_size) < 1:
        raise ContractError(f"max ensemble size must be >= 1, got {max_size}")
    ens = train_ensemble(train_set, max_size, config, spec, stats, seed, fraction, validation, n_jobs)
    return size_sweep_from_ensemble(ens, test_set)


def sweep_to_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "mape", "mae", "max", "sd"])
    for r in rows:
        w.writerow([r.k, repr(r.mape), repr(r.mae), repr(r.max), repr(r.sd)])
    return buf.getvalue()


@dataclass(frozen=True)
class RobustnessResult:
    """Clean-test MAPE for each (load noise sd, temperature noise sd) cell."""

    load_sds: tuple
    temp_sds: tuple
    mape: np.ndarray  # shape (len(load_sds), len(temp_sds))
    reports: dict = field(default_factory=dict, repr=False)

    def relative_spread(self) -> float:
        """``(max - min) / min`` over all cells."""
        return float((self.mape.max() - self.mape.min()) / self.mape.min())

    def to_long_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["load_sd", "temp_sd", "metric", "value"])
        for (i, lsd), (j, tsd) in itertools.product(enumerate(self.load_sds), enumerate(self.temp_sds)):
            w.writerow([repr(float(lsd)), repr(float(tsd)), "mape", repr(float(self.mape[i, j]))])
        return buf.getvalue()


def _grid_cell(args):
    series, split, lsd, tsd, config, spec, noise_seed = args
    noisy = perturb_training(series, lsd, tsd, noise_seed, end=split.train_end)
    stats = NormStats.fit(noisy, *split.fit_range)
    bundles = build_bundles(noisy, split, stats, test_series=series)
    model = train(bundles.train, config, spec, stats, bundles.validation)
    return evaluate(predict(model, bundles.test), bundles.test.actual)


def robustness_grid(series: Series, split: SplitSpec, config: TrainConfig, spec: ModelSpec,
                    seed: int, load_sds=DEFAULT_SD_GRID, temp_sds=DEFAULT_SD_GRID,
                    n_jobs: int = 1) -> RobustnessResult:
    """Train one model per noise cell on perturbed training rows, test on clean rows.

    Every cell uses the same training seed and the same standard-normal noise
    draws (scaled by the cell's sds), so the noise level is the only thing
    that changes between cells.
    """
    load_sds = tuple(float(x) for x in load_sds)
    temp_sds = tuple(float(x) for x in temp_sds)
    if min(load_sds + temp_sds) < 0:
        raise ContractError("noise sds must be non-negative")
    config = with_seed(config, seed)
    cells = list(itertools.product(load_sds, temp_sds))
    jobs = [(series, split, lsd, tsd, config, spec, seed) for lsd, tsd in cells]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            reports = list(pool.map(_grid_cell, jobs))
    else:
        reports = [_grid_cell(job) for job in jobs]
    mape = np.array([r.mape for r in reports]).reshape(len(load_sds), len(temp_sds))
    return RobustnessResult(load_sds, temp_sds, mape, dict(zip(cells, reports)))


def evaluate_ensemble(ens: EnsembleModel, bundles: BundleSet) -> EvaluationReport:
    return evaluate(predict_ensemble(ens, bundles), bundles.actual)
