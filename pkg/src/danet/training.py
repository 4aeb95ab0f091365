"""MAE training with mini-batch Adam and a stepped learning-rate schedule."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Mapping

import numpy as np

from danet.autodiff import LrSchedule, ParameterStore, Tensor, absolute, adam_step, backward, mean, sub
from danet.errors import ContractError, NumericError, ShapeError, TrainingError
from danet.features import BundleSet, NormStats
from danet.layers import ModelSpec, init_params, network_forward

logger = logging.getLogger(__name__)

CHECKPOINT_POLICIES = ("final", "best-validation")


@dataclass(frozen=True)
class TrainConfig:
    """Training hyperparameters; defaults reproduce the published recipe."""

    batch_size: int = 256
    epochs: int = 1200
    initial_lr: float = 1e-3
    lr_divisor: float = 10.0
    lr_step: int = 600
    seed: int = 0
    init_sd: float = 1.0
    init_bound: float = 2.0
    checkpoint: str = "final"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise ContractError("invalid TrainConfig: " + "; ".join(problems))

    def problems(self) -> list[str]:
        out = []
        if int(self.epochs) < 1:
            out.append(f"epochs must be >= 1, got {self.epochs}")
        if int(self.batch_size) < 1:
            out.append(f"batch_size must be >= 1, got {self.batch_size}")
        if int(self.lr_step) < 1:
            out.append(f"lr_step must be >= 1, got {self.lr_step}")
        for name in ("initial_lr", "lr_divisor", "init_sd", "init_bound", "eps"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                out.append(f"{name} must be a positive number, got {v!r}")
        for name in ("beta1", "beta2"):
            if not 0 <= getattr(self, name) < 1:
                out.append(f"{name} must lie in [0, 1)")
        if self.checkpoint not in CHECKPOINT_POLICIES:
            out.append(f"checkpoint must be one of {CHECKPOINT_POLICIES}, got {self.checkpoint!r}")
        return out

    def schedule(self) -> LrSchedule:
        return LrSchedule(self.initial_lr, self.lr_divisor, self.lr_step)

    def to_document(self) -> dict:
        return asdict(self)

    @classmethod
    def from_document(cls, doc: Mapping) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ContractError(f"unknown TrainConfig keys: {sorted(unknown)}")
        return cls(**dict(doc))


@dataclass
class TrainedModel:
    """Fitted parameters together with everything needed to reuse them."""

    spec: ModelSpec
    params: dict[str, np.ndarray]
    stats: NormStats
    manifest: dict = field(default_factory=dict)

    def forward(self, bundles) -> np.ndarray:
        """Normalised forecasts for a bundle set."""
        return network_forward(bundles, self.params, self.spec).data

    @property
    def history(self) -> list[dict]:
        return self.manifest.get("history", [])


def mae_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean absolute error; the subgradient at an exact tie is 0."""
    if pred.shape != target.shape:
        raise ShapeError(f"mae_loss: prediction {pred.shape} and target {target.shape} differ")
    return mean(absolute(sub(pred, target)))


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    for lo in range(0, n, batch_size):
        yield perm[lo:lo + batch_size]


def _mae(params, spec: ModelSpec, bundles: BundleSet, chunk: int = 2048) -> float:
    total = 0.0
    for lo in range(0, len(bundles), chunk):
        part = bundles.take(np.arange(lo, min(lo + chunk, len(bundles))))
        pred = network_forward(part, params, spec).data
        total += float(np.abs(pred - part.target).sum())
    return total / len(bundles)


def train(train_set: BundleSet, config: TrainConfig, spec: ModelSpec, stats: NormStats,
          validation: BundleSet | None = None, data_ranges: Mapping | None = None) -> TrainedModel:
    """Fit a network on normalised bundles.

    Each epoch is one pass over a fresh permutation of ``train_set`` (the
    last partial batch included).  Parameter initialisation and shuffling are
    seeded from ``config.seed`` and ``spec.seed``, so equal inputs give
    bit-identical parameters.
    """
    if len(train_set) == 0:
        raise ContractError("no training bundles")
    fp = stats.fingerprint()
    for name, part in (("training", train_set), ("validation", validation)):
        if part is not None and part.stats_fingerprint != fp:
            raise ContractError(f"{name} bundles were built with different normalisation statistics")
    seeds = np.random.SeedSequence([config.seed, spec.seed]).spawn(2)
    store = init_params(spec, sd=config.init_sd, seed=np.random.default_rng(seeds[0]),
                        bound=config.init_bound)
    shuffle_rng = np.random.default_rng(seeds[1])
    schedule = config.schedule()
    params = store.tensors()
    history = []
    best = (math.inf, None, -1)
    n = len(train_set)
    for epoch in range(config.epochs):
        rate = schedule.rate(epoch)
        total = 0.0
        try:
            for idx in _batches(n, config.batch_size, shuffle_rng):
                batch = train_set.take(idx)
                loss = mae_loss(network_forward(batch, store, spec), Tensor(batch.target))
                grads = backward(loss, params)
                adam_step(store, grads, rate, config.beta1, config.beta2, config.eps)
                total += loss.item() * len(idx)
            train_loss = total / n
            val_loss = _mae(store, spec, validation) if validation is not None and len(validation) else None
        except NumericError as exc:
            raise TrainingError(str(exc), epoch) from exc
        if not math.isfinite(train_loss) or (val_loss is not None and not math.isfinite(val_loss)):
            raise TrainingError("loss is not finite", epoch)
        history.append({"epoch": epoch, "lr": rate, "train_loss": train_loss, "val_loss": val_loss})
        if config.checkpoint == "best-validation" and val_loss is not None and val_loss < best[0]:
            best = (val_loss, store.snapshot(), epoch)
        logger.debug("epoch %d lr %.1e train %.5f val %s", epoch, rate, train_loss, val_loss)

    params_out = store.snapshot()
    chosen = config.epochs - 1
    if config.checkpoint == "best-validation" and best[1] is not None:
        params_out, chosen = best[1], best[2]
    manifest = {
        "config": config.to_document(),
        "spec": spec.to_document(),
        "seed": config.seed,
        "data_ranges": dict(data_ranges or {}),
        "n_train": n,
        "n_validation": 0 if validation is None else len(validation),
        "stats_fingerprint": fp,
        "checkpoint_epoch": chosen,
        "final_train_loss": history[-1]["train_loss"],
        "final_val_loss": history[-1]["val_loss"],
        "history": history,
    }
    return TrainedModel(spec, params_out, stats, manifest)


def predict(model: TrainedModel, bundles: BundleSet) -> np.ndarray:
    """Forecasts in megawatts, one per bundle."""
    if bundles.stats_fingerprint != model.stats.fingerprint():
        raise ContractError("bundles were normalised with statistics other than the model's "
                            f"({bundles.stats_fingerprint} != {model.stats.fingerprint()})")
    if len(bundles) == 0:
        return np.zeros(0)
    out = []
    for lo in range(0, len(bundles), 2048):
        part = bundles.take(np.arange(lo, min(lo + 2048, len(bundles))))
        out.append(model.forward(part))
    return model.stats.denormalize_load(np.concatenate(out))


def with_seed(config: TrainConfig, seed: int) -> TrainConfig:
    return replace(config, seed=int(seed))
