"""Run configuration: one JSON document that fully determines a command's outputs.

Example::

    {
      "seed": 0,
      "out": "runs/baseline",
      "data": {"path": null, "synthetic_days": 120, "synthetic_seed": 0},
      "split": {"test_days": 30, "validation_days": 30},
      "train": {"epochs": 300, "lr_step": 150, "init_sd": 0.2},
      "model": {"width": 64},
      "ensemble": {"size": 5, "fraction": 0.9, "n_jobs": 1},
      "study": {"load_sds": [0, 0.6, 2.1], "temp_sds": [0, 0.6, 2.1]}
    }

Omitted keys take their defaults.  ``split`` may instead give the five
explicit range bounds (``train_start`` ... ``test_end``).  The master
``seed`` overrides ``train.seed``; ensemble member ``i`` uses ``seed XOR i``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from danet.data import Series, ingest_csv, synthesize_series
from danet.ensemble import DEFAULT_FRACTION, DEFAULT_SD_GRID, DEFAULT_SIZE
from danet.errors import ConfigError, DanetError
from danet.features import SplitSpec
from danet.layers import ModelSpec
from danet.training import TrainConfig

SPLIT_BOUNDS = ("train_start", "validation_start", "train_end", "test_start", "test_end")


@dataclass(frozen=True)
class DataConfig:
    path: str | None = None
    synthetic_days: int = 120
    synthetic_seed: int = 0


@dataclass(frozen=True)
class EnsembleConfig:
    size: int = DEFAULT_SIZE
    fraction: float = DEFAULT_FRACTION
    n_jobs: int = 1


@dataclass(frozen=True)
class StudyConfig:
    load_sds: tuple = DEFAULT_SD_GRID
    temp_sds: tuple = DEFAULT_SD_GRID
    rules: tuple = ("additive", "average", "concat")
    depths: tuple = (1, 2, 5, 10, 20)
    width: int = 128
    max_size: int = DEFAULT_SIZE


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out: str | None = None
    data: DataConfig = field(default_factory=DataConfig)
    split: Mapping = field(default_factory=lambda: {"test_days": 30, "validation_days": 30})
    train: TrainConfig = field(default_factory=TrainConfig)
    model: ModelSpec = field(default_factory=ModelSpec)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    study: StudyConfig = field(default_factory=StudyConfig)
    base_dir: str = field(default=".", compare=False)

    def train_config(self) -> TrainConfig:
        return replace(self.train, seed=self.seed)

    def load_series(self) -> Series:
        if self.data.path is not None:
            path = Path(self.data.path)
            if not path.is_absolute():
                path = Path(self.base_dir) / path
            return ingest_csv(path)
        return synthesize_series(self.data.synthetic_days, self.data.synthetic_seed)

    def split_spec(self, series: Series) -> SplitSpec:
        if "train_start" in self.split:
            return SplitSpec.from_document(self.split)
        return SplitSpec.default(series, int(self.split.get("test_days", 30)),
                                 int(self.split.get("validation_days", 30)))

    def to_document(self) -> dict:
        return {
            "seed": self.seed,
            "out": self.out,
            "data": asdict(self.data),
            "split": dict(self.split),
            "train": {k: v for k, v in self.train.to_document().items() if k != "seed"},
            "model": self.model.to_document(),
            "ensemble": asdict(self.ensemble),
            "study": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self.study).items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_document(), indent=2, sort_keys=True) + "\n"


def _section(cls, doc, name, problems, convert=None):
    """Build dataclass ``cls`` from ``doc``, appending any problems instead of raising."""
    if doc is None:
        doc = {}
    if not isinstance(doc, Mapping):
        problems.append(f"{name}: expected an object, got {type(doc).__name__}")
        return cls()
    known = {f.name for f in fields(cls)}
    for key in sorted(set(doc) - known):
        problems.append(f"{name}.{key}: unknown key")
    kwargs = {k: v for k, v in doc.items() if k in known}
    if convert:
        kwargs = convert(kwargs)
    try:
        return cls(**kwargs)
    except (DanetError, TypeError, ValueError):
        pass
    # validate one field at a time so every bad value is reported
    before = len(problems)
    for key, value in kwargs.items():
        try:
            cls(**{key: value})
        except (DanetError, TypeError, ValueError) as exc:
            problems.append(f"{name}.{key}: {exc}")
    if len(problems) == before:
        problems.append(f"{name}: fields are inconsistent with each other")
    return cls()


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _check_extra(cfg: RunConfig, problems: list[str]) -> None:
    if not _is_int(cfg.seed) or cfg.seed < 0:
        problems.append(f"seed: must be a non-negative integer, got {cfg.seed!r}")
    d = cfg.data
    if d.path is None and (not _is_int(d.synthetic_days) or d.synthetic_days < 60):
        problems.append(f"data.synthetic_days: must be an integer >= 60, got {d.synthetic_days!r}")
    e = cfg.ensemble
    if not _is_int(e.size) or e.size < 1:
        problems.append(f"ensemble.size: must be an integer >= 1, got {e.size!r}")
    if not isinstance(e.fraction, (int, float)) or not 0 < e.fraction <= 1:
        problems.append(f"ensemble.fraction: must lie in (0, 1], got {e.fraction!r}")
    if not _is_int(e.n_jobs) or e.n_jobs < 1:
        problems.append(f"ensemble.n_jobs: must be an integer >= 1, got {e.n_jobs!r}")
    s = cfg.study
    for name in ("load_sds", "temp_sds"):
        vals = getattr(s, name)
        if not vals or not all(isinstance(v, (int, float)) and math.isfinite(v) and v >= 0 for v in vals):
            problems.append(f"study.{name}: must be a non-empty list of non-negative numbers")
    bad_rules = [r for r in s.rules if r not in ("additive", "average", "concat")]
    if bad_rules:
        problems.append(f"study.rules: unknown rules {bad_rules}")
    if not s.depths or not all(_is_int(v) and v >= 1 for v in s.depths) or list(s.depths) != sorted(s.depths):
        problems.append("study.depths: must be ascending positive integers")
    if not _is_int(s.max_size) or s.max_size < 1:
        problems.append(f"study.max_size: must be an integer >= 1, got {s.max_size!r}")
    sp = cfg.split
    if "train_start" in sp:
        missing = [k for k in SPLIT_BOUNDS if k not in sp]
        if missing:
            problems.append(f"split: explicit ranges need {missing}")
        else:
            try:
                SplitSpec.from_document(sp)
            except (DanetError, ValueError) as exc:
                problems.append(f"split: {exc}")
    else:
        for key in sorted(set(sp) - {"test_days", "validation_days"}):
            problems.append(f"split.{key}: unknown key")
        for key in ("test_days", "validation_days"):
            if key in sp and (not _is_int(sp[key]) or sp[key] < 1):
                problems.append(f"split.{key}: must be a positive integer, got {sp[key]!r}")


def _tuples(kwargs):
    return {k: tuple(v) if isinstance(v, list) else v for k, v in kwargs.items()}


def parse_run_config(doc: Mapping[str, Any], base_dir: str = ".") -> RunConfig:
    """Validate a config document, collecting every problem before raising :class:`ConfigError`."""
    problems: list[str] = []
    if not isinstance(doc, Mapping):
        raise ConfigError([f"config must be a JSON object, got {type(doc).__name__}"])
    top = {"seed", "out", "data", "split", "train", "model", "ensemble", "study"}
    for key in sorted(set(doc) - top):
        problems.append(f"{key}: unknown key")
    split = doc.get("split") or {"test_days": 30, "validation_days": 30}
    if not isinstance(split, Mapping):
        problems.append("split: expected an object")
        split = {"test_days": 30, "validation_days": 30}
    train_doc = dict(doc.get("train") or {})
    train_doc.pop("seed", None)  # the master seed wins
    cfg = RunConfig(
        seed=doc.get("seed", 0),
        out=doc.get("out"),
        data=_section(DataConfig, doc.get("data"), "data", problems),
        split=dict(split),
        train=_section(TrainConfig, train_doc, "train", problems),
        model=_section(ModelSpec, doc.get("model"), "model", problems, _tuples),
        ensemble=_section(EnsembleConfig, doc.get("ensemble"), "ensemble", problems),
        study=_section(StudyConfig, doc.get("study"), "study", problems, _tuples),
        base_dir=str(base_dir),
    )
    _check_extra(cfg, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def load_run_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: not valid JSON ({exc})"]) from None
    return parse_run_config(doc, base_dir=str(path.parent))
