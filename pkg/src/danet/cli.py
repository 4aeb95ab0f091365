"""Batch command line: ``danet <command> --config run.json [--out DIR] [--seed N] [--force]``.

Exit status: 0 success, 1 usage or configuration error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from danet.config import RunConfig, load_run_config
from danet.data import series_to_csv, synthesize_series
from danet.ensemble import (
    EnsembleModel,
    combine_forecasts,
    member_forecasts,
    robustness_grid,
    size_sweep_from_ensemble,
    sweep_to_csv,
    train_ensemble,
    variance_diagnostics,
)
from danet.errors import (
    ConfigError,
    ContractError,
    IngestError,
    MetricDomainError,
    ModelFileError,
    NumericError,
    TrainingError,
)
from danet.features import NormStats, build_bundles, bundles_for_range
from danet.layers import gradient_growth_study
from danet.metrics import evaluate
from danet.modelio import load_model, model_to_bytes
from danet.training import TrainedModel, predict, train

logger = logging.getLogger("danet")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def _write(path: Path, data) -> None:
    if isinstance(data, str):
        path.write_text(data)
    else:
        path.write_bytes(data)
    logger.info("wrote %s", path)


def _prepare_dir(out, force: bool) -> Path:
    if out is None:
        raise UsageError("no output directory: pass --out or set \"out\" in the config")
    out = Path(out)
    if out.exists() and (not out.is_dir() or any(out.iterdir())) and not force:
        raise UsageError(f"{out} exists and is not empty; pass --force to overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_config(args) -> RunConfig:
    if args.config is None:
        raise UsageError("--config is required for this command")
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    return cfg


def _start_run(args) -> tuple[RunConfig, Path]:
    cfg = _run_config(args)
    out = _prepare_dir(cfg.out, args.force)
    _write(out / "config.json", cfg.to_json())
    return cfg, out


def _data(cfg: RunConfig):
    series = cfg.load_series()
    split = cfg.split_spec(series)
    stats = NormStats.fit(series, *split.fit_range)
    return series, split, stats, build_bundles(series, split, stats)


def _loss_rows(history, prefix=()):
    return [list(prefix) + [h["epoch"], _num(h["lr"]), _num(h["train_loss"]), _num(h["val_loss"])]
            for h in history]


def cmd_synthesize(args) -> int:
    if args.out is None:
        raise UsageError("--out <file.csv> is required")
    out = Path(args.out)
    if out.exists() and not args.force:
        raise UsageError(f"{out} exists; pass --force to overwrite")
    out.parent.mkdir(parents=True, exist_ok=True)
    series = synthesize_series(args.days, 0 if args.seed is None else args.seed)
    _write(out, series_to_csv(series))
    return EXIT_OK


def cmd_train(args) -> int:
    cfg, out = _start_run(args)
    series, split, stats, b = _data(cfg)
    model = train(b.train, cfg.train_config(), cfg.model, stats, b.validation, split.to_document())
    _write(out / "model.danet", model_to_bytes(model))
    _write(out / "loss.csv", _csv_text(["epoch", "lr", "train_loss", "val_loss"], _loss_rows(model.history)))
    return EXIT_OK


def _train_ensemble(cfg: RunConfig, size: int):
    series, split, stats, b = _data(cfg)
    ens = train_ensemble(b.train, size, cfg.train_config(), cfg.model, stats, cfg.seed,
                         cfg.ensemble.fraction, b.validation, cfg.ensemble.n_jobs, split.to_document())
    return ens, b


def _save_ensemble(ens: EnsembleModel, out: Path) -> None:
    members = []
    for i, m in enumerate(ens.members):
        blob = model_to_bytes(m)
        name = f"member_{i:02d}.danet"
        _write(out / name, blob)
        members.append({"file": name, "seed": ens.seeds[i], "sha256": hashlib.sha256(blob).hexdigest()})
    manifest = {"kind": "ensemble", "k": len(ens), "fraction": ens.fraction, "members": members}
    _write(out / "ensemble.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    rows = []
    for i, m in enumerate(ens.members):
        rows += _loss_rows(m.history, (i,))
    _write(out / "loss.csv", _csv_text(["member", "epoch", "lr", "train_loss", "val_loss"], rows))


def cmd_train_ensemble(args) -> int:
    cfg, out = _start_run(args)
    ens, _ = _train_ensemble(cfg, cfg.ensemble.size)
    _save_ensemble(ens, out)
    return EXIT_OK


def load_ensemble(path) -> EnsembleModel:
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ModelFileError(f"cannot read ensemble manifest {path}: {exc}") from None
    members = []
    for entry in manifest.get("members", []):
        blob_path = path.parent / entry["file"]
        if not blob_path.exists():
            raise ModelFileError(f"ensemble member missing: {blob_path}")
        blob = blob_path.read_bytes()
        if hashlib.sha256(blob).hexdigest() != entry["sha256"]:
            raise ModelFileError(f"ensemble member {blob_path} does not match its manifest checksum")
        members.append(load_model(blob_path))
    if not members:
        raise ModelFileError(f"{path} lists no members")
    return EnsembleModel(members, manifest.get("fraction", 0.9), [e["seed"] for e in manifest["members"]])


def _load_any(path) -> TrainedModel | EnsembleModel:
    return load_ensemble(path) if str(path).endswith(".json") else load_model(path)


def _forecast(model, bundles) -> np.ndarray:
    if isinstance(model, EnsembleModel):
        return combine_forecasts(member_forecasts(model, bundles))
    return predict(model, bundles)


def _test_bundles(cfg: RunConfig, stats: NormStats):
    series = cfg.load_series()
    split = cfg.split_spec(series)
    return bundles_for_range(series, *split.test, stats)


def _stamp(ts) -> str:
    return str(np.datetime_as_string(ts, unit="m"))


def cmd_predict(args) -> int:
    if not args.model:
        raise UsageError("--model is required")
    cfg, out = _start_run(args)
    model = _load_any(args.model[0])
    test = _test_bundles(cfg, model.stats)
    f = _forecast(model, test)
    rows = [[_stamp(t), _num(p), _num(a)] for t, p, a in zip(test.timestamps, f, test.actual)]
    _write(out / "forecasts.csv", _csv_text(["timestamp", "forecast", "actual"], rows))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if not args.model:
        raise UsageError("--model is required")
    cfg, out = _start_run(args)
    models = [(Path(p).stem, _load_any(p)) for p in args.model]
    labels = [name for name, _ in models]
    if len(set(labels)) != len(labels):
        raise UsageError(f"model names must be distinct, got {labels}")
    fps = {m.stats.fingerprint() for _, m in models}
    if len(fps) != 1:
        raise UsageError("models were trained with different normalisation statistics")
    test = _test_bundles(cfg, models[0][1].stats)
    reports, residuals = {}, []
    for name, model in models:
        r = evaluate(_forecast(model, test), test.actual)
        doc = r.to_document()
        if isinstance(model, EnsembleModel) and len(model) > 1:
            errors = member_forecasts(model, test) - test.actual
            doc["variance_diagnostics"] = asdict(variance_diagnostics(errors))
        reports[name] = doc
        residuals.append(r.residuals)
    _write(out / "report.json", json.dumps(reports, indent=2, sort_keys=True) + "\n")
    rows = [[_stamp(t), _num(a)] + [_num(r[i]) for r in residuals]
            for i, (t, a) in enumerate(zip(test.timestamps, test.actual))]
    _write(out / "residuals.csv", _csv_text(["timestamp", "actual"] + [f"residual_{n}" for n in labels], rows))
    return EXIT_OK


def cmd_size_sweep(args) -> int:
    cfg, out = _start_run(args)
    ens, b = _train_ensemble(cfg, cfg.study.max_size)
    _write(out / "sweep.csv", sweep_to_csv(size_sweep_from_ensemble(ens, b.test)))
    return EXIT_OK


def cmd_robustness(args) -> int:
    cfg, out = _start_run(args)
    series = cfg.load_series()
    split = cfg.split_spec(series)
    res = robustness_grid(series, split, cfg.train_config(), cfg.model, cfg.seed,
                          cfg.study.load_sds, cfg.study.temp_sds, cfg.ensemble.n_jobs)
    _write(out / "robustness.csv", res.to_long_csv())
    summary = {"load_sds": list(res.load_sds), "temp_sds": list(res.temp_sds),
               "mape": res.mape.tolist(), "relative_spread": res.relative_spread()}
    _write(out / "robustness.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_grad_study(args) -> int:
    cfg, out = _start_run(args)
    rows = []
    for rule in cfg.study.rules:
        for r in gradient_growth_study(rule, cfg.study.depths, seed=cfg.seed, width=cfg.study.width):
            rows.append([r.rule, r.depth, _num(r.grad_norm), r.param_count])
    _write(out / "grad_study.csv", _csv_text(["rule", "depth", "grad_norm", "param_count"], rows))
    return EXIT_OK


COMMANDS = {
    "synthesize": (cmd_synthesize, "write a synthetic hourly load/temperature CSV"),
    "train": (cmd_train, "train one network; writes model.danet and loss.csv"),
    "train-ensemble": (cmd_train_ensemble, "train a bagging ensemble; writes member files and ensemble.json"),
    "predict": (cmd_predict, "forecast the test range with a model or ensemble"),
    "evaluate": (cmd_evaluate, "score models on the test range; writes report.json and residuals.csv"),
    "size-sweep": (cmd_size_sweep, "metrics for ensembles of size 1..study.max_size"),
    "robustness": (cmd_robustness, "clean-test MAPE over a grid of training-noise levels"),
    "grad-study": (cmd_grad_study, "input-gradient norm versus depth for each combine rule"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="danet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="run configuration (JSON)")
        p.add_argument("--out", help="output directory (output file for synthesize)")
        p.add_argument("--seed", type=int, help="master seed; overrides the config")
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        if name == "synthesize":
            p.add_argument("--days", type=int, default=120)
        if name in ("predict", "evaluate"):
            p.add_argument("--model", action="append", help="model file or ensemble.json (repeatable)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command][0](args)
    except (UsageError, ConfigError) as exc:
        code = EXIT_USAGE
        msg = str(exc)
    except (IngestError, ModelFileError, MetricDomainError, OSError) as exc:
        code = EXIT_DATA
        msg = str(exc)
    except (TrainingError, NumericError) as exc:
        code = EXIT_NUMERIC
        msg = str(exc)
    except ContractError as exc:
        code = EXIT_USAGE
        msg = str(exc)
    print(f"danet {args.command}: {msg}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
