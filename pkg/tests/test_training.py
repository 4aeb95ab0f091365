import dataclasses

import numpy as np
import pytest

from danet.autodiff import Tensor, backward
from danet.data import synthesize_series
from danet.errors import ContractError, ModelFileError, ShapeError, TrainingError
from danet.features import NormStats, SplitSpec, build_bundles
from danet.layers import ModelSpec
from danet.modelio import load_model, model_from_bytes, model_to_bytes, save_model
from danet.training import TrainConfig, mae_loss, predict, train

FAST = TrainConfig(epochs=3, batch_size=128, init_sd=0.2, seed=1)


@pytest.fixture(scope="module")
def small_model(bundles, stats, tiny_spec):
    return train(bundles.train, FAST, tiny_spec, stats, bundles.validation)


def test_mae_loss_examples():
    assert mae_loss(Tensor([1.0, 3.0]), Tensor([1.0, 3.0])).item() == 0.0
    assert mae_loss(Tensor([1.0, 3.0]), Tensor([2.0, 2.0])).item() == 1.0
    with pytest.raises(ShapeError):
        mae_loss(Tensor([1.0]), Tensor([1.0, 2.0]))


def test_mae_subgradient_signs():
    x = Tensor(np.array([0.5, -0.5, 0.0]), requires_grad=True)
    (g,) = backward(mae_loss(x, Tensor(np.zeros(3))), [x])
    np.testing.assert_array_equal(g * 3, [1.0, -1.0, 0.0])


def test_config_defaults_and_validation():
    c = TrainConfig()
    assert (c.batch_size, c.epochs, c.initial_lr, c.lr_divisor, c.lr_step, c.init_sd) == (256, 1200, 1e-3, 10, 600, 1.0)
    rates = {c.schedule().rate(e) for e in range(c.epochs)}
    assert rates == {1e-3, 1e-3 / 10}
    with pytest.raises(ContractError) as err:
        TrainConfig(epochs=0, batch_size=0, checkpoint="sometimes")
    assert all(w in str(err.value) for w in ("epochs", "batch_size", "checkpoint"))
    assert TrainConfig.from_document(c.to_document()) == c


def test_training_is_bit_reproducible(small_model, bundles, stats, tiny_spec):
    again = train(bundles.train, FAST, tiny_spec, stats, bundles.validation)
    assert all(np.array_equal(small_model.params[k], again.params[k]) for k in small_model.params)
    assert small_model.history == again.history


def test_different_seeds_give_different_parameters(small_model, bundles, stats, tiny_spec):
    other = train(bundles.train, dataclasses.replace(FAST, seed=2), tiny_spec, stats)
    assert not all(np.array_equal(small_model.params[k], other.params[k]) for k in other.params)


def test_history_and_manifest(small_model, bundles):
    h = small_model.history
    assert [r["epoch"] for r in h] == [0, 1, 2]
    assert all(np.isfinite(r["train_loss"]) and np.isfinite(r["val_loss"]) for r in h)
    m = small_model.manifest
    assert m["n_train"] == len(bundles.train)
    assert m["config"] == FAST.to_document()
    assert m["final_train_loss"] == h[-1]["train_loss"]


def test_best_validation_checkpoint(bundles, stats, tiny_spec):
    cfg = dataclasses.replace(FAST, checkpoint="best-validation")
    model = train(bundles.train, cfg, tiny_spec, stats, bundles.validation)
    losses = [r["val_loss"] for r in model.history]
    assert model.manifest["checkpoint_epoch"] == int(np.argmin(losses))


def test_divergence_reports_epoch(bundles, stats, tiny_spec):
    cfg = TrainConfig(epochs=5, init_sd=1e150, init_bound=2.0)
    with np.errstate(all="ignore"), pytest.raises(TrainingError) as err:
        train(bundles.train.take(np.arange(64)), cfg, tiny_spec, stats)
    assert err.value.epoch == 0


def test_predict_count_and_determinism(small_model, bundles):
    a = predict(small_model, bundles.test)
    assert a.shape == (len(bundles.test),)
    assert np.array_equal(a, predict(small_model, bundles.test))


def test_predict_rejects_foreign_statistics(small_model, series, split):
    other = NormStats.fit(series, split.train_start, split.test_end)
    foreign = build_bundles(series, split, other).test
    with pytest.raises(ContractError, match="statistics"):
        predict(small_model, foreign)


def test_model_file_round_trip(small_model, bundles, tmp_path):
    path = tmp_path / "m.danet"
    save_model(small_model, path)
    back = load_model(path)
    assert np.array_equal(predict(back, bundles.test), predict(small_model, bundles.test))
    assert back.manifest == small_model.manifest
    assert back.spec == small_model.spec and back.stats == small_model.stats
    assert model_to_bytes(back) == path.read_bytes()


@pytest.mark.parametrize("damage", ["truncate", "flip", "magic", "version"])
def test_damaged_model_file(small_model, damage):
    blob = bytearray(model_to_bytes(small_model))
    if damage == "truncate":
        blob = blob[:len(blob) // 2]
    elif damage == "flip":
        blob[-3] ^= 0xFF
    elif damage == "magic":
        blob[0:1] = b"X"
    else:
        blob[8] += 1
    with pytest.raises(ModelFileError):
        model_from_bytes(bytes(blob))


def test_training_reduces_loss_on_ninety_days():
    s = synthesize_series(90, seed=0)
    split = SplitSpec.default(s, test_days=10, validation_days=10)
    stats = NormStats.fit(s, *split.fit_range)
    b = build_bundles(s, split, stats)
    spec = ModelSpec(width=8, se_ratio=4, block_count=2, block_layers=4)
    model = train(b.train, TrainConfig(epochs=200, lr_step=100, init_sd=0.2), spec, stats)
    h = model.history
    assert len(h) == 200
    assert h[-1]["train_loss"] < h[0]["train_loss"]
