import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from danet.ensemble import (
    EnsembleModel,
    RobustnessResult,
    SweepRow,
    bias_variance_decomposition,
    combine_forecasts,
    member_seed,
    predict_ensemble,
    robustness_grid,
    size_sweep_from_ensemble,
    subsample_indices,
    sweep_to_csv,
    train_ensemble,
    variance_diagnostics,
)
from danet.errors import ContractError
from danet.metrics import evaluate
from danet.training import TrainConfig, predict, train

FAST = TrainConfig(epochs=2, batch_size=128, init_sd=0.2)


def test_member_seed_derivation():
    assert [member_seed(10, i) for i in range(4)] == [10, 11, 8, 9]


@given(st.integers(1, 3000), st.floats(0.05, 1.0), st.integers(0, 2**31))
def test_subsample_contract(n, fraction, seed):
    idx = subsample_indices(n, fraction, seed)
    assert len(idx) == max(1, math.floor(fraction * n))
    assert len(np.unique(idx)) == len(idx)
    assert idx.min() >= 0 and idx.max() < n


def test_subsample_rejects_bad_fraction():
    with pytest.raises(ContractError):
        subsample_indices(10, 0.0, 0)


def test_two_members_average():
    assert combine_forecasts([[100.0], [110.0]]).tolist() == [105.0]


@settings(max_examples=40)
@given(st.integers(1, 6), st.integers(1, 20), st.integers(0, 10**6))
def test_combination_is_order_free_and_convex(k, n, seed):
    rng = np.random.default_rng(seed)
    f = rng.normal(1000, 50, size=(k, n))
    y = rng.normal(1000, 50, size=n)
    mean = combine_forecasts(f)
    assert np.array_equal(mean, combine_forecasts(f[rng.permutation(k)]))
    # pointwise: squared error of the mean never exceeds the mean squared member error
    assert ((mean - y) ** 2 <= ((f - y) ** 2).mean(axis=0) + 1e-9).all()


def test_variance_law_independent_errors():
    e = np.random.default_rng(0).normal(size=(5, 10**5))
    d = variance_diagnostics(e)
    assert d.predicted_mse == pytest.approx(d.observed_mse, rel=1e-9)
    assert d.observed_mse == pytest.approx(0.2, rel=0.1)
    assert abs(d.c) < 0.01 and d.v == pytest.approx(1.0, rel=0.02)


def test_variance_law_correlated_errors():
    row = np.random.default_rng(1).normal(size=1000)
    d = variance_diagnostics(np.tile(row, (4, 1)))
    assert d.c == pytest.approx(d.v, rel=1e-12)
    assert d.observed_mse == pytest.approx(d.v, abs=1e-9)
    assert d.predicted_mse == pytest.approx(d.v, abs=1e-9)


def test_variance_law_cancellation():
    e = np.random.default_rng(2).normal(size=50)
    assert variance_diagnostics(np.stack([e, -e])).observed_mse == 0.0


def test_variance_needs_two_members():
    with pytest.raises(ContractError):
        variance_diagnostics(np.zeros((1, 5)))


def test_bias_variance_adds_up():
    rng = np.random.default_rng(3)
    f, y = rng.normal(size=(4, 30)), rng.normal(size=30)
    bv = bias_variance_decomposition(f, y)
    assert bv.mse == pytest.approx(bv.variance + bv.bias_squared, rel=1e-12)


@pytest.fixture(scope="module")
def ensemble(bundles, stats, tiny_spec):
    return train_ensemble(bundles.train, 3, FAST, tiny_spec, stats, master_seed=7)


def test_members_use_distinct_subsamples(ensemble, bundles):
    n = len(bundles.train)
    assert ensemble.seeds == [7, 6, 5]
    assert all(m.manifest["n_train"] == math.floor(0.9 * n) for m in ensemble.members)
    assert len({m.manifest["seed"] for m in ensemble.members}) == 3


def test_single_member_ensemble_is_subsampled_model(bundles, stats, tiny_spec):
    ens = train_ensemble(bundles.train, 1, FAST, tiny_spec, stats, master_seed=4)
    idx = subsample_indices(len(bundles.train), 0.9, 4)
    solo = train(bundles.train.take(idx), TrainConfig(**{**FAST.to_document(), "seed": 4}), tiny_spec, stats)
    assert np.array_equal(predict_ensemble(ens, bundles.test), predict(solo, bundles.test))


def test_identical_members_match_member(ensemble, bundles):
    twin = EnsembleModel([ensemble.members[0]] * 3)
    np.testing.assert_allclose(predict_ensemble(twin, bundles.test), predict(ensemble.members[0], bundles.test),
                               rtol=1e-15)


def test_parallel_training_matches_serial(ensemble, bundles, stats, tiny_spec):
    par = train_ensemble(bundles.train, 3, FAST, tiny_spec, stats, master_seed=7, n_jobs=2)
    assert np.array_equal(predict_ensemble(par, bundles.test), predict_ensemble(ensemble, bundles.test))


def test_zero_size_rejected(bundles, stats, tiny_spec):
    with pytest.raises(ContractError):
        train_ensemble(bundles.train, 0, FAST, tiny_spec, stats, master_seed=0)


def test_sweep_rows_are_nested(ensemble, bundles):
    rows = size_sweep_from_ensemble(ensemble, bundles.test)
    assert [r.k for r in rows] == [1, 2, 3]
    first = evaluate(predict(ensemble.members[0], bundles.test), bundles.test.actual)
    assert rows[0].mape == first.mape and rows[0].max == first.max_abs_bias
    assert rows[2].mae == evaluate(predict_ensemble(ensemble, bundles.test), bundles.test.actual).mae


def test_sweep_csv_columns():
    text = sweep_to_csv([SweepRow(1, 1.5, 10.0, 40.0, 12.0), SweepRow(2, 1.4, 9.0, 38.0, 11.0)])
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["k", "mape", "mae", "max", "sd"]
    assert len(rows) == 3 and float(rows[2][3]) == 38.0


def test_robustness_long_csv_default_grid_shape():
    sds = tuple(np.linspace(0, 2.1, 8))
    res = RobustnessResult(sds, sds, np.arange(1, 65, dtype=float).reshape(8, 8))
    rows = list(csv.reader(io.StringIO(res.to_long_csv())))
    assert rows[0] == ["load_sd", "temp_sd", "metric", "value"]
    assert len(rows) == 65
    assert res.relative_spread() == 63.0


def test_robustness_clean_cell_equals_baseline(series, split, tiny_spec):
    from danet.features import NormStats, build_bundles

    res = robustness_grid(series, split, FAST, tiny_spec, seed=3, load_sds=(0.0, 1.0), temp_sds=(0.0,))
    assert res.mape.shape == (2, 1)
    stats = NormStats.fit(series, *split.fit_range)
    b = build_bundles(series, split, stats)
    base = train(b.train, TrainConfig(**{**FAST.to_document(), "seed": 3}), tiny_spec, stats, b.validation)
    assert res.mape[0, 0] == evaluate(predict(base, b.test), b.test.actual).mape
    assert res.mape[1, 0] != res.mape[0, 0]
