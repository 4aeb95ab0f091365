import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from danet.errors import ContractError, MetricDomainError
from danet.metrics import evaluate


def direct_metrics(forecast, actual):
    """Plain-Python summation, independent of numpy reductions."""
    n = len(actual)
    ape = ae = se = 0.0
    for f, y in zip(forecast, actual):
        ape += abs(y - f) / abs(y)
        ae += abs(y - f)
        se += (y - f) ** 2
    return 100.0 * ape / n, ae / n, math.sqrt(se / n)


def test_perfect_forecast():
    r = evaluate([5.0, 7.0], [5.0, 7.0])
    assert (r.mape, r.mae, r.rmse, r.max_abs_bias, r.bias_sd) == (0, 0, 0, 0, 0)


def test_single_point():
    r = evaluate([99.0], [100.0])
    assert r.mape == pytest.approx(1.0, abs=1e-12)
    assert r.mae == 1.0 and r.rmse == 1.0 and r.n == 1
    assert r.residuals.tolist() == [1.0]


def test_random_vectors_match_direct_summation():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(1, 500))
        actual = rng.uniform(100, 2000, n)
        forecast = actual + rng.normal(0, 50, n)
        r = evaluate(forecast, actual)
        mape, mae, rmse = direct_metrics(forecast.tolist(), actual.tolist())
        assert abs(r.mape - mape) <= 1e-12 * max(1.0, mape)
        assert abs(r.mae - mae) <= 1e-12 * max(1.0, mae)
        assert abs(r.rmse - rmse) <= 1e-12 * max(1.0, rmse)
        assert r.rmse >= r.mae


def test_bias_statistics():
    r = evaluate([90.0, 105.0, 100.0], [100.0, 100.0, 100.0])
    assert r.max_abs_bias == 10.0
    resid = np.array([10.0, -5.0, 0.0])
    assert r.bias_sd == pytest.approx(math.sqrt(((resid - resid.mean()) ** 2).mean()), abs=1e-12)


def test_zero_actual_lists_indices():
    with pytest.raises(MetricDomainError) as err:
        evaluate([1.0, 2.0, 3.0], [0.0, 2.0, 0.0])
    assert list(err.value.indices) == [0, 2]


def test_length_mismatch_and_empty():
    with pytest.raises(ContractError):
        evaluate([1.0], [1.0, 2.0])
    with pytest.raises(ContractError):
        evaluate([], [])


def test_document_fields():
    r = evaluate([99.0, 101.0], [100.0, 100.0])
    doc = r.to_document(with_residuals=True)
    assert set(doc) == {"mape", "mae", "rmse", "max_abs_bias", "bias_sd", "n", "residuals"}
    assert doc["n"] == len(doc["residuals"]) == 2


@given(st.lists(st.tuples(st.floats(1, 1e4), st.floats(-1e3, 1e3)), min_size=1, max_size=50))
def test_report_invariants(pairs):
    actual = np.array([a for a, _ in pairs])
    forecast = actual + np.array([e for _, e in pairs])
    r = evaluate(forecast, actual)
    assert r.rmse >= r.mae * (1 - 1e-12) >= 0
    assert r.mape >= 0 and r.max_abs_bias >= r.mae * (1 - 1e-12)
    assert r.n == len(r.residuals)
