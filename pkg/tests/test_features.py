import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from danet.data import Series
from danet.errors import ContractError
from danet.features import (
    WARMUP,
    NormStats,
    SplitSpec,
    build_bundles,
    bundles_for_range,
    compute_slope,
    month_index,
    weekday_index,
)


def test_slope_examples():
    assert np.array_equal(compute_slope(np.full(49, 7.0)), np.zeros(48))
    loads = np.concatenate([[100.0, 110.0, 105.0], np.full(46, 105.0)])
    assert compute_slope(loads)[:2].tolist() == [10.0, -5.0]


def test_slope_wrong_length():
    with pytest.raises(ContractError):
        compute_slope([100.0, 110.0, 105.0])


@given(arrays(np.float64, 49, elements=st.floats(0, 1e4)), st.floats(-1e3, 1e3))
def test_slope_translation_invariant_and_signed(loads, c):
    s = compute_slope(loads)
    np.testing.assert_allclose(compute_slope(loads + c), s, atol=1e-9)
    assert ((s > 0) == (loads[1:] > loads[:-1])).all()


def test_calendar_indices_match_stdlib():
    stamps = np.datetime64("2006-12-25T00", "h") + np.arange(0, 24 * 400, 7) * np.timedelta64(1, "h")
    for ts, wd, mo in zip(stamps, weekday_index(stamps), month_index(stamps)):
        d = ts.astype(dt.datetime)
        assert wd == d.weekday() and mo == d.month - 1


def ramp_series(start="2007-02-20T00", days=20):
    n = days * 24
    stamps = np.datetime64(start, "h") + np.arange(n) * np.timedelta64(1, "h")
    return Series(stamps, 1000.0 + np.arange(n), 10.0 + np.sin(np.arange(n)))


def test_monday_in_march_one_hot():
    s = ramp_series()
    stats = NormStats.fit(s)
    b = bundles_for_range(s, "2007-03-05T10", "2007-03-05T11", stats)[0]  # a Monday
    assert b.W.tolist() == [1, 0, 0, 0, 0, 0, 0]
    assert np.flatnonzero(b.M).tolist() == [2]


def test_bundle_matches_per_hour_reference():
    s = ramp_series()
    stats = NormStats(1200.0, 50.0, 10.0, 2.0)
    bs = bundles_for_range(s, "2007-02-23T05", "2007-02-24T05", stats)
    assert len(bs) == 24
    for i in range(len(bs)):
        h = s.index_of(bs.timestamps[i])
        raw = s.load[h - 49:h]
        L = (raw[1:] - 1200.0) / 50.0
        S = np.array([(raw[j + 1] - raw[j]) / 50.0 for j in range(48)])
        T = (s.temperature[h - 48:h] - 10.0) / 2.0
        b = bs[i]
        np.testing.assert_allclose(b.L, L, atol=1e-12)
        np.testing.assert_allclose(b.S, S, atol=1e-12)
        np.testing.assert_allclose(b.T, T, atol=1e-12)
        assert np.array_equal(b.LS[:, 0], b.S) and np.array_equal(b.LS[:, 1], b.L)
        assert b.target == pytest.approx((s.load[h] - 1200.0) / 50.0, abs=1e-12)
        assert bs.actual[i] == s.load[h]


def test_warm_up_enforced():
    s = ramp_series()
    stats = NormStats.fit(s)
    bundles_for_range(s, s.start + WARMUP * np.timedelta64(1, "h"), s.end, stats)
    with pytest.raises(ContractError, match="warm-up"):
        bundles_for_range(s, s.start + (WARMUP - 1) * np.timedelta64(1, "h"), s.end, stats)


def test_thirty_day_test_month(series):
    split = SplitSpec.default(series, test_days=30, validation_days=10)
    stats = NormStats.fit(series, *split.fit_range)
    assert len(build_bundles(series, split, stats).test) == 720


def test_norm_round_trip():
    stats = NormStats(1234.5, 87.25, 3.0, 4.5)
    x = np.random.default_rng(0).uniform(500, 2000, 100)
    np.testing.assert_allclose(stats.denormalize_load(stats.normalize_load(x)), x, rtol=1e-12)


def test_stats_ignore_rows_past_fit_range(series, split, stats):
    # the pipeline's stats must equal a fit over the fit range alone, not one that sees test rows
    m = series.mask(*split.fit_range)
    assert stats.load_mean == pytest.approx(series.load[m].mean(), abs=1e-12)
    leaky = NormStats.fit(series, split.train_start, split.test_end)
    assert leaky.load_mean != stats.load_mean
    bundles = build_bundles(series, split, stats)
    assert bundles.test.stats_fingerprint == stats.fingerprint() != leaky.fingerprint()


def test_split_ranges_ordered(series, split, bundles):
    assert split.fit_range[1] == split.validation[0]
    assert split.validation[1] == split.test[0]
    assert bundles.train.timestamps.max() < bundles.validation.timestamps.min()
    assert bundles.validation.timestamps.max() < bundles.test.timestamps.min()
    assert SplitSpec.from_document(split.to_document()) == split


def test_split_rejects_overlap():
    with pytest.raises(ContractError):
        SplitSpec("2007-01-05", "2007-01-10", "2007-01-20", "2007-01-15", "2007-01-30")


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 200))
def test_random_bundles_satisfy_invariants(seed, offset):
    rng = np.random.default_rng(seed)
    n = 400
    stamps = np.datetime64("2008-02-27T00", "h") + np.arange(n) * np.timedelta64(1, "h")
    s = Series(stamps, rng.uniform(500, 1500, n), rng.normal(10, 5, n))
    stats = NormStats.fit(s)
    start = s.start + (WARMUP + offset) * np.timedelta64(1, "h")
    bs = bundles_for_range(s, start, start + 24 * np.timedelta64(1, "h"), stats)
    assert (bs.W.sum(axis=1) == 1).all() and (bs.M.sum(axis=1) == 1).all()
    assert np.array_equal(bs.LS[..., 0], bs.S) and np.array_equal(bs.LS[..., 1], bs.L)
    np.testing.assert_allclose(bs.S[:, 1:], np.diff(bs.L, axis=1), atol=1e-12)
