import numpy as np
import pytest

from danet.data import synthesize_series
from danet.features import NormStats, SplitSpec, build_bundles
from danet.layers import ModelSpec


@pytest.fixture(scope="session")
def series():
    return synthesize_series(75, seed=3)


@pytest.fixture(scope="session")
def split(series):
    return SplitSpec.default(series, test_days=5, validation_days=5)


@pytest.fixture(scope="session")
def stats(series, split):
    return NormStats.fit(series, *split.fit_range)


@pytest.fixture(scope="session")
def bundles(series, split, stats):
    return build_bundles(series, split, stats)


@pytest.fixture(scope="session")
def tiny_spec():
    return ModelSpec(width=8, se_ratio=4, block_count=2, block_layers=4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


CRITERIA_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[CRITERIA_KEY] = {}


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion, then assert it."""
    lines = request.config.stash[CRITERIA_KEY]
    capman = request.config.pluginmanager.getplugin("capturemanager")

    def record(number: int, passed: bool, detail: str):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
        lines[number] = line
        with capman.global_and_fixture_disabled():
            print(f"\n{line}", flush=True)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(CRITERIA_KEY, {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
