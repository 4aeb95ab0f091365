import numpy as np
import pytest
from scipy import stats

from danet.autodiff import LrSchedule, ParameterStore, adam_step, truncated_normal_init
from danet.errors import ContractError


def test_zero_gradient_leaves_parameters():
    store = ParameterStore({"w": np.array([1.0, -2.0]), "b": np.array(0.5)})
    adam_step(store, [np.zeros(2), np.zeros(())], rate=1e-3)
    assert np.array_equal(store["w"].data, [1.0, -2.0])
    assert store["b"].data == 0.5
    assert store.step_count == 1


def test_first_step_moves_by_rate():
    # closed form at t=1: m_hat = g, v_hat = g^2, so the step is rate * g / (|g| + eps)
    store = ParameterStore({"x": np.array(3.0)})
    adam_step(store, [np.array(1.0)], rate=1e-3)
    expected = 3.0 - 1e-3 * 1.0 / (1.0 + 1e-8)
    assert store["x"].data == pytest.approx(expected, abs=1e-15)
    assert 3.0 - store["x"].data == pytest.approx(1e-3, rel=1e-7)


def test_adam_matches_hand_rolled_two_steps():
    g1, g2 = np.array([0.3, -1.2]), np.array([-0.4, 0.5])
    store = ParameterStore({"p": np.array([1.0, 1.0])})
    adam_step(store, [g1], 0.01)
    adam_step(store, [g2], 0.01)
    p, m, v = np.array([1.0, 1.0]), np.zeros(2), np.zeros(2)
    for t, g in enumerate([g1, g2], start=1):
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        p = p - 0.01 * (m / (1 - 0.9 ** t)) / (np.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
    np.testing.assert_allclose(store["p"].data, p, rtol=0, atol=1e-15)


def test_misaligned_gradients_rejected():
    store = ParameterStore({"a": np.zeros(2), "b": np.zeros(3)})
    with pytest.raises(ContractError):
        adam_step(store, [np.zeros(2)], 1e-3)
    with pytest.raises(ContractError):
        adam_step(store, [np.zeros(3), np.zeros(2)], 1e-3)
    assert store.step_count == 0


def test_moments_match_parameter_shapes():
    store = ParameterStore({"w": np.zeros((3, 4)), "b": np.zeros(4)})
    for name in store:
        m, v = store.moments(name)
        assert m.shape == v.shape == store[name].shape


def test_schedule_published_constants():
    sched = LrSchedule(1e-3, 10.0, 600)
    assert sched.rate(0) == 1e-3
    assert sched.rate(599) == 1e-3
    assert sched.rate(600) == pytest.approx(1e-4, rel=1e-15)
    assert sched.rate(1199) == pytest.approx(1e-4, rel=1e-15)
    rates = [sched.rate(e) for e in range(1200)]
    assert len(set(rates)) == 2
    assert all(a >= b for a, b in zip(rates, rates[1:]))


def test_truncated_normal_bounds_and_determinism():
    a = truncated_normal_init((200, 50), sd=0.7, seed=4)
    assert np.abs(a).max() <= 2 * 0.7
    assert np.array_equal(a, truncated_normal_init((200, 50), sd=0.7, seed=4))
    assert not np.array_equal(a, truncated_normal_init((200, 50), sd=0.7, seed=5))


def test_truncated_normal_large_sample_sd():
    sample = truncated_normal_init(10**6, sd=1.0, seed=0)
    oracle = stats.truncnorm(-2, 2).std()  # 0.8796
    assert 0.86 <= sample.std() <= 0.91
    assert sample.std() == pytest.approx(oracle, abs=3e-3)


def test_truncated_normal_invalid_sd():
    with pytest.raises(ContractError):
        truncated_normal_init((2,), sd=0.0)
