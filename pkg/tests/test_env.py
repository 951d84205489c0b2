"""Environment and RNG-stream behavior."""

import numpy as np
import pytest

from banditlab import Environment, RngStream, make_environment, sample_rewards


def test_environment_validation():
    with pytest.raises(ValueError):
        make_environment(1.2, 0.5, counterfactual=True, horizon=10)
    with pytest.raises(ValueError):
        make_environment(0.5, -0.1, counterfactual=True, horizon=10)
    with pytest.raises(ValueError):
        make_environment(0.5, 0.5, counterfactual=True, horizon=0)


def test_symmetric_flag():
    assert make_environment(0.4, 0.4, counterfactual=False, horizon=5).symmetric
    assert not make_environment(0.4, 0.5, counterfactual=False, horizon=5).symmetric


def test_stream_determinism():
    s = RngStream(123, 7)
    draws = [s.uniform() for _ in range(5)]
    assert len(set(draws)) == 5
    again = RngStream(123, 7)
    assert [again.uniform() for _ in range(5)] == draws


def test_block_draws_equal_single_draws():
    s1 = RngStream(99, 3)
    singles = np.array([s1.uniform() for _ in range(12)])
    block = RngStream(99, 3).uniform_block((12,))
    np.testing.assert_array_equal(singles, block)
    shaped = RngStream(99, 3).uniform_block((4, 3))
    np.testing.assert_array_equal(singles.reshape(4, 3), shaped)


def test_replica_streams_are_distinct():
    u0 = RngStream(5, 0).uniform_block((8,))
    u1 = RngStream(5, 1).uniform_block((8,))
    assert not np.array_equal(u0, u1)
    np.testing.assert_array_equal(u1, RngStream(5, 0).spawn(1).uniform_block((8,)))


def test_sample_rewards_degenerate_rates():
    env0 = make_environment(0.0, 1.0, counterfactual=True, horizon=1)
    s = RngStream(1, 0)
    for _ in range(50):
        r = sample_rewards(env0, s)
        assert r.r1 == 0 and r.r2 == 1


def test_sample_rewards_frequency():
    env = make_environment(0.3, 0.8, counterfactual=True, horizon=1)
    s = RngStream(2024, 0)
    n = 20000
    rs = [sample_rewards(env, s) for _ in range(n)]
    f1 = sum(r.r1 for r in rs) / n
    f2 = sum(r.r2 for r in rs) / n
    # 4-sigma statistical bound, fixed seed
    assert abs(f1 - 0.3) < 4 * np.sqrt(0.3 * 0.7 / n)
    assert abs(f2 - 0.8) < 4 * np.sqrt(0.8 * 0.2 / n)
