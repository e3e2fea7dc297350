"""Synthetic rewards and attribution scenarios."""

import numpy as np
import pytest

from driftlab import data, rewards
from driftlab.rng import RandomStream


def spec(kind="composite", **kw):
    return rewards.RewardSpec(data=data.ring_mixture(), kind=kind, **kw)


def test_preference_is_one_at_preferred_center():
    s = spec(kind="mode-preference")
    for c in range(4):
        center = s.data.centers[s.preferred[c][0]]
        assert rewards.mode_preference_reward(center, c, s)[0] == pytest.approx(1.0)


def test_preference_frozen_value_at_tau_sqrt2():
    s = spec(kind="mode-preference", preferred=((0,), (2,), (4,), (6,)), tau=1.0)
    center = s.data.centers[0]
    x = center + np.array([np.sqrt(2.0), 0.0])
    got = rewards.mode_preference_reward(x, 0, s)[0]
    assert got == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_preference_invariant_to_mode_order():
    a = spec(kind="mode-preference", preferred=((0, 1), (2, 3), (4, 5), (6, 7)))
    b = spec(kind="mode-preference", preferred=((1, 0), (3, 2), (5, 4), (7, 6)))
    x = RandomStream(0).normal((20, 2)) * 4.0
    np.testing.assert_array_equal(
        rewards.mode_preference_reward(x, 1, a), rewards.mode_preference_reward(x, 1, b)
    )


def test_preference_strictly_decreasing_in_distance():
    s = spec(kind="mode-preference")
    center = s.data.centers[s.preferred[2][0]]
    direction = np.array([0.6, 0.8])
    radii = np.linspace(0.0, 3.0, 13)
    values = [float(rewards.mode_preference_reward(center + r * direction, 2, s)[0]) for r in radii]
    assert all(a > b for a, b in zip(values[:-1], values[1:]))


def test_fidelity_peak_and_tail():
    ring = data.ring_mixture()
    probes = np.concatenate(
        [ring.centers[[0, 1]], RandomStream(1).normal((50, 2)) * 5.0]
    )
    values = rewards.fidelity_reward(probes, ring, 0)
    assert np.argmax(values) in (0, 1)
    assert np.max(values) <= 1.0
    far = ring.centers[0] + np.array([10 * 0.3, 0.0])
    assert rewards.fidelity_reward(far, ring, 0)[0] < 0.01


def test_fidelity_symmetric_points_equal():
    ring = data.ring_mixture()
    # condition 0 covers modes 0 and 1; reflect across their bisector
    mid_angle = np.pi / 8
    rot = np.array(
        [
            [np.cos(2 * mid_angle), np.sin(2 * mid_angle)],
            [np.sin(2 * mid_angle), -np.cos(2 * mid_angle)],
        ]
    )
    x = np.array([3.0, 1.0])
    mirrored = rot @ x
    a = rewards.fidelity_reward(x, ring, 0)[0]
    b = rewards.fidelity_reward(mirrored, ring, 0)[0]
    assert a == pytest.approx(b, abs=1e-12)


def test_composite_mixes_with_weights():
    s = spec(kind="composite", weights=(0.7, 0.3))
    x = np.array([[2.5, 1.0], [0.0, 0.0]])
    want = 0.7 * rewards.mode_preference_reward(x, 0, s) + 0.3 * rewards.fidelity_reward(
        x, s.data, 0
    )
    np.testing.assert_allclose(rewards.composite_reward(x, 0, s), want, rtol=1e-15)


def test_reward_fn_dispatch():
    x = RandomStream(2).normal((5, 2)) * 3.0
    for kind in rewards.KINDS:
        s = spec(kind=kind)
        fn = rewards.reward_fn(s)
        out = fn(x, 1)
        assert out.shape == (5,)
        np.testing.assert_array_equal(out, fn(x, 1))  # deterministic


def test_reward_spec_validation():
    with pytest.raises(ValueError, match="kind"):
        spec(kind="sharpness")
    with pytest.raises(ValueError, match="tau"):
        spec(tau=0.0)
    with pytest.raises(ValueError, match="own modes"):
        spec(preferred=((4,), (2,), (4,), (6,)))
    with pytest.raises(ValueError, match="summing to 1"):
        spec(weights=(0.7, 0.4))
    with pytest.raises(ValueError, match="every condition"):
        spec(preferred=((0,), (2,)))


def test_attribution_scenario_construction():
    s = rewards.build_attribution_scenario(6, 2, RandomStream(3))
    assert s.T == 6 and s.m == 2
    assert len(s.t_ia) == 2
    assert set(s.t_a) | set(s.t_ia) == set(range(1, 7))
    assert set(s.t_a) & set(s.t_ia) == set()
    assert all(s.labels_one[t - 1] == -1 for t in s.t_ia)
    assert all(s.labels_one[t - 1] == 1 for t in s.t_a)
    assert tuple(-l for l in s.labels_one) == s.labels_two


def test_attribution_scenario_full_inversion():
    s = rewards.build_attribution_scenario(4, 4, RandomStream(4))
    assert s.labels_one == (-1, -1, -1, -1)
    assert s.labels_two == (1, 1, 1, 1)


def test_attribution_scenario_reproducible():
    a = rewards.build_attribution_scenario(9, 3, RandomStream(5))
    b = rewards.build_attribution_scenario(9, 3, RandomStream(5))
    assert a.t_ia == b.t_ia
    # and over many draws every step appears sometimes
    seen = set()
    stream = RandomStream(6)
    for _ in range(200):
        seen |= set(rewards.build_attribution_scenario(9, 3, stream).t_ia)
    assert seen == set(range(1, 10))


def test_attribution_scenario_rejects_bad_m():
    with pytest.raises(ValueError):
        rewards.build_attribution_scenario(5, 0, RandomStream(7))
    with pytest.raises(ValueError):
        rewards.build_attribution_scenario(5, 6, RandomStream(8))
    with pytest.raises(ValueError):
        rewards.AttributionScenario(
            T=3, m=1, t_ia=(2,), labels_one=(1, -1, 1), labels_two=(1, 1, -1)
        )
