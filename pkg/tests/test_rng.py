"""Replay and independence properties of the random streams."""

import numpy as np

from driftlab.rng import RandomStream, draw_gaussian


def test_same_identity_replays_same_sequence():
    a = RandomStream(seed=123, stream_id=7)
    b = RandomStream(seed=123, stream_id=7)
    np.testing.assert_array_equal(a.normal((100,)), b.normal((100,)))
    np.testing.assert_array_equal(a.uniform((50,)), b.uniform((50,)))
    np.testing.assert_array_equal(a.integers(0, 10, (20,)), b.integers(0, 10, (20,)))


def test_distinct_ids_give_distinct_sequences():
    a = RandomStream(seed=123, stream_id=0)
    b = RandomStream(seed=123, stream_id=1)
    c = RandomStream(seed=124, stream_id=0)
    xa, xb, xc = a.normal((64,)), b.normal((64,)), c.normal((64,))
    assert not np.array_equal(xa, xb)
    assert not np.array_equal(xa, xc)


def test_spawn_is_deterministic_and_independent():
    parent = RandomStream(seed=5, stream_id=3)
    child_a = parent.spawn(0)
    child_a2 = RandomStream(seed=5, stream_id=3).spawn(0)
    assert child_a.stream_id == child_a2.stream_id
    np.testing.assert_array_equal(child_a.normal((32,)), child_a2.normal((32,)))

    seen = {parent.stream_id}
    for i in range(100):
        sid = parent.spawn(i).stream_id
        assert sid not in seen
        seen.add(sid)


def test_spawn_unaffected_by_parent_draws():
    a = RandomStream(seed=9, stream_id=1)
    b = RandomStream(seed=9, stream_id=1)
    a.normal((1000,))
    np.testing.assert_array_equal(a.spawn(4).normal((16,)), b.spawn(4).normal((16,)))


def test_counter_tracks_draw_volume():
    s = RandomStream(seed=0)
    s.normal((10,))
    s.uniform((3, 4))
    s.normal()
    assert s.counter == 10 + 12 + 1


def test_draw_gaussian_moments():
    s = RandomStream(seed=2024)
    x = draw_gaussian(s, 200_000)
    assert x.shape == (200_000,)
    assert abs(float(np.mean(x))) < 0.01
    assert abs(float(np.std(x)) - 1.0) < 0.01
