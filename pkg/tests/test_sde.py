"""Stochastic sampler: noise schedule, transition densities, rollouts."""

import math

import numpy as np
import pytest

from driftlab import flow, net, sde
from driftlab.rng import RandomStream

ARCH = net.Arch(state_dim=2, n_conditions=4, hidden=(8, 8), time_freqs=3)


def make_params(seed=0):
    return net.init_params(ARCH, RandomStream(seed))


def manual_mean(params, x, t_hi, t_lo, sigma, c):
    """Drift formula written out independently of the library path."""
    v = np.stack([net.eval_velocity(params, xi, t_hi, c) for xi in x])
    if sigma == 0.0:
        return x + v * (t_lo - t_hi)
    correction = sigma**2 / (2 * t_hi) * (x + (1 - t_hi) * v)
    return x + (v + correction) * (t_lo - t_hi)


def manual_logp(sample, mean, std):
    d = sample.shape[-1]
    return -0.5 * d * math.log(2 * math.pi * std**2) - np.sum((sample - mean) ** 2) / (
        2 * std**2
    )


def test_noise_scale_formula_and_guards():
    eta = 0.7
    # interior transition: sigma evaluated at the upper time
    assert sde.noise_scale(0.5, 0.4, eta) == pytest.approx(eta * math.sqrt(0.5 / 0.5))
    assert sde.noise_scale(0.9, 0.8, eta) == pytest.approx(eta * math.sqrt(0.9 / 0.1))
    # final transition is deterministic
    assert sde.noise_scale(0.1, 0.0, eta) == 0.0
    # pole guard: the first transition uses its lower time
    t_lo = 0.913
    assert sde.noise_scale(1.0, t_lo, eta) == pytest.approx(eta * math.sqrt(t_lo / (1 - t_lo)))
    # a lower time still above the cap falls back to the cap itself
    capped = sde.noise_scale(1.0, 0.99999, eta)
    assert capped == pytest.approx(eta * math.sqrt((1 - 1e-4) / 1e-4))


def test_transition_mean_matches_manual_formula():
    params = make_params(1)
    x = RandomStream(2).normal((5, 2))
    for t_hi, t_lo in [(0.9, 0.7), (0.5, 0.45), (0.2, 0.0)]:
        sigma = sde.noise_scale(t_hi, t_lo, 0.7)
        got = sde.transition_mean(ARCH, params.values, x, t_hi, t_lo, sigma, 1)
        np.testing.assert_allclose(got, manual_mean(params, x, t_hi, t_lo, sigma, 1), rtol=1e-12)


def test_sde_step_with_zero_sigma_is_euler():
    params = make_params(3)
    x = RandomStream(4).normal((4, 2))
    sample, mean, std = sde.sde_step(params, x, 0.3, 0.0, 2, 0.7, np.zeros((4, 2)))
    assert std == 0.0
    np.testing.assert_array_equal(sample, mean)
    np.testing.assert_array_equal(sample, flow.ode_step(params, x, 0.3, 0.0, 2))


def test_rollout_structure():
    params = make_params(5)
    sched = flow.make_schedule(17, shift=3.0)
    group = sde.rollout_group(params, 1, 4, sched, 0.7, RandomStream(6))
    assert len(group.members) == 4
    for member in group.members:
        assert len(member.transitions) == 17
        assert len(member.stochastic_transitions) == 16
        assert not member.transitions[-1].stochastic
        assert member.states.shape == (18, 2)
        # the chain is consistent: each step starts where the last ended
        for a, b in zip(member.transitions[:-1], member.transitions[1:]):
            np.testing.assert_array_equal(a.sample, b.x_from)
        np.testing.assert_array_equal(member.final, member.transitions[-1].sample)


def test_rollout_sample_identity_and_logp_old():
    params = make_params(7)
    sched = flow.make_schedule(9, shift=3.0)
    group = sde.rollout_group(params, 0, 3, sched, 0.7, RandomStream(8))
    for member in group.members:
        for tr in member.stochastic_transitions:
            np.testing.assert_array_equal(tr.sample, tr.mean + tr.std * tr.noise)
            # stored density matches an independent evaluation of the formula
            want = manual_logp(tr.sample, manual_mean(params, tr.x_from[None], tr.t_hi, tr.t_lo, tr.sigma, 0)[0], tr.std)
            assert tr.logp_old == pytest.approx(want, abs=1e-10)


def test_transition_log_prob_recovers_logp_old():
    params = make_params(9)
    sched = flow.make_schedule(9, shift=3.0)
    group = sde.rollout_group(params, 2, 3, sched, 0.7, RandomStream(10))
    for member in group.members:
        for tr in member.stochastic_transitions:
            value, grad = sde.transition_log_prob(params, tr, 2)
            assert value == pytest.approx(tr.logp_old, abs=1e-12)
            assert grad.shape == params.values.shape


def test_transition_log_prob_gradient_against_fd():
    params = make_params(11)
    sched = flow.make_schedule(5, shift=3.0)
    group = sde.rollout_group(params, 3, 2, sched, 0.7, RandomStream(12))
    tr = group.members[0].stochastic_transitions[1]
    _, grad = sde.transition_log_prob(params, tr, 3)

    def logp_at(values):
        p = params.with_values(values)
        mean = manual_mean(p, tr.x_from[None], tr.t_hi, tr.t_lo, tr.sigma, 3)[0]
        return manual_logp(tr.sample, mean, tr.std)

    rng = np.random.default_rng(13)
    eps = 1e-6
    for _ in range(4):
        u = rng.normal(size=params.values.shape)
        u /= np.linalg.norm(u)
        fd = (logp_at(params.values + eps * u) - logp_at(params.values - eps * u)) / (2 * eps)
        assert abs(fd - float(grad @ u)) <= 1e-5 * max(1.0, abs(fd))


def test_log_prob_rejects_deterministic_transition():
    params = make_params(14)
    sched = flow.make_schedule(5)
    group = sde.rollout_group(params, 0, 2, sched, 0.7, RandomStream(15))
    with pytest.raises(ValueError):
        sde.transition_log_prob(params, group.members[0].transitions[-1], 0)


def test_rollout_replay_is_identical():
    params = make_params(16)
    sched = flow.make_schedule(9)
    a = sde.rollout_group(params, 1, 3, sched, 0.7, RandomStream(17, stream_id=4))
    b = sde.rollout_group(params, 1, 3, sched, 0.7, RandomStream(17, stream_id=4))
    for ma, mb in zip(a.members, b.members):
        np.testing.assert_array_equal(ma.final, mb.final)
        for ta, tb in zip(ma.transitions, mb.transitions):
            np.testing.assert_array_equal(ta.sample, tb.sample)
            assert ta.logp_old == tb.logp_old


def test_rollout_rewards_attached():
    params = make_params(18)
    sched = flow.make_schedule(5)
    group = sde.rollout_group(
        params, 2, 3, sched, 0.7, RandomStream(19), reward_fn=lambda x, c: np.sum(x, axis=1)
    )
    np.testing.assert_allclose(group.rewards, [np.sum(m.final) for m in group.members])


def test_rollout_validation():
    params = make_params(20)
    sched = flow.make_schedule(5)
    with pytest.raises(ValueError, match="two members"):
        sde.rollout_group(params, 0, 1, sched, 0.7, RandomStream(21))
    with pytest.raises(ValueError, match="eta"):
        sde.rollout_group(params, 0, 2, sched, 0.0, RandomStream(22))


def test_hybrid_extremes_match_pure_ode():
    trained = make_params(23)
    reference = make_params(24)
    sched = flow.make_schedule(7)

    all_trained = sde.hybrid_sample_batch(trained, reference, 7, sched, 1, 5, RandomStream(25))
    pure_t = flow.ode_sample_batch(trained, 1, sched, 5, RandomStream(25))
    np.testing.assert_array_equal(all_trained, pure_t)

    all_ref = sde.hybrid_sample_batch(trained, reference, 0, sched, 1, 5, RandomStream(25))
    pure_r = flow.ode_sample_batch(reference, 1, sched, 5, RandomStream(25))
    np.testing.assert_array_equal(all_ref, pure_r)

    mixed = sde.hybrid_sample_batch(trained, reference, 4, sched, 1, 5, RandomStream(25))
    assert not np.array_equal(mixed, pure_t)
    assert not np.array_equal(mixed, pure_r)


def test_trajectory_export_round_trips_fields():
    params = make_params(26)
    sched = flow.make_schedule(5)
    group = sde.rollout_group(params, 1, 2, sched, 0.7, RandomStream(27))
    blob = sde.group_to_dict(group)
    assert blob["condition"] == 1
    assert len(blob["members"]) == 2
    tr0 = blob["members"][0]["transitions"][0]
    assert set(tr0) == {
        "index", "t_hi", "t_lo", "x_from", "sigma", "std", "mean", "sample", "logp_old",
    }
    import json

    json.dumps(blob)  # must be JSON-serialisable as-is
