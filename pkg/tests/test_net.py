"""Velocity-network checks: shapes, gradients against finite differences."""

import numpy as np
import pytest

from driftlab import net, tape
from driftlab.errors import NumericError
from driftlab.rng import RandomStream


ARCH = net.Arch(state_dim=2, n_conditions=4, hidden=(8, 8), time_freqs=3)


def make_params(seed=0, arch=ARCH):
    return net.init_params(arch, RandomStream(seed))


def test_param_count_matches_layout():
    dims = ARCH.layer_dims()
    assert dims == [2 + 6 + 4, 8, 8, 2]
    expected = 12 * 8 + 8 + 8 * 8 + 8 + 8 * 2 + 2
    assert ARCH.param_count() == expected
    assert make_params().values.shape == (expected,)


def test_init_biases_zero_weights_scaled():
    params = make_params(seed=3)
    layers = net.unpack(ARCH, params.values)
    for (w, b), nin in zip(layers, ARCH.layer_dims()[:-1]):
        assert np.all(b == 0.0)
        # fan-in scaling keeps the empirical std near 1/sqrt(nin)
        assert abs(float(np.std(w)) - 1.0 / np.sqrt(nin)) < 0.5 / np.sqrt(nin)


def test_make_input_layout():
    x = np.array([[1.0, -2.0]])
    out = net.make_input(ARCH, x, 0.25, 3)
    assert out.shape == (1, ARCH.input_dim)
    np.testing.assert_array_equal(out[0, :2], [1.0, -2.0])
    freqs = 2.0 ** np.arange(3) * 0.25
    np.testing.assert_allclose(out[0, 2:5], np.sin(freqs))
    np.testing.assert_allclose(out[0, 5:8], np.cos(freqs))
    np.testing.assert_array_equal(out[0, 8:], [0, 0, 0, 1])


def test_condition_out_of_range_rejected():
    with pytest.raises(ValueError):
        net.make_input(ARCH, np.zeros((1, 2)), 0.5, 4)


def test_eval_velocity_matches_batch_row():
    params = make_params(seed=1)
    xs = RandomStream(10).normal((5, 2))
    batch = net.velocity(params, xs, 0.4, 2)
    for i in range(5):
        single = net.eval_velocity(params, xs[i], 0.4, 2)
        np.testing.assert_allclose(single, batch[i], rtol=1e-13, atol=1e-14)


def test_velocity_var_matches_plain_forward_exactly():
    params = make_params(seed=2)
    xs = RandomStream(11).normal((3, 2))
    plain = net.velocity(params, xs, 0.7, 1)
    taped = net.velocity_var(tape.Var(params.values), ARCH, xs, 0.7, 1)
    np.testing.assert_array_equal(plain, taped.value)


def test_eval_velocity_validation():
    params = make_params()
    with pytest.raises(ValueError):
        net.eval_velocity(params, np.zeros(3), 0.5, 0)
    with pytest.raises(ValueError):
        net.eval_velocity(params, np.zeros(2), 1.5, 0)
    bad = params.with_values(np.where(np.arange(params.values.size) == 7, np.nan, params.values))
    with pytest.raises(NumericError):
        net.eval_velocity(bad, np.zeros(2), 0.5, 0)


def test_grad_params_against_directional_differences():
    params = make_params(seed=4)
    xs = RandomStream(12).normal((6, 2))
    ts = RandomStream(13).uniform((6,))
    cs = np.array([0, 1, 2, 3, 0, 1])

    def loss_fn(theta):
        v = net.velocity_var(theta, ARCH, xs, ts, cs) if isinstance(theta, tape.Var) else None
        if v is None:
            p = params.with_values(theta)
            out = net.velocity(p, xs, ts, cs)
            return float(np.mean(np.sum(out * out, axis=1)))
        return tape.vmean(tape.vsum(tape.mul(v, v), axis=1))

    value, grad = net.grad_params(params, loss_fn)
    assert np.isfinite(value)

    dir_rng = np.random.default_rng(99)
    eps = 1e-6
    for _ in range(5):
        u = dir_rng.normal(size=params.values.shape)
        u /= np.linalg.norm(u)
        hi = loss_fn(params.values + eps * u)
        lo = loss_fn(params.values - eps * u)
        fd = (hi - lo) / (2 * eps)
        analytic = float(grad @ u)
        assert abs(fd - analytic) <= 1e-6 * max(1.0, abs(fd))


def test_grad_params_flags_nonfinite_loss():
    params = make_params()

    def bad_loss(theta):
        return tape.vsum(tape.log(tape.mul(theta, 0.0)))

    with np.errstate(divide="ignore"), pytest.raises(NumericError):
        net.grad_params(params, bad_loss)


def test_jacobian_x_against_finite_differences():
    params = make_params(seed=5)
    x = np.array([0.3, -1.1])
    jac = net.jacobian_x(params, x, 0.6, 2)
    assert jac.shape == (2, 2)
    eps = 1e-6
    for j in range(2):
        for i in range(2):
            dx = np.zeros(2)
            dx[i] = eps
            hi = net.eval_velocity(params, x + dx, 0.6, 2)[j]
            lo = net.eval_velocity(params, x - dx, 0.6, 2)[j]
            fd = (hi - lo) / (2 * eps)
            assert abs(fd - jac[j, i]) < 1e-6


def test_per_sample_times_and_conditions():
    params = make_params(seed=6)
    xs = RandomStream(14).normal((4, 2))
    ts = np.array([0.1, 0.4, 0.7, 0.9])
    cs = np.array([3, 2, 1, 0])
    batch = net.velocity(params, xs, ts, cs)
    for i in range(4):
        row = net.velocity(params, xs[i : i + 1], float(ts[i]), int(cs[i]))[0]
        np.testing.assert_allclose(batch[i], row, rtol=1e-13, atol=1e-14)
