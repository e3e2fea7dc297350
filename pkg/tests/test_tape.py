"""Gradient checks for the autodiff tape against central finite differences."""

import numpy as np
import pytest

from driftlab import tape


def numeric_grad(f, x, eps=1e-6):
    """Central finite differences of a scalar function of one ndarray."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x)
        flat[i] = orig - eps
        lo = f(x)
        flat[i] = orig
        gflat[i] = (hi - lo) / (2 * eps)
    return g


def check_scalar_fn(build, x0, rtol=1e-6, atol=1e-8):
    """build(x) -> scalar Var when x is a Var, scalar float otherwise."""
    v = tape.Var(x0)
    out = build(v)
    tape.backward(out)
    expected = numeric_grad(lambda x: float(tape.value_of(build(x))), x0.copy())
    np.testing.assert_allclose(v.grad, expected, rtol=rtol, atol=atol)


def test_add_mul_broadcast():
    rng = np.random.default_rng(0)
    x0 = rng.normal(size=(3, 4))
    bias = rng.normal(size=(4,))
    check_scalar_fn(lambda x: tape.vsum(tape.mul(tape.add(x, bias), 2.5)), x0)


def test_sub_div():
    rng = np.random.default_rng(1)
    x0 = rng.normal(size=(5,)) + 3.0
    check_scalar_fn(lambda x: tape.vsum(tape.div(tape.sub(x, 1.0), x)), x0)


def test_div_denominator_grad():
    rng = np.random.default_rng(2)
    x0 = rng.normal(size=(4,)) + 4.0
    num = rng.normal(size=(4,))
    check_scalar_fn(lambda x: tape.vsum(tape.div(num, x)), x0)


def test_matmul_both_sides():
    rng = np.random.default_rng(3)
    a0 = rng.normal(size=(3, 4))
    b = rng.normal(size=(4, 2))
    check_scalar_fn(lambda a: tape.vsum(tape.matmul(a, b)), a0)
    a = rng.normal(size=(3, 4))
    check_scalar_fn(lambda x: tape.vsum(tape.matmul(a, x)), rng.normal(size=(4, 2)))


def test_matmul_rejects_vectors():
    with pytest.raises(ValueError):
        tape.matmul(np.ones(3), np.ones((3, 2)))


def test_tanh_exp_log():
    rng = np.random.default_rng(4)
    x0 = rng.normal(size=(6,))
    check_scalar_fn(lambda x: tape.vsum(tape.tanh(x)), x0)
    check_scalar_fn(lambda x: tape.vsum(tape.exp(tape.mul(x, 0.3))), x0)
    check_scalar_fn(lambda x: tape.vsum(tape.log(tape.add(tape.mul(x, x), 1.5))), x0)


def test_sum_axis_and_mean():
    rng = np.random.default_rng(5)
    x0 = rng.normal(size=(3, 5))
    check_scalar_fn(lambda x: tape.vsum(tape.mul(tape.vsum(x, axis=1), 1.7)), x0)
    check_scalar_fn(lambda x: tape.vmean(tape.mul(x, x)), x0)


def test_minimum_and_clip():
    rng = np.random.default_rng(6)
    x0 = rng.normal(size=(8,))
    other = rng.normal(size=(8,))
    check_scalar_fn(lambda x: tape.vsum(tape.minimum(x, other)), x0)
    check_scalar_fn(lambda x: tape.vsum(tape.minimum(other, x)), x0)
    # keep clip bounds away from samples so finite differences stay valid
    check_scalar_fn(lambda x: tape.vsum(tape.clip(x, -0.45, 0.45)), x0 * 3.0)


def test_minimum_tie_goes_to_first():
    x = tape.Var(np.array([1.0, 2.0]))
    y = tape.Var(np.array([1.0, 3.0]))
    out = tape.vsum(tape.minimum(x, y))
    tape.backward(out)
    np.testing.assert_array_equal(x.grad, [1.0, 1.0])
    np.testing.assert_array_equal(y.grad, [0.0, 0.0])


def test_concat_reshape_narrow():
    rng = np.random.default_rng(7)
    x0 = rng.normal(size=(10,))
    w = rng.normal(size=(2, 3))

    def build(x):
        head = tape.reshape(tape.narrow(x, 0, 6), (2, 3))
        tail = tape.reshape(tape.narrow(x, 6, 10), (2, 2))
        joined = tape.concatenate([tape.mul(head, w), tail], axis=1)
        return tape.vsum(tape.mul(joined, joined))

    check_scalar_fn(build, x0)


def test_shared_subexpression_accumulates():
    # x appears twice; gradient must be the sum of both paths
    x0 = np.array([0.3, -0.7, 1.2])
    check_scalar_fn(lambda x: tape.vsum(tape.add(tape.mul(x, x), tape.mul(3.0, x))), x0)


def test_constant_only_inputs_return_ndarray():
    out = tape.tanh(np.zeros(3))
    assert isinstance(out, np.ndarray)
    out = tape.add(1.0, np.ones(2))
    assert isinstance(out, np.ndarray)


def test_deep_chain_is_iterative():
    # ~5000 nodes would overflow a recursive traversal
    x = tape.Var(np.array([1.0]))
    y = x
    for _ in range(5000):
        y = tape.add(y, 1.0)
    out = tape.vsum(y)
    tape.backward(out)
    np.testing.assert_allclose(x.grad, [1.0])


def test_backward_requires_scalar():
    x = tape.Var(np.ones(3))
    with pytest.raises(ValueError):
        tape.backward(x)


def test_randomized_composite_programs():
    # a seeded sweep over mixed programs exercising broadcasting paths
    rng = np.random.default_rng(8)
    for trial in range(20):
        n, m = int(rng.integers(2, 5)), int(rng.integers(2, 5))
        x0 = rng.normal(size=(n, m))
        a = rng.normal(size=(m, n))
        b = rng.normal(size=(1, m))
        c = float(rng.normal()) + 2.5

        def build(x):
            h = tape.tanh(tape.add(tape.matmul(x, a), 0.1))
            h2 = tape.mul(tape.add(x, b), x)
            return tape.add(
                tape.vmean(tape.mul(h, h)),
                tape.vsum(tape.div(h2, c)),
            )

        check_scalar_fn(build, x0, rtol=2e-5, atol=1e-7)
