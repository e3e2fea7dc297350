"""Tiny conditional velocity network over a flat parameter vector.

The network is a fully connected tanh MLP. Its input is the state
concatenated with sinusoidal time features and a one-hot condition
vector; its output is a velocity in state space. Parameters live in one
flat float64 vector so the optimiser, checkpoints, and the autodiff
tape all see a single array.

The forward pass is written against the tape's polymorphic ops: pass a
plain ndarray for the parameters and you get a plain ndarray back; pass
a tape.Var and you get a differentiable node. Both paths execute the
same numpy expressions in the same order.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import tape
from .errors import NumericError
from .rng import RandomStream


@dataclass(frozen=True)
class Arch:
    """Network shape; everything needed to rebuild the MLP from a flat vector."""

    state_dim: int
    n_conditions: int
    hidden: tuple = (64, 64, 64)
    time_freqs: int = 8

    def __post_init__(self):
        if self.state_dim < 1 or self.n_conditions < 1 or self.time_freqs < 1:
            raise ValueError("Arch dimensions must be positive")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))

    @property
    def input_dim(self) -> int:
        return self.state_dim + 2 * self.time_freqs + self.n_conditions

    def layer_dims(self) -> list:
        return [self.input_dim, *self.hidden, self.state_dim]

    def param_count(self) -> int:
        dims = self.layer_dims()
        return sum(nin * nout + nout for nin, nout in zip(dims[:-1], dims[1:]))

    def to_dict(self) -> dict:
        return {
            "state_dim": self.state_dim,
            "n_conditions": self.n_conditions,
            "hidden": list(self.hidden),
            "time_freqs": self.time_freqs,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Arch":
        return cls(
            state_dim=int(d["state_dim"]),
            n_conditions=int(d["n_conditions"]),
            hidden=tuple(d["hidden"]),
            time_freqs=int(d["time_freqs"]),
        )


@dataclass(frozen=True)
class ParamVector:
    """A network architecture plus one flat vector of weights."""

    arch: Arch
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("parameter vector must be 1-D")
        if values.shape[0] != self.arch.param_count():
            raise ValueError(
                f"expected {self.arch.param_count()} parameters, got {values.shape[0]}"
            )
        object.__setattr__(self, "values", values)

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def with_values(self, values: np.ndarray) -> "ParamVector":
        return replace(self, values=np.asarray(values, dtype=np.float64))

    def copy(self) -> "ParamVector":
        return replace(self, values=self.values.copy())


def init_params(arch: Arch, stream: RandomStream) -> ParamVector:
    """Gaussian fan-in init for weights, zeros for biases."""
    dims = arch.layer_dims()
    parts = []
    for nin, nout in zip(dims[:-1], dims[1:]):
        parts.append(stream.normal((nin * nout,)) / np.sqrt(nin))
        parts.append(np.zeros(nout))
    return ParamVector(arch, np.concatenate(parts))


def unpack(arch: Arch, theta):
    """Split a flat vector (ndarray or Var) into per-layer (W, b) pairs."""
    dims = arch.layer_dims()
    layers = []
    offset = 0
    for nin, nout in zip(dims[:-1], dims[1:]):
        w = tape.reshape(tape.narrow(theta, offset, offset + nin * nout), (nin, nout))
        offset += nin * nout
        b = tape.narrow(theta, offset, offset + nout)
        offset += nout
        layers.append((w, b))
    return layers


def time_features(t, n_freqs: int) -> np.ndarray:
    """Sinusoidal features (B, 2F): sin and cos of t at frequencies 2^k."""
    t = np.asarray(t, dtype=np.float64).reshape(-1, 1)
    angles = t * (2.0 ** np.arange(n_freqs, dtype=np.float64))
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


def _one_hot(c, n_conditions: int, batch: int) -> np.ndarray:
    c = np.broadcast_to(np.asarray(c, dtype=np.int64), (batch,))
    if np.any(c < 0) or np.any(c >= n_conditions):
        raise ValueError(f"condition index out of range [0, {n_conditions})")
    out = np.zeros((batch, n_conditions))
    out[np.arange(batch), c] = 1.0
    return out


def make_input(arch: Arch, x, t, c):
    """Assemble the network input matrix (B, input_dim).

    x may be a (B, d) ndarray or Var; t a scalar or (B,) array; c a
    condition index or (B,) array of indices. Time and condition
    features are always constants.
    """
    batch = tape.value_of(x).shape[0]
    tf = time_features(np.broadcast_to(np.asarray(t, dtype=np.float64), (batch,)), arch.time_freqs)
    onehot = _one_hot(c, arch.n_conditions, batch)
    return tape.concatenate([x, np.concatenate([tf, onehot], axis=1)], axis=1)


def apply_network(arch: Arch, theta, inputs):
    """Forward pass; theta and inputs may each be ndarray or Var."""
    layers = unpack(arch, theta)
    h = inputs
    for w, b in layers[:-1]:
        h = tape.tanh(tape.add(tape.matmul(h, w), b))
    w, b = layers[-1]
    return tape.add(tape.matmul(h, w), b)


def velocity(params: ParamVector, x, t, c):
    """Batched plain-ndarray velocity: (B, d) states -> (B, d) velocities."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.arch.state_dim:
        raise ValueError(f"expected states of shape (B, {params.arch.state_dim})")
    return apply_network(params.arch, params.values, make_input(params.arch, x, t, c))


def velocity_var(theta: tape.Var, arch: Arch, x, t, c) -> tape.Var:
    """Velocity with the parameters on the tape; x/t/c are constants."""
    x = np.asarray(x, dtype=np.float64)
    return apply_network(arch, theta, make_input(arch, x, t, c))


def eval_velocity(params: ParamVector, x, t: float, c: int) -> np.ndarray:
    """Single-state velocity with argument validation."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.arch.state_dim,):
        raise ValueError(f"expected state of shape ({params.arch.state_dim},)")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"time {t} outside [0, 1]")
    if not params.finite:
        raise NumericError("parameter vector contains non-finite entries")
    return velocity(params, x[None, :], float(t), int(c))[0]


def grad_params(params: ParamVector, loss_fn):
    """Evaluate loss_fn(theta_var) and return (loss_value, flat_gradient).

    loss_fn receives the parameters as a tape.Var and must return a
    scalar Var. Non-finite losses or gradients raise NumericError with
    the offending component named.
    """
    theta = tape.Var(params.values)
    loss = loss_fn(theta)
    loss_value = float(tape.value_of(loss))
    if not np.isfinite(loss_value):
        kind = "nan" if np.isnan(loss_value) else "inf"
        raise NumericError(f"loss is {kind}")
    tape.backward(loss)
    grad = theta.grad if theta.grad is not None else np.zeros_like(params.values)
    if not np.all(np.isfinite(grad)):
        bad = int(np.flatnonzero(~np.isfinite(grad))[0])
        raise NumericError(f"gradient is non-finite at parameter index {bad}")
    return loss_value, grad


def jacobian_x(params: ParamVector, x, t: float, c: int) -> np.ndarray:
    """d(velocity)/d(state) at one state, shape (d, d); rebuilt per row."""
    d = params.arch.state_dim
    x = np.asarray(x, dtype=np.float64).reshape(1, d)
    rows = []
    for j in range(d):
        # forward with the state on the tape; parameters stay constant
        xv = tape.Var(x)
        inputs = make_input(params.arch, xv, float(t), int(c))
        v = apply_network(params.arch, params.values, inputs)
        scalar = tape.vsum(tape.narrow(tape.reshape(v, (d,)), j, j + 1))
        tape.backward(scalar)
        rows.append(xv.grad.reshape(d))
    return np.stack(rows, axis=0)
