"""Flow matching: time schedules, pretraining, deterministic sampling.

Convention: t = 0 is data, t = 1 is noise. The interpolation path is
x_t = (1 - t) x0 + t x1 and the regression target is the constant
velocity x1 - x0 of that path. Sampling integrates dx = v dt from t = 1
down to t = 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import net, tape
from .data import DataSpec, sample_data
from .errors import NumericError, TrainingError
from .net import Arch, ParamVector, init_params
from .optim import init_optim, optim_step
from .rng import RandomStream


@dataclass(frozen=True)
class TimeSchedule:
    """Strictly decreasing times from exactly 1.0 to exactly 0.0."""

    times: np.ndarray
    shift: float

    def __post_init__(self):
        times = np.asarray(self.times, dtype=np.float64)
        if times.ndim != 1 or times.shape[0] < 2:
            raise ValueError("schedule needs at least two time points")
        if times[0] != 1.0 or times[-1] != 0.0:
            raise ValueError("schedule must start at 1.0 and end at 0.0")
        if np.any(np.diff(times) >= 0):
            raise ValueError("schedule times must be strictly decreasing")
        object.__setattr__(self, "times", times)

    @property
    def steps(self) -> int:
        return self.times.shape[0] - 1

    @property
    def optimizable(self) -> int:
        # the final transition (into t = 0) is deterministic, so it
        # carries no log-probability and is excluded from optimisation
        return self.steps - 1


def make_schedule(steps: int, shift: float = 3.0) -> TimeSchedule:
    """Shifted schedule t_i = s u_i / (1 + (s - 1) u_i), u descending.

    shift > 1 concentrates points near t = 0, where the path is close
    to data and small steps matter most.
    """
    if steps < 2:
        raise ValueError("need at least two steps")
    if shift <= 0:
        raise ValueError("shift must be positive")
    u = np.linspace(1.0, 0.0, steps + 1)
    times = shift * u / (1.0 + (shift - 1.0) * u)
    times[0], times[-1] = 1.0, 0.0
    return TimeSchedule(times=times, shift=float(shift))


def interpolate(x0, x1, t):
    """Linear path point x_t; t broadcasts over the batch."""
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("interpolation time outside [0, 1]")
    if t.ndim == 1:
        t = t[:, None]
    return (1.0 - t) * x0 + t * x1


def fm_loss(params: ParamVector, x0, x1, t, c):
    """Flow-matching loss and its parameter gradient on one batch.

    Loss is the squared error between the path velocity x1 - x0 and the
    network prediction at x_t, summed over the state dimension and
    averaged over the batch.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    x1 = np.asarray(x1, dtype=np.float64)
    target = x1 - x0
    xt = interpolate(x0, x1, t)

    def loss_fn(theta):
        v = net.velocity_var(theta, params.arch, xt, t, c)
        err = tape.sub(v, target)
        return tape.vmean(tape.vsum(tape.mul(err, err), axis=1))

    return net.grad_params(params, loss_fn)


@dataclass(frozen=True)
class PretrainConfig:
    steps: int = 1500
    batch_size: int = 256
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    max_grad_norm: float = 1.0
    hidden: tuple = (64, 64, 64)
    time_freqs: int = 8


def pretrain(
    data: DataSpec,
    config: PretrainConfig,
    stream: RandomStream,
    callback=None,
) -> ParamVector:
    """Train a velocity network from scratch on a synthetic dataset.

    Conditions and path times are sampled uniformly. Divergence raises
    TrainingError carrying the last finite parameters.
    """
    arch = Arch(
        state_dim=data.state_dim,
        n_conditions=data.n_conditions,
        hidden=config.hidden,
        time_freqs=config.time_freqs,
    )
    params = init_params(arch, stream.spawn(0))
    batches = stream.spawn(1)
    state = init_optim(
        params.values.size,
        learning_rate=config.learning_rate,
        weight_decay=config.weight_decay,
        max_grad_norm=config.max_grad_norm,
    )
    for step in range(config.steps):
        c = batches.integers(0, data.n_conditions, (config.batch_size,))
        x0 = np.empty((config.batch_size, data.state_dim))
        for cond in range(data.n_conditions):
            mask = c == cond
            count = int(np.sum(mask))
            if count:
                x0[mask] = sample_data(data, cond, count, batches)
        x1 = batches.normal((config.batch_size, data.state_dim))
        t = batches.uniform((config.batch_size,))
        try:
            loss, grad = fm_loss(params, x0, x1, t, c)
        except NumericError as err:
            raise TrainingError(
                f"pretraining diverged at step {step}: {err}", last_good=params
            ) from err
        params, state = optim_step(params, grad, state)
        if callback is not None:
            callback(step, loss)
    return params


def ode_step(params: ParamVector, x: np.ndarray, t_hi: float, t_lo: float, c) -> np.ndarray:
    """One Euler step of dx = v dt from t_hi down to t_lo; x is (B, d)."""
    v = net.velocity(params, x, t_hi, c)
    return x + v * (t_lo - t_hi)


def ode_sample_batch(
    params: ParamVector,
    c,
    schedule: TimeSchedule,
    n: int,
    stream: RandomStream,
    return_states: bool = False,
):
    """n deterministic samples for condition c; noise only at t = 1."""
    x = stream.normal((n, params.arch.state_dim))
    states = [x]
    times = schedule.times
    for k in range(schedule.steps):
        x = ode_step(params, x, float(times[k]), float(times[k + 1]), c)
        if not np.all(np.isfinite(x)):
            raise NumericError(f"ODE state non-finite after step {k}")
        states.append(x)
    if return_states:
        return x, states
    return x


def ode_sample(params: ParamVector, c, schedule: TimeSchedule, stream: RandomStream):
    """One sample plus its full trajectory of states (T+1, d)."""
    x, states = ode_sample_batch(params, c, schedule, 1, stream, return_states=True)
    return x[0], np.stack([s[0] for s in states], axis=0)
