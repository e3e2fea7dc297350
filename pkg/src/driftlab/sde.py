"""Stochastic rollouts with exact Gaussian transition log-probabilities.

The sampler integrates the marginal-preserving SDE

    dx = [v + sigma_t^2 / (2t) * (x + (1 - t) v)] dt + sigma_t dw,
    sigma_t = eta * sqrt(t / (1 - t)),

with Euler-Maruyama steps on a decreasing time schedule. Each step is
then an exact diagonal Gaussian: mean = x + drift * (t_lo - t_hi),
std = sigma_t * sqrt(t_hi - t_lo), so every transition has a
closed-form log-probability and the whole trajectory factorises.

Two guards shape the numerics. sigma_t diverges at t = 1, so for the
first transition the noise scale is evaluated at the transition's lower
time instead (capped at 1 - 1e-4); the drift's structural factors keep
t_hi, where (1 - t_hi) = 0 makes the correction benign. And the final
transition (into t = 0) is taken deterministically as a plain Euler ODE
step; it carries no log-probability and is excluded from optimisation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import net, tape
from .errors import NumericError
from .flow import TimeSchedule
from .net import Arch, ParamVector
from .rng import RandomStream

SIGMA_TIME_CAP = 1.0 - 1e-4


def sigma_eval_time(t_hi: float, t_lo: float) -> float:
    """Time at which the noise scale is evaluated for one transition."""
    if t_hi <= SIGMA_TIME_CAP:
        return t_hi
    return min(t_lo, SIGMA_TIME_CAP)


def noise_scale(t_hi: float, t_lo: float, eta: float) -> float:
    """sigma for the transition t_hi -> t_lo; zero for the final step."""
    if t_lo <= 0.0:
        return 0.0
    t = sigma_eval_time(t_hi, t_lo)
    return eta * math.sqrt(t / (1.0 - t))


def transition_mean(arch: Arch, theta, x, t_hi: float, t_lo: float, sigma: float, c):
    """Euler-Maruyama mean of the next state; theta may be ndarray or Var.

    With sigma = 0 this reduces exactly to the deterministic Euler step.
    """
    v = net.apply_network(arch, theta, net.make_input(arch, x, t_hi, c))
    if sigma == 0.0:
        drift = v
    else:
        coef = sigma * sigma / (2.0 * t_hi)
        drift = tape.add(v, tape.mul(tape.add(x, tape.mul(v, 1.0 - t_hi)), coef))
    return tape.add(x, tape.mul(drift, t_lo - t_hi))


def gaussian_logp(sample, mean, std: float, d: int):
    """Row-wise diagonal Gaussian log-density; polymorphic in mean."""
    err = tape.sub(sample, mean)
    quad = tape.mul(tape.vsum(tape.mul(err, err), axis=1), 1.0 / (2.0 * std * std))
    const = 0.5 * d * math.log(2.0 * math.pi * std * std)
    return tape.sub(tape.mul(quad, -1.0), const)


@dataclass
class Transition:
    """One sampler step with everything needed to re-derive its density."""

    index: int
    t_hi: float
    t_lo: float
    x_from: np.ndarray
    sigma: float
    std: float
    mean: np.ndarray
    noise: np.ndarray | None
    sample: np.ndarray
    logp_old: float | None

    @property
    def stochastic(self) -> bool:
        return self.std > 0.0


@dataclass
class Trajectory:
    condition: int
    transitions: list
    final: np.ndarray
    reward: float | None = None
    advantage: float | None = None

    @property
    def stochastic_transitions(self) -> list:
        return [tr for tr in self.transitions if tr.stochastic]

    @property
    def states(self) -> np.ndarray:
        """All visited states, shape (steps + 1, d)."""
        rows = [self.transitions[0].x_from] + [tr.sample for tr in self.transitions]
        return np.stack(rows, axis=0)


@dataclass
class TrajectoryGroup:
    condition: int
    members: list
    degenerate: bool = False

    @property
    def rewards(self) -> np.ndarray:
        return np.array([m.reward for m in self.members], dtype=np.float64)

    @property
    def advantages(self) -> np.ndarray:
        return np.array([m.advantage for m in self.members], dtype=np.float64)


def sde_step(params: ParamVector, x, t_hi: float, t_lo: float, c, eta: float, noise):
    """One stochastic step for a (B, d) batch; returns (sample, mean, std)."""
    x = np.asarray(x, dtype=np.float64)
    sigma = noise_scale(t_hi, t_lo, eta)
    std = sigma * math.sqrt(t_hi - t_lo)
    mean = transition_mean(params.arch, params.values, x, t_hi, t_lo, sigma, c)
    if std > 0.0:
        sample = mean + std * np.asarray(noise, dtype=np.float64)
    else:
        sample = mean
    return sample, mean, std


def transition_log_prob(params: ParamVector, transition: Transition, c):
    """Log-density of a recorded transition under the given parameters.

    Returns (logp, gradient of logp with respect to the parameters).
    Deterministic transitions have no density; asking for one is an error.
    """
    if not transition.stochastic:
        raise ValueError("deterministic transition has no log-probability")
    x = transition.x_from[None, :]
    sample = transition.sample[None, :]
    d = params.arch.state_dim

    def logp_fn(theta):
        mean = transition_mean(
            params.arch, theta, x, transition.t_hi, transition.t_lo, transition.sigma, c
        )
        return tape.vsum(gaussian_logp(sample, mean, transition.std, d))

    value, grad = net.grad_params(params, logp_fn)
    return value, grad


def rollout_group(
    params: ParamVector,
    c: int,
    group_size: int,
    schedule: TimeSchedule,
    eta: float,
    stream: RandomStream,
    reward_fn=None,
) -> TrajectoryGroup:
    """Sample a group of trajectories for one condition.

    All members share the parameters and condition and are driven by the
    given stream; logp_old is recorded per stochastic transition at the
    sampling parameters. reward_fn, if given, maps (finals, c) to a
    vector of rewards.
    """
    if group_size < 2:
        raise ValueError("a group needs at least two members")
    if eta <= 0.0:
        raise ValueError("stochastic rollouts need eta > 0")
    d = params.arch.state_dim
    times = schedule.times
    x = stream.normal((group_size, d))
    per_member = [[] for _ in range(group_size)]
    for k in range(schedule.steps):
        t_hi, t_lo = float(times[k]), float(times[k + 1])
        sigma = noise_scale(t_hi, t_lo, eta)
        std = sigma * math.sqrt(t_hi - t_lo)
        mean = transition_mean(params.arch, params.values, x, t_hi, t_lo, sigma, c)
        if std > 0.0:
            noise = stream.normal((group_size, d))
            sample = mean + std * noise
            logp = gaussian_logp(sample, mean, std, d)
        else:
            noise = None
            sample = mean
            logp = None
        if not np.all(np.isfinite(sample)):
            raise NumericError(f"rollout state non-finite after step {k}")
        for i in range(group_size):
            per_member[i].append(
                Transition(
                    index=k,
                    t_hi=t_hi,
                    t_lo=t_lo,
                    x_from=x[i].copy(),
                    sigma=sigma,
                    std=std,
                    mean=mean[i].copy(),
                    noise=None if noise is None else noise[i].copy(),
                    sample=sample[i].copy(),
                    logp_old=None if logp is None else float(logp[i]),
                )
            )
        x = sample
    members = [
        Trajectory(condition=int(c), transitions=per_member[i], final=x[i].copy())
        for i in range(group_size)
    ]
    if reward_fn is not None:
        rewards = np.asarray(reward_fn(x, int(c)), dtype=np.float64)
        for member, r in zip(members, rewards):
            member.reward = float(r)
    return TrajectoryGroup(condition=int(c), members=members)


def hybrid_sample_batch(
    trained: ParamVector,
    reference: ParamVector,
    split: int,
    schedule: TimeSchedule,
    c,
    n: int,
    stream: RandomStream,
) -> np.ndarray:
    """Deterministic sampling that hands over mid-trajectory.

    The trained parameters drive the first `split` transitions and the
    reference parameters the remainder; only the initial noise is random.
    """
    if not 0 <= split <= schedule.steps:
        raise ValueError(f"split must lie in [0, {schedule.steps}]")
    if trained.arch != reference.arch:
        raise ValueError("trained and reference parameters must share an architecture")
    x = stream.normal((n, trained.arch.state_dim))
    times = schedule.times
    for k in range(schedule.steps):
        params = trained if k < split else reference
        v = net.velocity(params, x, float(times[k]), c)
        x = x + v * (float(times[k + 1]) - float(times[k]))
        if not np.all(np.isfinite(x)):
            raise NumericError(f"hybrid state non-finite after step {k}")
    return x


def hybrid_sample(
    trained: ParamVector,
    reference: ParamVector,
    split: int,
    schedule: TimeSchedule,
    c,
    stream: RandomStream,
) -> np.ndarray:
    """Single-sample convenience wrapper around hybrid_sample_batch."""
    return hybrid_sample_batch(trained, reference, split, schedule, c, 1, stream)[0]


def trajectory_to_dict(trajectory: Trajectory) -> dict:
    return {
        "condition": trajectory.condition,
        "reward": trajectory.reward,
        "advantage": trajectory.advantage,
        "final": trajectory.final.tolist(),
        "transitions": [
            {
                "index": tr.index,
                "t_hi": tr.t_hi,
                "t_lo": tr.t_lo,
                "x_from": tr.x_from.tolist(),
                "sigma": tr.sigma,
                "std": tr.std,
                "mean": tr.mean.tolist(),
                "sample": tr.sample.tolist(),
                "logp_old": tr.logp_old,
            }
            for tr in trajectory.transitions
        ],
    }


def group_to_dict(group: TrajectoryGroup) -> dict:
    return {
        "condition": group.condition,
        "degenerate": group.degenerate,
        "members": [trajectory_to_dict(m) for m in group.members],
    }
