"""Group-relative policy optimisation over sampler transitions.

Rewards are normalised within each group of trajectories that share a
condition; the resulting advantages are constant across a trajectory.
The clipped surrogate is assembled from importance ratios at one of
three granularities:

- step: one ratio per stochastic transition,
- chunk: one ratio per contiguous block of transitions, the geometric
  mean of the per-step ratios (computed in log space),
- sequence: a single chunk spanning every stochastic transition.

All three are the same objective over different chunk plans: step is
the all-ones plan and sequence is the single-chunk plan. Each update
draws a subset of chunks (probability proportional to the plan weights,
without replacement) and only those transitions contribute.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tape
from .errors import NumericError
from .net import ParamVector
from .optim import OptimState, optim_step
from .rng import RandomStream
from .sde import Trajectory, TrajectoryGroup, gaussian_logp, transition_mean

VARIANTS = ("step", "chunk", "sequence")

DEGENERATE_STD = 1e-8


@dataclass(frozen=True)
class ChunkPlan:
    """Partition of the stochastic transitions into contiguous chunks.

    sizes must be positive and cover the transitions exactly; weights
    are per-chunk sampling weights (uniform selection when equal).
    """

    sizes: tuple
    weights: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise ValueError("chunk sizes must be positive integers")
        if self.weights is None:
            weights = tuple(1.0 for _ in sizes)
        else:
            weights = tuple(float(w) for w in self.weights)
        if len(weights) != len(sizes):
            raise ValueError("need exactly one weight per chunk")
        if any(w <= 0 for w in weights):
            raise ValueError("chunk weights must be positive")
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "weights", weights)

    @property
    def n_chunks(self) -> int:
        return len(self.sizes)

    @property
    def total(self) -> int:
        return sum(self.sizes)

    def boundaries(self) -> list:
        """Half-open (start, stop) transition ranges, one per chunk."""
        out = []
        start = 0
        for s in self.sizes:
            out.append((start, start + s))
            start += s
        return out

    def with_weights(self, weights) -> "ChunkPlan":
        return ChunkPlan(self.sizes, tuple(float(w) for w in weights))

    @classmethod
    def from_sizes(cls, sizes, weights=None) -> "ChunkPlan":
        return cls(tuple(sizes), None if weights is None else tuple(weights))

    @classmethod
    def unit(cls, n: int) -> "ChunkPlan":
        return cls(tuple(1 for _ in range(n)), None)

    @classmethod
    def single(cls, n: int) -> "ChunkPlan":
        return cls((n,), None)


@dataclass(frozen=True)
class GrpoConfig:
    clip_range: float = 5e-5
    kl_beta: float = 0.0
    group_size: int = 12
    fraction: float = 0.5
    learning_rate: float = 1e-3
    weight_decay: float = 1e-4
    max_grad_norm: float = 0.01
    eta: float = 0.7
    grad_accum: int = 1
    inner_steps: int = 1

    def __post_init__(self):
        if self.clip_range <= 0:
            raise ValueError("clip_range must be positive")
        if not 0 < self.fraction <= 1:
            raise ValueError("fraction must lie in (0, 1]")
        if self.group_size < 2:
            raise ValueError("group_size must be at least 2")


def compute_advantages(group: TrajectoryGroup) -> np.ndarray:
    """Within-group reward normalisation; writes back onto the members.

    Uses the population standard deviation. A spread below 1e-8 marks
    the group degenerate and zeroes every advantage.
    """
    rewards = group.rewards
    if np.any(~np.isfinite(rewards)):
        raise NumericError("group contains a non-finite reward")
    mean = float(np.mean(rewards))
    std = float(np.std(rewards))
    if std < DEGENERATE_STD:
        adv = np.zeros_like(rewards)
        group.degenerate = True
    else:
        adv = (rewards - mean) / std
    for member, a in zip(group.members, adv):
        member.advantage = float(a)
    return adv


def _logp_now(arch, theta, transitions, c):
    """(G,) log-densities of one transition index across group members."""
    x_from = np.stack([tr.x_from for tr in transitions])
    samples = np.stack([tr.sample for tr in transitions])
    lead = transitions[0]
    mean = transition_mean(arch, theta, x_from, lead.t_hi, lead.t_lo, lead.sigma, c)
    return gaussian_logp(samples, mean, lead.std, arch.state_dim)


def step_ratio(params: ParamVector, transition, c) -> float:
    """Importance ratio of a single stochastic transition."""
    if transition.logp_old is None:
        raise ValueError("transition has no recorded sampling log-probability")
    logp = _logp_now(params.arch, params.values, [transition], c)
    return float(np.exp(logp[0] - transition.logp_old))


def chunk_ratio(params: ParamVector, transitions, c) -> float:
    """Geometric mean of the per-step ratios, computed in log space."""
    if not transitions:
        raise ValueError("chunk_ratio needs at least one transition")
    total = 0.0
    for tr in transitions:
        if tr.logp_old is None:
            raise ValueError("transition has no recorded sampling log-probability")
        logp = _logp_now(params.arch, params.values, [tr], c)
        total += float(logp[0]) - tr.logp_old
    return float(np.exp(total / len(transitions)))


def clipped_objective(ratios, advantages, clip_range: float):
    """Mean over units and members of min(r A, clip(r) A).

    ratios is a sequence of (G,) arrays or tape Vars, one per objective
    unit (transition or chunk); advantages is the matching (G,) vector.
    """
    if not ratios:
        raise ValueError("clipped objective needs at least one ratio unit")
    advantages = np.asarray(advantages, dtype=np.float64)
    terms = []
    for r in ratios:
        unclipped = tape.mul(r, advantages)
        clipped = tape.mul(tape.clip(r, 1.0 - clip_range, 1.0 + clip_range), advantages)
        terms.append(tape.minimum(unclipped, clipped))
    return tape.vmean(tape.concatenate(terms))


def kl_penalty(params: ParamVector, ref_params: ParamVector, transitions, c) -> float:
    """Mean per-transition Gaussian KL against a reference policy.

    Both policies share the sampled std, so the KL reduces to
    ||mu - mu_ref||^2 / (2 std^2) per transition.
    """
    value = _kl_term(params.arch, params.values, ref_params, transitions, c)
    return float(tape.value_of(value))


def _kl_term(arch, theta, ref_params: ParamVector, transitions, c):
    if not transitions:
        raise ValueError("kl penalty needs at least one transition")
    terms = []
    for tr in transitions:
        x = tr.x_from[None, :]
        mu = transition_mean(arch, theta, x, tr.t_hi, tr.t_lo, tr.sigma, c)
        mu_ref = transition_mean(
            arch, ref_params.values, x, tr.t_hi, tr.t_lo, tr.sigma, c
        )
        diff = tape.sub(mu, np.asarray(tape.value_of(mu_ref)))
        quad = tape.vsum(tape.mul(diff, diff), axis=1)
        terms.append(tape.mul(quad, 1.0 / (2.0 * tr.std * tr.std)))
    return tape.vmean(tape.concatenate(terms))


def select_chunks(plan: ChunkPlan, fraction: float, stream: RandomStream) -> tuple:
    """Draw round(fraction * K) chunks (at least one) without replacement.

    Each draw picks proportionally to the plan weights renormalised over
    the chunks still available; equal weights reduce to uniform draws.
    """
    k_total = plan.n_chunks
    k = min(k_total, max(1, int(math.floor(fraction * k_total + 0.5))))
    remaining = list(range(k_total))
    weights = np.asarray(plan.weights, dtype=np.float64)
    picks = []
    for _ in range(k):
        probs = weights[remaining] / np.sum(weights[remaining])
        u = float(stream.uniform())
        idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
        idx = min(idx, len(remaining) - 1)
        picks.append(remaining.pop(idx))
    return tuple(sorted(picks))


def effective_plan(plan: ChunkPlan, variant: str, n_transitions: int) -> ChunkPlan:
    """The plan actually optimised by a variant.

    step ignores the plan (every transition its own unit), sequence
    collapses everything into one chunk, chunk uses the plan as given.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant == "step":
        return ChunkPlan.unit(n_transitions)
    if variant == "sequence":
        return ChunkPlan.single(n_transitions)
    if plan.total != n_transitions:
        raise ValueError(
            f"plan covers {plan.total} transitions but rollouts have {n_transitions}"
        )
    return plan


@dataclass
class UpdateMetrics:
    objective: float
    surrogate: float
    kl: float
    ratio_mean: float
    ratio_max: float
    clip_fraction: float
    reward_mean: float
    reward_std: float
    selected: tuple
    n_groups: int
    degenerate_groups: int
    grad_norm: float


def _group_objective(arch, theta, group: TrajectoryGroup, plan: ChunkPlan, selected, config, ref_params, ratio_sink=None):
    """Clipped surrogate (minus any KL penalty) for one group."""
    boundaries = plan.boundaries()
    transitions_by_index = [
        [m.stochastic_transitions[k] for m in group.members]
        for k in range(plan.total)
    ]
    ratios = []
    for j in selected:
        start, stop = boundaries[j]
        acc = None
        for k in range(start, stop):
            logp = _logp_now(arch, theta, transitions_by_index[k], group.condition)
            logp_old = np.array(
                [tr.logp_old for tr in transitions_by_index[k]], dtype=np.float64
            )
            delta = tape.sub(logp, logp_old)
            acc = delta if acc is None else tape.add(acc, delta)
        ratios.append(tape.exp(tape.mul(acc, 1.0 / (stop - start))))
    if ratio_sink is not None:
        ratio_sink.extend(np.asarray(tape.value_of(r)) for r in ratios)
    objective = clipped_objective(ratios, group.advantages, config.clip_range)
    kl_value = 0.0
    if config.kl_beta > 0.0:
        if ref_params is None:
            raise ValueError("kl_beta > 0 requires reference parameters")
        flat = [
            tr
            for j in selected
            for k in range(*boundaries[j])
            for tr in transitions_by_index[k]
        ]
        kl = _kl_term(arch, theta, ref_params, flat, group.condition)
        kl_value = float(tape.value_of(kl))
        objective = tape.sub(objective, tape.mul(kl, config.kl_beta))
    return objective, kl_value


def objective_value(
    params: ParamVector,
    groups,
    plan: ChunkPlan,
    config: GrpoConfig,
    variant: str,
    selected,
    ref_params: ParamVector = None,
) -> float:
    """Plain evaluation of the update objective at arbitrary parameters.

    Same assembly as grpo_update but without the tape; useful for
    finite-difference checks and for probing the old-policy fixed point.
    """
    for group in groups:
        if any(m.advantage is None for m in group.members):
            compute_advantages(group)
    live = [g for g in groups if not g.degenerate]
    if not live:
        return 0.0
    n_transitions = len(live[0].members[0].stochastic_transitions)
    eff = effective_plan(plan, variant, n_transitions)
    values = []
    for group in live:
        obj, _ = _group_objective(
            params.arch, params.values, group, eff, selected, config, ref_params
        )
        values.append(float(tape.value_of(obj)))
    return float(np.mean(values))


def objective_gradient(
    params: ParamVector,
    groups,
    plan: ChunkPlan,
    config: GrpoConfig,
    variant: str,
    selected,
    ref_params: ParamVector = None,
):
    """(objective, d objective / d theta) without touching an optimiser.

    Identical assembly to grpo_update's ascent direction; exposed for
    finite-difference checks and variant-equivalence probes.
    """
    for group in groups:
        if any(m.advantage is None for m in group.members):
            compute_advantages(group)
    live = [g for g in groups if not g.degenerate]
    if not live:
        return 0.0, np.zeros_like(params.values)
    n_transitions = len(live[0].members[0].stochastic_transitions)
    eff = effective_plan(plan, variant, n_transitions)
    theta = tape.Var(params.values)
    objs = []
    for group in live:
        obj, _ = _group_objective(
            params.arch, theta, group, eff, selected, config, ref_params
        )
        objs.append(obj)
    total = objs[0]
    for obj in objs[1:]:
        total = tape.add(total, obj)
    objective = tape.mul(total, 1.0 / len(objs))
    tape.backward(objective)
    grad = theta.grad if theta.grad is not None else np.zeros_like(params.values)
    return float(tape.value_of(objective)), grad


def grpo_update(
    params: ParamVector,
    groups,
    plan: ChunkPlan,
    config: GrpoConfig,
    variant: str,
    optim_state: OptimState,
    stream: RandomStream = None,
    selected=None,
    ref_params: ParamVector = None,
):
    """One ascent step on the clipped surrogate.

    groups are micro-batches: the gradient is the mean of per-group
    gradients, all applied in one optimiser step. Chunk selection is
    drawn once and shared by every group so their objectives are
    commensurate. Returns (params, optim_state, UpdateMetrics).
    """
    if not groups:
        raise ValueError("grpo_update needs at least one group")
    for group in groups:
        if any(m.advantage is None for m in group.members):
            compute_advantages(group)
    n_transitions = len(groups[0].members[0].stochastic_transitions)
    for group in groups:
        for member in group.members:
            if len(member.stochastic_transitions) != n_transitions:
                raise ValueError("groups mix rollouts of different lengths")
    eff = effective_plan(plan, variant, n_transitions)
    if selected is None:
        if stream is None:
            raise ValueError("need a stream (or explicit selection) to draw chunks")
        selected = select_chunks(eff, config.fraction, stream)
    else:
        selected = tuple(sorted(int(j) for j in selected))
        if any(j < 0 or j >= eff.n_chunks for j in selected):
            raise ValueError("selected chunk index out of range")

    live = [g for g in groups if not g.degenerate]
    rewards = np.concatenate([g.rewards for g in groups])
    base_metrics = dict(
        reward_mean=float(np.mean(rewards)),
        reward_std=float(np.std(rewards)),
        selected=selected,
        n_groups=len(groups),
        degenerate_groups=len(groups) - len(live),
    )
    if not live:
        # nothing to learn from; parameters pass through unchanged
        metrics = UpdateMetrics(
            objective=0.0, surrogate=0.0, kl=0.0, ratio_mean=1.0, ratio_max=1.0,
            clip_fraction=0.0, grad_norm=0.0, **base_metrics,
        )
        return params, optim_state, metrics

    theta = tape.Var(params.values)
    ratio_values = []
    objs = []
    kl_values = []
    for group in live:
        obj, kl_value = _group_objective(
            params.arch, theta, group, eff, selected, config, ref_params,
            ratio_sink=ratio_values,
        )
        objs.append(obj)
        kl_values.append(kl_value)
    total = objs[0]
    for obj in objs[1:]:
        total = tape.add(total, obj)
    objective = tape.mul(total, 1.0 / len(objs))
    objective_val = float(tape.value_of(objective))
    if not np.isfinite(objective_val):
        raise NumericError("update objective is non-finite")
    tape.backward(objective)
    ascent = theta.grad if theta.grad is not None else np.zeros_like(params.values)
    if not np.all(np.isfinite(ascent)):
        raise NumericError("update gradient is non-finite")
    new_params, new_state = optim_step(params, -ascent, optim_state)

    flat_ratios = np.concatenate(ratio_values)
    kl_mean = float(np.mean(kl_values))
    metrics = UpdateMetrics(
        objective=objective_val,
        surrogate=objective_val + config.kl_beta * kl_mean,
        kl=kl_mean,
        ratio_mean=float(np.mean(flat_ratios)),
        ratio_max=float(np.max(flat_ratios)),
        clip_fraction=float(np.mean(np.abs(flat_ratios - 1.0) > config.clip_range)),
        grad_norm=float(np.linalg.norm(ascent)),
        **base_metrics,
    )
    return new_params, new_state, metrics
