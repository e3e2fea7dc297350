"""Synthetic reward models and mis-attribution scenarios.

Rewards are deterministic functions of the final state and condition:
a mode-preference score (how close the sample sits to a designated
subset of the condition's modes) and a fidelity score (how much the
sample still looks like the data distribution, an anti-collapse term).
The attribution scenario generator produces the paired step-label
trajectories used by the exact step-vs-chunk analysis.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import DataSpec, mixture_logpdf
from .rng import RandomStream

KINDS = ("mode-preference", "fidelity", "composite")


@dataclass(frozen=True)
class RewardSpec:
    """Reward definition bound to a dataset.

    preferred holds, per condition, the data-mode indices counted as
    preferred; by default the first mode of each condition. weights mix
    (preference, fidelity) for the composite kind and must sum to 1.
    """

    data: DataSpec
    kind: str = "composite"
    preferred: tuple = None
    tau: float = 1.0
    weights: tuple = (0.7, 0.3)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown reward kind {self.kind!r}")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.preferred is None:
            preferred = tuple((g[0],) for g in self.data.condition_modes)
        else:
            preferred = tuple(tuple(int(i) for i in g) for g in self.preferred)
        if len(preferred) != self.data.n_conditions:
            raise ValueError("need preferred modes for every condition")
        for c, group in enumerate(preferred):
            own = set(self.data.condition_modes[c])
            if not group or not set(group) <= own:
                raise ValueError(f"condition {c}: preferred modes must be its own modes")
        weights = tuple(float(w) for w in self.weights)
        if len(weights) != 2 or any(w < 0 for w in weights) or abs(sum(weights) - 1) > 1e-12:
            raise ValueError("composite weights must be two non-negatives summing to 1")
        object.__setattr__(self, "preferred", preferred)
        object.__setattr__(self, "weights", weights)


def mode_preference_reward(x0, c, spec: RewardSpec) -> np.ndarray:
    """max over preferred modes of exp(-||x0 - mu||^2 / (2 tau^2)), in (0, 1]."""
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    mu = spec.data.centers[list(spec.preferred[int(c)])]
    sq = np.sum((x0[:, None, :] - mu[None, :, :]) ** 2, axis=2)
    return np.exp(-np.min(sq, axis=1) / (2.0 * spec.tau**2))


def fidelity_reward(x0, data: DataSpec, c) -> np.ndarray:
    """Conditional mixture density relative to its peak, in (0, 1].

    The peak is probed at the condition's mode centers; ratios are
    capped at 1 so heavy mode overlap cannot push the score above it.
    """
    x0 = np.atleast_2d(np.asarray(x0, dtype=np.float64))
    centers = data.centers[list(data.condition_modes[int(c)])]
    peak = float(np.max(mixture_logpdf(data, centers, c)))
    return np.minimum(1.0, np.exp(mixture_logpdf(data, x0, c) - peak))


def composite_reward(x0, c, spec: RewardSpec) -> np.ndarray:
    w_pref, w_fid = spec.weights
    return w_pref * mode_preference_reward(x0, c, spec) + w_fid * fidelity_reward(
        x0, spec.data, c
    )


def reward_fn(spec: RewardSpec):
    """Vectorised (finals, c) -> rewards closure for rollout collection."""
    if spec.kind == "mode-preference":
        return lambda x, c: mode_preference_reward(x, c, spec)
    if spec.kind == "fidelity":
        return lambda x, c: fidelity_reward(x, spec.data, c)
    return lambda x, c: composite_reward(x, c, spec)


@dataclass(frozen=True)
class AttributionScenario:
    """Two opposed trajectories with m mis-attributed step labels.

    labels_one is +1 on accurately attributed steps and -1 on the
    mis-attributed set; labels_two is its negation. Steps are indexed
    1..T; t_ia is the mis-attributed subset.
    """

    T: int
    m: int
    t_ia: tuple
    labels_one: tuple
    labels_two: tuple

    def __post_init__(self):
        if not 1 <= self.m <= self.T:
            raise ValueError("m must satisfy 1 <= m <= T")
        t_ia = tuple(sorted(int(t) for t in self.t_ia))
        if len(t_ia) != self.m or len(set(t_ia)) != self.m:
            raise ValueError("t_ia must contain exactly m distinct steps")
        if t_ia and (t_ia[0] < 1 or t_ia[-1] > self.T):
            raise ValueError("t_ia entries must lie in 1..T")
        for labels in (self.labels_one, self.labels_two):
            if len(labels) != self.T or any(l not in (-1, 1) for l in labels):
                raise ValueError("labels must be length-T vectors over {+1, -1}")
        if tuple(-l for l in self.labels_one) != tuple(self.labels_two):
            raise ValueError("the two trajectories must carry opposite labels")
        object.__setattr__(self, "t_ia", t_ia)

    @property
    def t_a(self) -> tuple:
        """Accurately attributed steps: the complement of t_ia in 1..T."""
        ia = set(self.t_ia)
        return tuple(t for t in range(1, self.T + 1) if t not in ia)


def build_attribution_scenario(T: int, m: int, stream: RandomStream) -> AttributionScenario:
    """Draw the mis-attributed step set uniformly without replacement."""
    if not 1 <= m <= T:
        raise ValueError("m must satisfy 1 <= m <= T")
    order = np.argsort(stream.uniform((T,)))  # uniform random subset
    t_ia = tuple(sorted(int(i) + 1 for i in order[:m]))
    ia = set(t_ia)
    labels_one = tuple(-1 if t in ia else 1 for t in range(1, T + 1))
    labels_two = tuple(-l for l in labels_one)
    return AttributionScenario(T=T, m=m, t_ia=t_ia, labels_one=labels_one, labels_two=labels_two)
