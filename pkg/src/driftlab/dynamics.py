"""Denoising-dynamics profiles and profile-guided chunking.

The profile of a rollout batch is the mean relative L1 change per
stochastic transition: || x_next - x ||_1 / || x ||_1, normalised by
the state at the higher time. Segmentation places chunk boundaries
where the profile bends hardest (largest absolute discrete second
difference), so transitions with similar dynamics share a chunk.
Chunk-level sampling weights are mean in-chunk change relative to the
global mean change, which makes them average to one transition-wise.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grpo import ChunkPlan

ZERO_NORM = 1e-12


@dataclass(frozen=True)
class DynamicsProfile:
    """Per-transition mean relative L1 change over a rollout batch."""

    values: np.ndarray
    n_trajectories: int
    condition: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.shape[0] < 1:
            raise ValueError("profile must be a non-empty vector")
        object.__setattr__(self, "values", values)

    @property
    def n_transitions(self) -> int:
        return self.values.shape[0]


def _states_of(trajectory) -> np.ndarray:
    if hasattr(trajectory, "states"):
        return np.asarray(trajectory.states, dtype=np.float64)
    return np.asarray(trajectory, dtype=np.float64)


def l1_rel_profile(trajectories, condition=None) -> DynamicsProfile:
    """Profile over the stochastic transitions of a batch of rollouts.

    Accepts Trajectory objects or raw (steps + 1, d) state arrays. The
    final transition is deterministic and excluded. Transitions whose
    reference state has (near-)zero L1 norm are skipped with a warning.
    """
    if not trajectories:
        raise ValueError("need at least one trajectory")
    stacks = [_states_of(tr) for tr in trajectories]
    shape = stacks[0].shape
    if any(s.shape != shape for s in stacks):
        raise ValueError("trajectories disagree on shape")
    states = np.stack(stacks, axis=0)  # (n, steps + 1, d)
    n_opt = shape[0] - 2
    if n_opt < 1:
        raise ValueError("trajectories too short to profile")
    diffs = np.sum(np.abs(states[:, 1:-1] - states[:, :-2]), axis=2)  # (n, n_opt)
    norms = np.sum(np.abs(states[:, :-2]), axis=2)  # (n, n_opt)
    valid = norms > ZERO_NORM
    values = np.zeros(n_opt)
    for k in range(n_opt):
        live = valid[:, k]
        if not np.any(live):
            warnings.warn(
                f"transition {k}: all reference states have zero norm; profile entry set to 0"
            )
            continue
        if not np.all(live):
            warnings.warn(
                f"transition {k}: {int(np.sum(~live))} trajectories skipped (zero-norm state)"
            )
        values[k] = float(np.mean(diffs[live, k] / norms[live, k]))
    return DynamicsProfile(values=values, n_trajectories=len(trajectories), condition=condition)


def segment_chunks(
    profile: DynamicsProfile,
    n_chunks: int,
    first_chunk_size: int = 2,
    min_size: int = 1,
) -> ChunkPlan:
    """Partition the transitions into n_chunks guided by the profile.

    The first boundary is pinned after first_chunk_size transitions
    (the opening transitions behave unlike everything after them and
    always get their own chunk). Remaining boundaries go where the
    profile's discrete second difference is largest in magnitude, ties
    resolved toward the earliest position.
    """
    n = profile.n_transitions
    if n_chunks < 1:
        raise ValueError("need at least one chunk")
    if n_chunks == 1:
        return ChunkPlan.single(n)
    if first_chunk_size < 1 or first_chunk_size >= n:
        raise ValueError("first chunk must be shorter than the profile")
    if n_chunks > 1 + (n - first_chunk_size):
        raise ValueError(f"cannot cut {n} transitions into {n_chunks} chunks")
    boundaries = {first_chunk_size}
    if n_chunks > 2:
        v = profile.values
        curvature = np.abs(v[2:] - 2.0 * v[1:-1] + v[:-2])  # defined at 1 .. n-2
        # candidates sorted by curvature, then by position for ties
        order = sorted(range(1, n - 1), key=lambda p: (-curvature[p - 1], p))
        for p in order:
            if len(boundaries) == n_chunks - 1:
                break
            if any(abs(p - b) < min_size for b in boundaries):
                continue
            if p < first_chunk_size + min_size or p > n - min_size:
                continue
            boundaries.add(p)
        # profile too flat or too short on candidates: fill left to right
        if len(boundaries) < n_chunks - 1:
            for p in range(first_chunk_size + min_size, n):
                if len(boundaries) == n_chunks - 1:
                    break
                if any(abs(p - b) < min_size for b in boundaries):
                    continue
                boundaries.add(p)
        if len(boundaries) < n_chunks - 1:
            raise ValueError("profile cannot support the requested chunk count")
    cuts = [0, *sorted(boundaries), n]
    sizes = tuple(b - a for a, b in zip(cuts[:-1], cuts[1:]))
    return ChunkPlan.from_sizes(sizes)


def fallback_plan(n_transitions: int, base=(2, 3, 4, 7)) -> ChunkPlan:
    """Reference plan rescaled to n_transitions by largest remainder."""
    if n_transitions < len(base):
        raise ValueError("too few transitions for the reference plan")
    base = np.asarray(base, dtype=np.float64)
    ideal = base / np.sum(base) * n_transitions
    sizes = np.floor(ideal).astype(int)
    sizes = np.maximum(sizes, 1)
    while np.sum(sizes) > n_transitions:
        sizes[int(np.argmax(sizes))] -= 1
    remainder = ideal - np.floor(ideal)
    while np.sum(sizes) < n_transitions:
        order = sorted(range(len(base)), key=lambda j: (-remainder[j], j))
        sizes[order[0]] += 1
        remainder[order[0]] = -1.0
    return ChunkPlan.from_sizes(tuple(int(s) for s in sizes))


def sampling_weights(profile: DynamicsProfile, plan: ChunkPlan) -> np.ndarray:
    """Per-chunk weights: mean in-chunk change over global mean change.

    Weighted by chunk size these average back to one, i.e.
    sum_j size_j * w_j = n_transitions. A flat-zero profile is a
    degenerate signal; every weight falls back to 1 with a warning.
    """
    if plan.total != profile.n_transitions:
        raise ValueError("plan and profile cover different transition counts")
    global_mean = float(np.mean(profile.values))
    if global_mean <= ZERO_NORM:
        warnings.warn("profile mean is zero; falling back to uniform chunk weights")
        return np.ones(plan.n_chunks)
    return np.array(
        [
            float(np.mean(profile.values[start:stop])) / global_mean
            for start, stop in plan.boundaries()
        ]
    )


def profile_invariance(profiles) -> tuple:
    """Pairwise Pearson correlations between profiles.

    Returns (matrix, min_correlation). Pairs involving a zero-variance
    profile are undefined (nan) and excluded from the minimum.
    """
    vectors = [np.asarray(getattr(p, "values", p), dtype=np.float64) for p in profiles]
    if len(vectors) < 2:
        raise ValueError("need at least two profiles to compare")
    if any(v.shape != vectors[0].shape for v in vectors):
        raise ValueError("profiles disagree on length")
    m = len(vectors)
    corr = np.full((m, m), np.nan)
    for i in range(m):
        for j in range(m):
            vi, vj = vectors[i], vectors[j]
            si, sj = float(np.std(vi)), float(np.std(vj))
            if si < ZERO_NORM or sj < ZERO_NORM:
                continue
            corr[i, j] = float(np.corrcoef(vi, vj)[0, 1])
    off_diag = corr[~np.eye(m, dtype=bool)]
    defined = off_diag[~np.isnan(off_diag)]
    minimum = float(np.min(defined)) if defined.size else float("nan")
    return corr, minimum
