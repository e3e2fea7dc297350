"""Exact analysis of step- versus chunk-level objective attribution.

The model: two opposed trajectories, advantages +1 and -1, T steps each.
Per-step objective coefficients form vectors of length 2T. The target
credit assignment flips sign on the m mis-attributed steps; step-level
group optimisation uses the advantage on every step; the single-chunk
objective is that vector uniformly scaled by 1/T (the first-order
smoothing of the geometric-mean ratio). Comparing squared distances to
the target decides which granularity is closer to the right update.

Everything here runs in exact rational arithmetic (integers and 1/T
fractions), so the identities are equalities, not approximations.

chunk_wins evaluates the published threshold quadratic
T^2 - (2m + 4) T + (4m + 1) <= 0. The quadratic is stricter than the
distance comparison it summarises for m >= 2; chunk_wins_by_distance
evaluates the two squared distances directly and is the ground truth
the sweep table reports alongside it.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .rewards import AttributionScenario


@dataclass(frozen=True)
class CoefficientVectors:
    """Per-step objective coefficients for the two-trajectory model.

    Layout: entries 0..T-1 are trajectory one's steps 1..T, entries
    T..2T-1 are trajectory two's. j_hat and j_grpo take values in
    {+1, -1}; j_chunk is j_grpo scaled by 1/T.
    """

    T: int
    m: int
    j_hat: tuple
    j_grpo: tuple
    j_chunk: tuple

    def __post_init__(self):
        n = 2 * self.T
        for name, vec in (("j_hat", self.j_hat), ("j_grpo", self.j_grpo)):
            if len(vec) != n or any(v not in (-1, 1) for v in vec):
                raise ValueError(f"{name} must be a length-{n} vector over {{+1, -1}}")
        if len(self.j_chunk) != n:
            raise ValueError(f"j_chunk must have length {n}")
        scale = Fraction(1, self.T)
        if any(Fraction(c) != scale * g for c, g in zip(self.j_chunk, self.j_grpo)):
            raise ValueError("j_chunk must equal j_grpo / T entrywise")


def build_vectors(T: int, m: int, ia_set) -> CoefficientVectors:
    """Coefficient vectors for a mis-attributed step set of size m."""
    ia = sorted(int(t) for t in ia_set)
    if len(ia) != m or len(set(ia)) != m:
        raise ValueError("ia_set must contain exactly m distinct steps")
    if m < 1 or m > T:
        raise ValueError("m must satisfy 1 <= m <= T")
    if ia[0] < 1 or ia[-1] > T:
        raise ValueError("ia_set entries must lie in 1..T")
    ia = set(ia)
    one = [(-1 if t in ia else 1) for t in range(1, T + 1)]
    j_hat = tuple(one + [-v for v in one])
    j_grpo = tuple([1] * T + [-1] * T)
    j_chunk = tuple(Fraction(v, T) for v in j_grpo)
    return CoefficientVectors(T=T, m=m, j_hat=j_hat, j_grpo=j_grpo, j_chunk=j_chunk)


def from_scenario(scenario: AttributionScenario) -> CoefficientVectors:
    """Vectors for a sampled scenario; labels_one is the target for trajectory one."""
    return build_vectors(scenario.T, scenario.m, scenario.t_ia)


def distance_sq(a, b) -> Fraction:
    """Exact squared Euclidean distance between coefficient vectors."""
    if len(a) != len(b):
        raise ValueError("vectors must have equal length")
    return sum((Fraction(x) - Fraction(y)) ** 2 for x, y in zip(a, b))


def grpo_distance_sq(T: int, m: int) -> Fraction:
    """||j_hat - j_grpo||^2; equals 8m for every valid (T, m)."""
    vecs = build_vectors(T, m, range(1, m + 1))
    return distance_sq(vecs.j_hat, vecs.j_grpo)


def chunk_distance_sq(T: int, m: int) -> Fraction:
    """||j_hat - j_chunk||^2; equals 2T - 4 + (8m + 2)/T exactly."""
    vecs = build_vectors(T, m, range(1, m + 1))
    return distance_sq(vecs.j_hat, vecs.j_chunk)


def chunk_distance_closed_form(T: int, m: int) -> Fraction:
    return 2 * T - 4 + Fraction(8 * m + 2, T)


def _validate_tm(T: int, m: int):
    if not (isinstance(T, int) and isinstance(m, int)):
        raise ValueError("T and m must be integers")
    if not 1 <= m <= T:
        raise ValueError("need 1 <= m <= T")


def chunk_wins(T: int, m: int) -> bool:
    """Published threshold: true iff T^2 - (2m + 4) T + (4m + 1) <= 0.

    Equivalent to T <= 5 for m = 1 and T <= 2m + 2 for m >= 2. For
    m >= 2 this undercounts the region where the chunk vector is
    actually closer; see chunk_wins_by_distance.
    """
    _validate_tm(T, m)
    return T * T - (2 * m + 4) * T + (4 * m + 1) <= 0


def chunk_wins_by_distance(T: int, m: int) -> bool:
    """Ground truth: the chunk vector is at least as close to the target.

    Exact comparison of the squared distances; algebraically this is
    (T - 1)(T - (4m + 1)) <= 0, i.e. T <= 4m + 1.
    """
    _validate_tm(T, m)
    return grpo_distance_sq(T, m) >= chunk_distance_sq(T, m)


def first_order_check(eps, T: int) -> float:
    """|geometric mean of (1 + eps_t) - (1 + mean eps)|.

    The gap is the second-order remainder of the smoothing relation;
    it must be O(max|eps|^2).
    """
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape != (T,):
        raise ValueError(f"need exactly T = {T} perturbations")
    if np.any(np.abs(eps) > 0.1):
        raise ValueError("perturbations must satisfy |eps| <= 0.1")
    if np.any(1.0 + eps <= 0.0):
        raise ValueError("1 + eps must stay positive")
    geometric = float(np.exp(np.mean(np.log1p(eps))))
    return abs(geometric - (1.0 + float(np.mean(eps))))


def win_region_rows(t_max: int = 12) -> list:
    """Sweep rows for T in [2, t_max], m in [1, T].

    Each row reports both the published threshold and the exact
    distance comparison so their disagreement is visible in outputs.
    """
    rows = []
    for T in range(2, t_max + 1):
        for m in range(1, T + 1):
            d_grpo = grpo_distance_sq(T, m)
            d_chunk = chunk_distance_sq(T, m)
            rows.append(
                {
                    "T": T,
                    "m": m,
                    "dist_sq_grpo": str(d_grpo),
                    "dist_sq_chunk": str(d_chunk),
                    "dist_sq_chunk_float": float(d_chunk),
                    "chunk_wins_quadratic": chunk_wins(T, m),
                    "chunk_wins_distance": chunk_wins_by_distance(T, m),
                }
            )
    return rows
