"""Synthetic conditional 2-D distributions.

Both dataset kinds are represented as isotropic Gaussian mixtures: the
ring is a mixture by construction, and the two-moons shape is
approximated by a chain of small Gaussians along each arc. One
representation means sampling, exact mixture log-densities, and
per-mode bookkeeping work identically for both.

A condition selects a subset of mixture components; sampling and
densities are always conditional.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import RandomStream


@dataclass(frozen=True)
class DataSpec:
    """A conditional Gaussian-mixture dataset.

    kind: "gaussian-mixture" or "two-moons" (construction label).
    centers: (M, state_dim) component means.
    sigmas: (M,) isotropic component scales; covariance is sigma^2 I,
        positive definite iff sigma > 0.
    condition_modes: per-condition tuples of component indices.
    """

    kind: str
    state_dim: int
    centers: np.ndarray
    sigmas: np.ndarray
    condition_modes: tuple

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64)
        sigmas = np.asarray(self.sigmas, dtype=np.float64)
        if self.kind not in ("gaussian-mixture", "two-moons"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if centers.ndim != 2 or centers.shape[1] != self.state_dim:
            raise ValueError("centers must have shape (M, state_dim)")
        if sigmas.shape != (centers.shape[0],):
            raise ValueError("need one sigma per mixture component")
        if np.any(sigmas <= 0):
            raise ValueError("component covariances must be positive definite")
        modes = tuple(tuple(int(i) for i in group) for group in self.condition_modes)
        if not modes or any(len(g) == 0 for g in modes):
            raise ValueError("every condition needs at least one component")
        flat = [i for g in modes for i in g]
        if min(flat) < 0 or max(flat) >= centers.shape[0]:
            raise ValueError("condition references a component out of range")
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "condition_modes", modes)

    @property
    def n_modes(self) -> int:
        return self.centers.shape[0]

    @property
    def n_conditions(self) -> int:
        return len(self.condition_modes)


def ring_mixture(
    n_modes: int = 8,
    radius: float = 4.0,
    sigma: float = 0.3,
    modes_per_condition: int = 2,
) -> DataSpec:
    """Equally spaced modes on a circle, conditions = disjoint adjacent runs."""
    if n_modes % modes_per_condition != 0:
        raise ValueError("modes_per_condition must divide n_modes")
    angles = 2 * np.pi * np.arange(n_modes) / n_modes
    centers = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    groups = tuple(
        tuple(range(i, i + modes_per_condition))
        for i in range(0, n_modes, modes_per_condition)
    )
    return DataSpec(
        kind="gaussian-mixture",
        state_dim=2,
        centers=centers,
        sigmas=np.full(n_modes, sigma),
        condition_modes=groups,
    )


def two_moons(noise: float = 0.15, arc_modes: int = 12, scale: float = 3.0) -> DataSpec:
    """Two interleaved crescents, one condition per moon."""
    theta = np.linspace(0.0, np.pi, arc_modes)
    upper = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    lower = np.stack([1.0 - np.cos(theta), 0.5 - np.sin(theta)], axis=1)
    centers = scale * np.concatenate([upper, lower], axis=0)
    return DataSpec(
        kind="two-moons",
        state_dim=2,
        centers=centers,
        sigmas=np.full(2 * arc_modes, scale * noise),
        condition_modes=(tuple(range(arc_modes)), tuple(range(arc_modes, 2 * arc_modes))),
    )


def default_data() -> DataSpec:
    return ring_mixture()


def sample_data(spec: DataSpec, c, n: int, stream: RandomStream) -> np.ndarray:
    """n samples from condition c, shape (n, state_dim)."""
    modes = np.asarray(spec.condition_modes[int(c)])
    picks = modes[stream.integers(0, len(modes), (n,))]
    noise = stream.normal((n, spec.state_dim))
    return spec.centers[picks] + spec.sigmas[picks, None] * noise


def mixture_logpdf(spec: DataSpec, x, c) -> np.ndarray:
    """Exact conditional mixture log-density, shape (n,)."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    modes = np.asarray(spec.condition_modes[int(c)])
    mu = spec.centers[modes]  # (m, d)
    sig = spec.sigmas[modes]  # (m,)
    d = spec.state_dim
    sq = np.sum((x[:, None, :] - mu[None, :, :]) ** 2, axis=2)  # (n, m)
    comp = -0.5 * sq / sig[None, :] ** 2 - d * np.log(sig)[None, :]
    comp = comp - 0.5 * d * np.log(2 * np.pi) - np.log(len(modes))
    peak = np.max(comp, axis=1, keepdims=True)
    return (peak + np.log(np.sum(np.exp(comp - peak), axis=1, keepdims=True)))[:, 0]


def nearest_mode(spec: DataSpec, x, c) -> np.ndarray:
    """Index (into the global mode list) of the closest component of c."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    modes = np.asarray(spec.condition_modes[int(c)])
    mu = spec.centers[modes]
    dist = np.sum((x[:, None, :] - mu[None, :, :]) ** 2, axis=2)
    return modes[np.argmin(dist, axis=1)]
