"""Dataset construction, sampling, and exact mixture densities."""

import numpy as np
import pytest

from driftlab import data
from driftlab.rng import RandomStream


def test_ring_layout():
    spec = data.ring_mixture()
    assert spec.n_modes == 8
    assert spec.n_conditions == 4
    np.testing.assert_allclose(np.linalg.norm(spec.centers, axis=1), 4.0)
    assert spec.condition_modes == ((0, 1), (2, 3), (4, 5), (6, 7))
    flat = [m for g in spec.condition_modes for m in g]
    assert sorted(flat) == list(range(8))  # disjoint cover


def test_samples_stay_within_condition():
    spec = data.ring_mixture()
    stream = RandomStream(7)
    for c in range(spec.n_conditions):
        x = data.sample_data(spec, c, 500, stream)
        assert x.shape == (500, 2)
        own = spec.centers[list(spec.condition_modes[c])]
        d_own = np.min(np.linalg.norm(x[:, None, :] - own[None], axis=2), axis=1)
        # 0.3-sigma modes: essentially everything lands within 5 sigma
        assert np.max(d_own) < 5 * 0.3


def test_mixture_logpdf_matches_direct_sum():
    spec = data.ring_mixture()
    stream = RandomStream(8)
    for c in range(4):
        # stay near the condition's modes so the direct sum cannot underflow
        x = data.sample_data(spec, c, 40, stream) + 0.3 * stream.normal((40, 2))
        got = data.mixture_logpdf(spec, x, c)
        modes = list(spec.condition_modes[c])
        dens = np.zeros(40)
        for m in modes:
            diff = x - spec.centers[m]
            s2 = spec.sigmas[m] ** 2
            dens += np.exp(-0.5 * np.sum(diff**2, axis=1) / s2) / (2 * np.pi * s2)
        np.testing.assert_allclose(got, np.log(dens / len(modes)), rtol=1e-10)


def test_mixture_density_integrates_to_one():
    spec = data.ring_mixture()
    grid = np.linspace(-7, 7, 281)
    xs, ys = np.meshgrid(grid, grid)
    pts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    cell = (grid[1] - grid[0]) ** 2
    total = np.sum(np.exp(data.mixture_logpdf(spec, pts, 0))) * cell
    assert abs(total - 1.0) < 0.01


def test_two_moons_conditions_separate():
    spec = data.two_moons()
    assert spec.kind == "two-moons"
    assert spec.n_conditions == 2
    stream = RandomStream(9)
    a = data.sample_data(spec, 0, 400, stream)
    b = data.sample_data(spec, 1, 400, stream)
    # each sample should be closer to its own moon's centers
    own_a = spec.centers[list(spec.condition_modes[0])]
    own_b = spec.centers[list(spec.condition_modes[1])]

    def min_dist(x, mu):
        return np.min(np.linalg.norm(x[:, None, :] - mu[None], axis=2), axis=1)

    assert np.mean(min_dist(a, own_a) < min_dist(a, own_b)) > 0.95
    assert np.mean(min_dist(b, own_b) < min_dist(b, own_a)) > 0.95


def test_nearest_mode():
    spec = data.ring_mixture()
    x = spec.centers[[2, 3]] + 0.01
    np.testing.assert_array_equal(data.nearest_mode(spec, x, 1), [2, 3])


def test_validation_errors():
    good = data.ring_mixture()
    with pytest.raises(ValueError, match="positive definite"):
        data.DataSpec("gaussian-mixture", 2, good.centers, np.zeros(8), good.condition_modes)
    with pytest.raises(ValueError, match="out of range"):
        data.DataSpec("gaussian-mixture", 2, good.centers, good.sigmas, ((0, 99),))
    with pytest.raises(ValueError, match="kind"):
        data.DataSpec("spiral", 2, good.centers, good.sigmas, good.condition_modes)
    with pytest.raises(ValueError, match="at least one"):
        data.DataSpec("gaussian-mixture", 2, good.centers, good.sigmas, ((0, 1), ()))
