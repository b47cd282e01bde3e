"""
Tests for loss surfaces, smoothness, latent PCA and cluster tightness.
"""

import numpy as np
import pytest
import torch

from app.core.exceptions import ConfigurationError, MetricError, ShapeError
from app.services.analysis import (
    cluster_tightness,
    collect_latents,
    latent_pca,
    loss_surface,
    mean_smoothness,
    smoothness_score,
    surface_directions,
)

RADIUS = 8 / 255


# =============================================================================
# Loss surface
# =============================================================================

def test_surface_grid_shape_center_and_max(tiny_model, batch):
    surface = loss_surface(tiny_model, batch.head(1), RADIUS, half_res=2, seed=0)

    assert surface.grid.shape == (5, 5)
    assert surface.grid[2, 2] == 0.0
    assert surface.raw_max > 0.0
    assert float(surface.grid.max()) == 1.0
    assert surface.sidecar()["anchor_id"] == batch.ids[0]


def test_surface_is_symmetric_under_direction_negation(tiny_model, batch):
    anchor = batch.head(1)
    d1, d2 = surface_directions(anchor.shape, seed=7)

    forward = loss_surface(tiny_model, anchor, RADIUS, 2, seed=7, directions=(d1, d2))
    negated = loss_surface(tiny_model, anchor, RADIUS, 2, seed=7, directions=(-d1, -d2))

    assert np.array_equal(negated.grid, np.rot90(forward.grid, 2))


def test_surface_is_deterministic(tiny_model, batch):
    first = loss_surface(tiny_model, batch.head(1), RADIUS, 2, seed=1)
    second = loss_surface(tiny_model, batch.head(1), RADIUS, 2, seed=1)

    assert np.array_equal(first.grid, second.grid)


def test_surface_directions_are_orthonormal():
    d1, d2 = surface_directions((1, 3, 32, 32), seed=0)

    assert float(torch.linalg.vector_norm(d1)) == pytest.approx(1.0, abs=1e-12)
    assert float(torch.linalg.vector_norm(d2)) == pytest.approx(1.0, abs=1e-12)
    assert abs(float((d1 * d2).sum())) < 1e-6


def test_surface_argument_checks(tiny_model, batch):
    with pytest.raises(ShapeError):
        loss_surface(tiny_model, batch.head(2), RADIUS, 2, seed=0)
    with pytest.raises(ConfigurationError):
        loss_surface(tiny_model, batch.head(1), RADIUS, 1, seed=0)
    with pytest.raises(ConfigurationError):
        loss_surface(tiny_model, batch.head(1), 0.0, 2, seed=0)


def test_mean_smoothness_over_anchors(tiny_model, batch):
    score, grids = mean_smoothness(tiny_model, batch.head(2), RADIUS, 2, seed=0)

    assert len(grids) == 2
    assert score == pytest.approx((smoothness_score(grids[0]) + smoothness_score(grids[1])) / 2)


# =============================================================================
# Smoothness
# =============================================================================

def test_smoothness_of_constant_grid_is_zero():
    assert smoothness_score(np.full((21, 21), 0.3)) == 0.0


def test_smoothness_of_linear_ramp():
    ramp = np.tile(np.linspace(0.0, 1.0, 21)[:, None], (1, 21))

    assert smoothness_score(ramp) == pytest.approx(0.05, abs=1e-12)


def test_rougher_grid_scores_higher():
    rng = np.random.default_rng(0)
    smooth = np.tile(np.linspace(0.0, 1.0, 21)[:, None], (1, 21))

    assert smoothness_score(rng.uniform(size=(21, 21))) > smoothness_score(smooth)


# =============================================================================
# PCA
# =============================================================================

def test_pca_of_rank_one_data():
    direction = np.array([1.0, 2.0, -1.0, 0.5])
    latents = np.outer(np.arange(6, dtype=np.float64), direction)

    result = latent_pca(latents, 1)

    assert result.explained_variance_ratios[0] == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(MetricError):
        latent_pca(latents, 2)


def test_pca_matches_covariance_eigendecomposition():
    latents = np.random.default_rng(1).normal(size=(40, 6)) * np.array([3.0, 2.0, 1.5, 1.0, 0.5, 0.2])

    result = latent_pca(latents, 3)

    eigenvalues = np.sort(np.linalg.eigvalsh(np.cov(latents, rowvar=False)))[::-1]
    np.testing.assert_allclose(result.explained_variance_ratios, eigenvalues[:3] / eigenvalues.sum(), atol=1e-6)
    np.testing.assert_allclose(result.components @ result.components.T, np.eye(3), atol=1e-6)
    assert all(np.diff(result.explained_variance_ratios) <= 0)
    assert result.projections.shape == (40, 3)


def test_pca_rejects_too_many_components():
    with pytest.raises(MetricError):
        latent_pca(np.random.default_rng(2).normal(size=(3, 5)), 4)
    with pytest.raises(MetricError):
        latent_pca(np.zeros((3, 5)), 0)


def test_collect_latents_flattens_means(tiny_model, batch):
    latents = collect_latents(tiny_model, batch, batch_size=3)

    assert latents.shape == (4, 64)
    assert latents.dtype == np.float64


def test_pca_carries_sample_ids(tiny_model, batch):
    result = latent_pca(collect_latents(tiny_model, batch), 2, batch.ids)

    assert result.ids == list(batch.ids)
    assert result.to_dict()["k"] == 2


# =============================================================================
# Cluster tightness
# =============================================================================

def test_tightness_is_deterministic_and_non_negative(tiny_model, batch):
    first = cluster_tightness(tiny_model, batch, RADIUS, seed=3)
    second = cluster_tightness(tiny_model, batch, RADIUS, seed=3)

    assert first.to_dict() == second.to_dict()
    assert first.tightness_ratio > 0.0
    assert first.tightness_ratio == pytest.approx(first.mean_pair_dist / first.baseline_spread)


def test_tightness_vanishes_with_the_noise(tiny_model, batch):
    tiny = cluster_tightness(tiny_model, batch, 1e-7, seed=0)
    large = cluster_tightness(tiny_model, batch, 0.1, seed=0)

    assert tiny.mean_pair_dist < large.mean_pair_dist
    assert tiny.tightness_ratio < 1e-3


def test_tightness_argument_checks(tiny_model, batch):
    with pytest.raises(MetricError):
        cluster_tightness(tiny_model, batch.head(1), RADIUS, seed=0)
    with pytest.raises(ConfigurationError):
        cluster_tightness(tiny_model, batch, 0.0, seed=0)
