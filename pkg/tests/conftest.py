"""Shared synthetic fixtures: sphere-cluster features and aligned anchor banks."""

from __future__ import annotations

import numpy as np
import pytest

from ntkclust import AnchorBank


def unit_rows(mat: np.ndarray) -> np.ndarray:
    return mat / np.linalg.norm(mat, axis=1, keepdims=True)


def sphere_clusters(
    n_clusters: int = 3,
    per_cluster: int = 60,
    dim: int = 16,
    noise: float = 0.25,
    seed: int = 0,
    center_pairs_angle: float | None = None,
):
    """Unit-norm points around K random centers, plus ground-truth labels.

    With ``center_pairs_angle`` set, the first two centers are placed at
    that angle (radians) so their clusters overlap visually while the rest
    stay well separated.
    """
    rng = np.random.default_rng(seed)
    centers = unit_rows(rng.normal(size=(n_clusters, dim)))
    if center_pairs_angle is not None and n_clusters >= 2:
        base = centers[0]
        ortho = rng.normal(size=dim)
        ortho -= (ortho @ base) * base
        ortho /= np.linalg.norm(ortho)
        centers[1] = np.cos(center_pairs_angle) * base + np.sin(center_pairs_angle) * ortho
    feats = []
    labels = []
    for c in range(n_clusters):
        pts = centers[c] + noise * rng.normal(size=(per_cluster, dim))
        feats.append(unit_rows(pts))
        labels.extend([c] * per_cluster)
    return np.vstack(feats), np.asarray(labels, dtype=np.int64), centers


def anchor_bank_for(
    centers: np.ndarray,
    anchors_per_cluster: int = 4,
    n_prompts: int = 3,
    anchor_noise: float = 0.1,
    prompt_noise: float = 0.03,
    seed: int = 1,
) -> AnchorBank:
    """Anchor groups aligned with the cluster centers, perturbed per prompt."""
    rng = np.random.default_rng(seed)
    dim = centers.shape[1]
    base = []
    for center in centers:
        group = center + anchor_noise * rng.normal(size=(anchors_per_cluster, dim))
        base.append(group)
    base = np.vstack(base)
    banks = [
        unit_rows(base + prompt_noise * rng.normal(size=base.shape))
        for _ in range(n_prompts)
    ]
    return AnchorBank(banks=banks, prompt_labels=[f"prompt {b}" for b in range(n_prompts)])


def random_unit_vectors(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    return unit_rows(rng.normal(size=(n, dim)))


@pytest.fixture
def small_clusters():
    feats, labels, centers = sphere_clusters(
        n_clusters=3, per_cluster=20, dim=16, noise=0.15, seed=7
    )
    return feats, labels, centers
