"""Fixed grouping policies used as comparison arms."""

from collections import defaultdict
from typing import Dict, List, Sequence

import numpy as np

from ..weightgen.types import LayerSpec


def random_grouping(layers: Sequence[LayerSpec], k: int, seed: int) -> List[List[LayerSpec]]:
    """Permute layers with a seeded generator and cut into k contiguous runs."""
    if not 1 <= k <= len(layers):
        raise ValueError(f"k must be in [1, {len(layers)}], got {k}")
    rng = np.random.default_rng(seed)
    order = [layers[i] for i in rng.permutation(len(layers))]
    bounds = np.linspace(0, len(layers), k + 1).astype(int)
    return [order[bounds[i] : bounds[i + 1]] for i in range(k)]


def depth_bin_grouping(layers: Sequence[LayerSpec], bins: int) -> List[List[LayerSpec]]:
    """Bin layers by relative depth within their member, pooled across members."""
    if bins < 1:
        raise ValueError(f"bins must be positive, got {bins}")
    by_member: Dict[int, List[LayerSpec]] = defaultdict(list)
    for layer in sorted(layers, key=lambda l: l.layer_id):
        by_member[layer.member_id].append(layer)
    grouped: Dict[int, List[LayerSpec]] = defaultdict(list)
    for member_layers in by_member.values():
        depth = len(member_layers)
        for idx, layer in enumerate(member_layers):
            rel = idx / depth
            grouped[min(int(rel * bins), bins - 1)].append(layer)
    return [grouped[b] for b in sorted(grouped)]


def kmeans(points: np.ndarray, k: int, seed: int, iters: int = 100) -> np.ndarray:
    """Plain Lloyd iterations with seeded init; returns a label per row.

    Deterministic for a fixed seed. An emptied cluster is reseeded to the
    point farthest from its assigned center.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")
    rng = np.random.default_rng(seed)
    centers = points[rng.choice(n, size=k, replace=False)].copy()
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(iters):
        d2 = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)
        for c in range(k):
            mask = new_labels == c
            if mask.any():
                centers[c] = points[mask].mean(axis=0)
            else:
                far = int(d2[np.arange(n), new_labels].argmax())
                centers[c] = points[far]
                new_labels[far] = c
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels
