"""NearMiss-1 undersampling of the majority class.

Majority points are ranked by the mean Euclidean distance to their k nearest
minority points; the closest ones are kept until the class counts match. All
minority points are always kept.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import KTooLarge, SingleClass

DEFAULT_K = 3


@dataclass(frozen=True)
class SampledIndices:
    kept: tuple[int, ...]
    minority_count: int
    majority_count_before: int
    majority_count_after: int


def near_miss_1(vectors, labels: Sequence[int], k: int = DEFAULT_K) -> SampledIndices:
    """Select row indices kept after NearMiss-1 undersampling.

    Ties on mean distance break toward the smaller original row index, so the
    selection is deterministic regardless of input geometry.
    """
    X = np.asarray(vectors, dtype=np.float64)
    y = np.asarray(labels, dtype=int)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValueError("vectors must be (n, d) with one label per row")
    if k < 1:
        raise ValueError("k must be >= 1")
    classes, counts = np.unique(y, return_counts=True)
    if len(classes) < 2:
        raise SingleClass("both classes must be present for undersampling")

    if counts[0] == counts[1]:
        return SampledIndices(
            kept=tuple(range(len(y))),
            minority_count=int(counts[0]),
            majority_count_before=int(counts[1]),
            majority_count_after=int(counts[1]),
        )

    minority_label = classes[int(np.argmin(counts))]
    minority_idx = np.flatnonzero(y == minority_label)
    majority_idx = np.flatnonzero(y != minority_label)
    n_min, n_maj = len(minority_idx), len(majority_idx)
    if k > n_min:
        raise KTooLarge(k, n_min)

    # mean distance from each majority point to its k nearest minority points
    diff = X[majority_idx][:, None, :] - X[minority_idx][None, :, :]
    dists = np.sqrt(np.sum(diff * diff, axis=2))
    nearest = np.sort(dists, axis=1)[:, :k]
    mean_dist = nearest.mean(axis=1)

    order = sorted(range(n_maj), key=lambda i: (mean_dist[i], majority_idx[i]))
    chosen = [majority_idx[i] for i in order[:n_min]]
    kept = sorted(int(i) for i in (*minority_idx, *chosen))
    return SampledIndices(
        kept=tuple(kept),
        minority_count=n_min,
        majority_count_before=n_maj,
        majority_count_after=len(chosen),
    )
