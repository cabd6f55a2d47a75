import math
import random

import numpy as np
import pytest

from concept_distill.balancing import SampledIndices, near_miss_1
from concept_distill.errors import KTooLarge, SingleClass


def brute_force_near_miss_1(vectors, labels, k):
    """O(n^2 k) reference: plain loops, no numpy in the distance math."""
    n = len(labels)
    counts = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    if len(counts) < 2:
        raise SingleClass("single class")
    (la, ca), (lb, cb) = sorted(counts.items())
    if ca == cb:
        return list(range(n))
    minority = la if ca < cb else lb
    minority_idx = [i for i in range(n) if labels[i] == minority]
    majority_idx = [i for i in range(n) if labels[i] != minority]
    if k > len(minority_idx):
        raise KTooLarge(k, len(minority_idx))
    scored = []
    for i in majority_idx:
        dists = []
        for j in minority_idx:
            d = math.sqrt(sum((vectors[i][c] - vectors[j][c]) ** 2
                              for c in range(len(vectors[i]))))
            dists.append(d)
        dists.sort()
        scored.append((sum(dists[:k]) / k, i))
    scored.sort()
    kept = minority_idx + [i for _, i in scored[: len(minority_idx)]]
    return sorted(kept)


def test_balanced_input_keeps_everything():
    X = [[0.0], [1.0], [2.0], [3.0]]
    y = [0, 1, 0, 1]
    result = near_miss_1(X, y, k=1)
    assert result.kept == (0, 1, 2, 3)
    assert result.majority_count_after == result.minority_count == 2


def test_one_dimensional_hand_case():
    X = [[0.0], [1.0], [5.0], [2.0]]
    y = [1, 0, 0, 0]
    result = near_miss_1(X, y, k=1)
    assert result.kept == (0, 1)
    assert result.minority_count == 1
    assert result.majority_count_before == 3
    assert result.majority_count_after == 1


def test_k_too_large():
    X = [[0.0], [1.0], [2.0], [3.0], [4.0]]
    y = [1, 1, 0, 0, 0]
    with pytest.raises(KTooLarge) as exc:
        near_miss_1(X, y, k=3)
    assert exc.value.minority_count == 2


def test_single_class():
    with pytest.raises(SingleClass):
        near_miss_1([[0.0], [1.0]], [1, 1], k=1)


def test_invalid_k():
    with pytest.raises(ValueError):
        near_miss_1([[0.0], [1.0]], [0, 1], k=0)


def test_matches_brute_force_on_random_instances():
    rng = random.Random(42)
    for trial in range(200):
        n = rng.randint(4, 50)
        d = rng.randint(1, 6)
        k = rng.choice([1, 3])
        while True:
            y = [rng.randint(0, 1) for _ in range(n)]
            minority = min(sum(y), n - sum(y))
            if minority >= k:
                break
        X = [[rng.uniform(-5, 5) for _ in range(d)] for _ in range(n)]
        expected = brute_force_near_miss_1(X, y, k)
        got = near_miss_1(X, y, k=k)
        assert list(got.kept) == expected, f"trial {trial}"


def test_minority_never_dropped():
    rng = random.Random(17)
    for _ in range(50):
        n = rng.randint(6, 40)
        y = [1] * 3 + [0] * (n - 3)
        rng.shuffle(y)
        X = [[rng.gauss(0, 1)] for _ in range(n)]
        kept = set(near_miss_1(X, y, k=3).kept)
        assert {i for i in range(n) if y[i] == 1} <= kept


def test_permutation_consistency():
    rng = random.Random(23)
    n = 20
    y = [1] * 5 + [0] * 15
    X = [[rng.uniform(0, 10), rng.uniform(0, 10)] for _ in range(n)]
    base = near_miss_1(X, y, k=3)
    base_points = {tuple(X[i]) for i in base.kept}

    perm = list(range(n))
    rng.shuffle(perm)
    Xp = [X[i] for i in perm]
    yp = [y[i] for i in perm]
    permuted = near_miss_1(Xp, yp, k=3)
    assert {tuple(Xp[i]) for i in permuted.kept} == base_points


def test_result_counts_consistent():
    rng = random.Random(31)
    X = [[rng.gauss(0, 1), rng.gauss(0, 1)] for _ in range(30)]
    y = [1] * 9 + [0] * 21
    result = near_miss_1(X, y, k=3)
    assert isinstance(result, SampledIndices)
    assert result.majority_count_after == result.minority_count == 9
    assert list(result.kept) == sorted(result.kept)
    labels_kept = [y[i] for i in result.kept]
    assert labels_kept.count(0) == labels_kept.count(1) == 9
