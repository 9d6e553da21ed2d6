"""Site features, K-means clustering and the evaluation metrics.

Site ``n`` is described by its activations across all regimes,
``(c_n1^(1), ..., c_nR^(1), ..., c_n1^(E), ..., c_nR^(E))``; the unit
integral constraints on the other factors make those activations comparable
across sites, so the features are used raw (no standardization).  Distances
are Euclidean throughout.
"""

from __future__ import annotations

from math import comb

import numpy as np
from scipy.spatial.distance import cdist


def site_features(C: np.ndarray, regime_count: int, n_sites: int) -> np.ndarray:
    """Reshape the (E*N, R) activation matrix to per-site rows (N, E*R).

    Row ``n`` concatenates the activation rows ``n, N+n, ..., (E-1)N+n``.
    """
    C = np.asarray(C, float)
    if C.ndim != 2 or C.shape[0] != regime_count * n_sites:
        raise ValueError(f"expected {regime_count * n_sites} activation rows, got shape {C.shape}")
    R = C.shape[1]
    return C.reshape(regime_count, n_sites, R).transpose(1, 0, 2).reshape(n_sites, regime_count * R)


def _plus_plus_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: subsequent centers drawn with probability
    proportional to the squared distance to the nearest chosen center."""
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = cdist(points, centers[:1], "sqeuclidean")[:, 0]
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[j] = points[idx]
        d2 = np.minimum(d2, cdist(points, centers[j:j + 1], "sqeuclidean")[:, 0])
    return centers


def lloyd(points: np.ndarray, centers: np.ndarray, max_iter: int = 300
          ) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Lloyd iterations from given centers.

    Returns final labels, centers and the inertia after every assignment
    step (a nonincreasing sequence).  An emptied cluster is re-seeded from
    the point farthest from its assigned center.
    """
    points = np.asarray(points, float)
    centers = np.array(centers, float)
    k = centers.shape[0]
    labels = np.full(points.shape[0], -1)
    inertia_trace: list[float] = []
    for _ in range(max_iter):
        d2 = cdist(points, centers, "sqeuclidean")
        new_labels = d2.argmin(axis=1)
        point_d2 = d2[np.arange(points.shape[0]), new_labels]
        for j in range(k):
            if not np.any(new_labels == j):
                far = int(point_d2.argmax())
                new_labels[far] = j
                point_d2[far] = 0.0
        inertia_trace.append(float(point_d2.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = points[labels == j]
            if members.size:
                centers[j] = members.mean(axis=0)
    return labels, centers, inertia_trace


def kmeans(points: np.ndarray, k: int, seed: int = 0, restarts: int = 10
           ) -> tuple[np.ndarray, float]:
    """Best-of-``restarts`` K-means with k-means++ seeding.

    Deterministic for a given seed: restart ``i`` uses the generator seeded
    with ``(seed, i)``.  Returns the labels and inertia of the best run.
    """
    points = np.asarray(points, float)
    if points.ndim != 2:
        raise ValueError("points must be a 2-d array")
    if k < 1 or k > points.shape[0]:
        raise ValueError(f"need 1 <= k <= {points.shape[0]}, got {k}")
    best_labels, best_inertia = None, np.inf
    for i in range(restarts):
        rng = np.random.default_rng((seed, i))
        centers = _plus_plus_init(points, k, rng)
        labels, _, trace = lloyd(points, centers)
        if trace[-1] < best_inertia:
            best_labels, best_inertia = labels, trace[-1]
    return best_labels, float(best_inertia)


def silhouette(points: np.ndarray, labels: np.ndarray) -> float:
    """Mean silhouette score with Euclidean distance.

    Per point: ``(b - a) / max(a, b)`` where ``a`` is the mean distance to
    its own cluster (excluding itself) and ``b`` the smallest mean distance
    to another cluster.  Singletons score 0, as does the 0/0 case of
    coincident points.
    """
    points = np.asarray(points, float)
    labels = np.asarray(labels)
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise ValueError("silhouette needs at least two clusters")
    dist = cdist(points, points)
    scores = np.zeros(points.shape[0])
    for i in range(points.shape[0]):
        own = labels == labels[i]
        if own.sum() <= 1:
            continue
        a = dist[i, own].sum() / (own.sum() - 1)
        b = min(dist[i, labels == lab].mean() for lab in uniq if lab != labels[i])
        denom = max(a, b)
        scores[i] = (b - a) / denom if denom > 0 else 0.0
    return float(scores.mean())


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected pair-counting agreement between two labelings.

    Exact: all pair counts are accumulated in integer arithmetic and a
    single float division happens at the end.  Returns 1.0 when both
    partitions are identical and the correction denominator vanishes.
    """
    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)
    if labels_a.shape != labels_b.shape or labels_a.ndim != 1:
        raise ValueError("labelings must be 1-d and of equal length")
    n = labels_a.size
    _, ia = np.unique(labels_a, return_inverse=True)
    _, ib = np.unique(labels_b, return_inverse=True)
    contingency = np.zeros((ia.max() + 1, ib.max() + 1), dtype=int)
    np.add.at(contingency, (ia, ib), 1)

    sum_ij = int(sum(comb(int(x), 2) for x in contingency.ravel()))
    sum_a = int(sum(comb(int(x), 2) for x in contingency.sum(axis=1)))
    sum_b = int(sum(comb(int(x), 2) for x in contingency.sum(axis=0)))
    total = comb(n, 2)
    # ARI = (sum_ij - sum_a sum_b / total) / ((sum_a + sum_b)/2 - sum_a sum_b / total)
    numerator = 2 * (total * sum_ij - sum_a * sum_b)
    denominator = total * (sum_a + sum_b) - 2 * sum_a * sum_b
    if denominator == 0:
        return 1.0
    return numerator / denominator


def select_k_by_silhouette(points: np.ndarray, k_min: int = 2, k_max: int = 9,
                           seed: int = 0, restarts: int = 10,
                           return_scores: bool = False):
    """Pick the cluster count maximizing the silhouette over ``k_min..k_max``.

    Ties go to the smallest k.  With ``return_scores`` the per-k silhouette
    dict is returned alongside.
    """
    points = np.asarray(points, float)
    if not (2 <= k_min <= k_max):
        raise ValueError("need 2 <= k_min <= k_max")
    if k_max > points.shape[0]:
        raise ValueError(f"k_max {k_max} exceeds the number of points {points.shape[0]}")
    scores: dict[int, float] = {}
    for k in range(k_min, k_max + 1):
        labels, _ = kmeans(points, k, seed=seed, restarts=restarts)
        scores[k] = silhouette(points, labels)
    best = max(scores, key=lambda k: (scores[k], -k))
    if return_scores:
        return best, scores
    return best
