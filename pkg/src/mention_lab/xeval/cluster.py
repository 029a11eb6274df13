"""Average-linkage agglomerative clustering with name-based tie breaking."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Merge:
    left: int  # cluster ids: 0..n-1 are leaves, n.. are merges in order
    right: int
    height: float
    size: int


def average_linkage(dist: np.ndarray, labels) -> tuple[list[int], list[Merge]]:
    """Cluster points given a symmetric distance matrix (diagonal ignored).

    At each step the closest pair of clusters merges; equal distances are resolved
    by the smallest label in each cluster, so the result depends only on labels and
    distances, not on input order. Returns the leaf order and the merge list.
    """
    dist = np.asarray(dist, dtype=float)
    dist = (dist + dist.T) / 2.0
    labels = [str(x) for x in labels]
    n = len(labels)
    if n == 0:
        return [], []
    size = {i: 1 for i in range(n)}
    leaves: dict[int, list[int]] = {i: [i] for i in range(n)}
    first: dict[int, str] = {i: labels[i] for i in range(n)}
    d: dict[frozenset, float] = {frozenset((i, j)): float(dist[i, j])
                                 for i in range(n) for j in range(i + 1, n)}
    merges: list[Merge] = []
    next_id = n
    while len(size) > 1:
        best = None
        ids = sorted(size, key=lambda c: first[c])
        for a_pos, a in enumerate(ids):
            for b in ids[a_pos + 1:]:
                key = (d[frozenset((a, b))], first[a], first[b])
                if best is None or key < best[0]:
                    best = (key, a, b)
        (height, _, _), a, b = best
        na, nb = size.pop(a), size.pop(b)
        for k in size:
            # Lance-Williams update for average linkage
            d[frozenset((k, next_id))] = (na * d.pop(frozenset((k, a))) + nb * d.pop(frozenset((k, b)))) / (na + nb)
        del d[frozenset((a, b))]
        size[next_id] = na + nb
        leaves[next_id] = leaves.pop(a) + leaves.pop(b)
        first[next_id] = first[a]
        merges.append(Merge(a, b, height, na + nb))
        next_id += 1
    (root,) = size
    return leaves[root], merges


def impute_absent(values: np.ndarray) -> np.ndarray:
    """Replace non-finite off-diagonal cells by their column's mean over finite off-diagonal cells."""
    v = np.array(values, dtype=float)
    n = v.shape[0]
    off = ~np.eye(n, dtype=bool) if v.shape[0] == v.shape[1] else np.ones_like(v, dtype=bool)
    for j in range(v.shape[1]):
        col = v[:, j]
        ok = np.isfinite(col) & off[:, j]
        fill = float(col[ok].mean()) if ok.any() else float(np.nanmean(v[np.isfinite(v)])) if np.isfinite(v).any() else 0.0
        bad = ~np.isfinite(col)
        col[bad] = fill
    return v
