"""Spectral clustering initialization and consensus community-count estimation.

Everything here is deterministic given its seed: k-means uses farthest-point
seeding with ties broken toward the lowest node index, and the per-layer
community-count estimate uses agglomerative greedy modularity merging, which
has no randomness at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net_model import HardMembership, MembershipProbs, MultiNetwork


class ConsensusError(RuntimeError):
    """Every layer was filtered out; no consensus estimate exists."""


@dataclass(frozen=True)
class InitSpec:
    """Where an initialization comes from: a single sample network index, or
    "mean" for the across-sample average adjacency."""

    source: int | str = "mean"
    smoothing: float = 0.1


def initialization_from_spec(net: MultiNetwork, spec: InitSpec, k,
                             seed=0) -> MembershipProbs:
    """Spectral-cluster the named source network and soften the labels."""
    if spec.source == "mean":
        adjacency = net.adjacency.mean(axis=0)
    else:
        m = int(spec.source)
        if not 0 <= m < net.n_samples:
            raise ValueError(f"sample index {m} out of range")
        adjacency = net.adjacency[m]
    labels = spectral_cluster(adjacency, k, seed=seed)
    return init_alpha(labels, k, spec.smoothing)


def _kmeans(points, k, seed, restarts=10, max_iter=100):
    """Seeded Lloyd's k-means with farthest-point initialization.

    Deterministic: ties in seeding and assignment resolve to the lowest
    index; the best restart is the first one attaining the lowest inertia.
    """
    n = points.shape[0]
    best_labels, best_inertia = None, np.inf
    children = np.random.SeedSequence(seed).spawn(restarts)
    for child in children:
        rng = np.random.default_rng(child)
        centers = np.empty((k, points.shape[1]))
        centers[0] = points[rng.integers(n)]
        d2 = ((points - centers[0]) ** 2).sum(axis=1)
        for c in range(1, k):
            centers[c] = points[np.argmax(d2)]
            d2 = np.minimum(d2, ((points - centers[c]) ** 2).sum(axis=1))
        labels = np.zeros(n, dtype=int)
        for _ in range(max_iter):
            dist = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            new_labels = np.argmin(dist, axis=1)
            for c in range(k):
                sel = new_labels == c
                if sel.any():
                    centers[c] = points[sel].mean(axis=0)
                else:
                    # revive an empty cluster at the worst-fit point
                    far = np.argmax(dist[np.arange(n), new_labels])
                    centers[c] = points[far]
                    new_labels[far] = c
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
        inertia = ((points - centers[labels]) ** 2).sum()
        if inertia < best_inertia - 1e-12:
            best_inertia, best_labels = inertia, labels
    return best_labels


def spectral_cluster(adjacency, k, seed=0) -> HardMembership:
    """Cluster rows of the top-k eigenvectors of D^{-1/2} A D^{-1/2}.

    Isolated nodes get a substitute degree of 1 so the scaling stays finite.
    """
    a = np.asarray(adjacency, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("adjacency must be square")
    if np.abs(a - a.T).max(initial=0.0) > 1e-12:
        raise ValueError("adjacency must be symmetric")
    n = a.shape[0]
    if not 1 <= k <= n:
        raise ValueError("k must lie in 1..N")
    deg = a.sum(axis=1)
    deg[deg == 0] = 1.0
    scale = 1.0 / np.sqrt(deg)
    norm = scale[:, None] * a * scale[None, :]
    _, vecs = np.linalg.eigh(norm)
    embedding = vecs[:, -k:]
    labels = _kmeans(embedding, k, seed)
    return HardMembership(labels, k)


def init_alpha(labels: HardMembership, k, smoothing=0.1) -> MembershipProbs:
    """Soften hard labels: the assigned community gets 1 - (k-1) * smoothing,
    every other community gets smoothing."""
    if labels.k > k:
        raise ValueError("labels use more communities than k")
    if not 0.0 < smoothing < 1.0 / max(k, 2):
        raise ValueError("smoothing must lie in (0, 1/k)")
    a = np.full((labels.n_nodes, k), smoothing)
    a[np.arange(labels.n_nodes), labels.labels] = 1.0 - (k - 1) * smoothing
    return MembershipProbs(a)


def greedy_modularity_labels(adjacency) -> np.ndarray:
    """Agglomerative modularity maximization: start from singletons, merge
    the community pair with the largest positive modularity gain until no
    merge improves modularity. Tie-breaking is row-major, hence deterministic.
    """
    a = np.asarray(adjacency, dtype=float)
    n = a.shape[0]
    two_m = a.sum()
    if two_m == 0:
        return np.arange(n)
    e = a / two_m                      # pairwise edge fractions
    deg = e.sum(axis=1)                # community degree fractions
    members = [[i] for i in range(n)]
    live = np.ones(n, dtype=bool)
    gain = 2.0 * (e - np.outer(deg, deg))
    np.fill_diagonal(gain, -np.inf)
    gain[:, ~live] = -np.inf
    while live.sum() > 1:
        idx = np.argmax(gain)
        c, d = divmod(idx, n)
        if gain[c, d] <= 1e-12:
            break
        # merge d into c
        e[c, :] += e[d, :]
        e[:, c] += e[:, d]
        deg[c] += deg[d]
        members[c].extend(members[d])
        live[d] = False
        e[d, :] = 0.0
        e[:, d] = 0.0
        gain[d, :] = -np.inf
        gain[:, d] = -np.inf
        cols = np.where(live)[0]
        gain[c, cols] = 2.0 * (e[c, cols] - deg[c] * deg[cols])
        gain[cols, c] = gain[c, cols]
        gain[c, c] = -np.inf
    labels = np.empty(n, dtype=int)
    next_label = 0
    for c in np.where(live)[0]:
        labels[members[c]] = next_label
        next_label += 1
    return labels


def consensus_k(net: MultiNetwork, k_max=10, max_k_per_layer=10,
                min_largest_community=14):
    """Per-layer community counts by greedy modularity, filtered and averaged.

    A layer is kept when its count is at most ``max_k_per_layer`` and its
    largest community has at least ``min_largest_community`` nodes. Returns
    (rounded mean count over kept layers, kept layer indices).
    """
    if net.n_samples < 1:
        raise ValueError("need at least one layer")
    kept, counts = [], []
    for m in range(net.n_samples):
        labels = greedy_modularity_labels(net.adjacency[m])
        k_m = int(labels.max()) + 1
        largest = int(np.bincount(labels).max())
        if k_m <= max_k_per_layer and largest >= min_largest_community:
            kept.append(m)
            counts.append(k_m)
    if not kept:
        raise ConsensusError("all layers filtered out by the consensus criteria")
    k_hat = int(np.floor(np.mean(counts) + 0.5))
    return max(1, min(k_hat, k_max)), kept
