#!/usr/bin/env python3
"""Trade-data-style preprocessing on synthetic multilayer networks.

Builds a stack of product-trading-like layers: a well-connected core of
nations with a planted 3-community structure plus many weakly connected
peripheral nations, and a few shattered noise layers. The pipeline drops
low-degree nodes, filters uninformative layers, and settles a consensus
community count, all through the library API (the `depnet ingest` command
wraps the same steps for files).
"""

import numpy as np

from depnet import (CorrelationStructure, MultiNetwork, SimConfig, consensus_k,
                    sample_networks)

rng = np.random.default_rng(0)
N_CORE, N_TOTAL, N_LAYERS = 36, 60, 12
logit = lambda p: float(np.log(p / (1 - p)))

# core layers: planted 3-block structure among the first 36 nodes;
# each peripheral nation trades with the same couple of partners throughout
beta = np.full((3, 3), logit(0.06))
np.fill_diagonal(beta, logit(0.8))
partners = {p: rng.choice(N_CORE, rng.integers(1, 3), replace=False)
            for p in range(N_CORE, N_TOTAL)}
layers = []
for seed in range(N_LAYERS - 2):
    cfg = SimConfig(n_nodes=N_CORE, community_sizes=(12, 12, 12), n_samples=1,
                    beta=beta, seed=seed)
    core, _ = sample_networks(cfg)
    full = np.zeros((N_TOTAL, N_TOTAL))
    full[:N_CORE, :N_CORE] = core.adjacency[0]
    for p, js in partners.items():
        for j in js:
            if rng.uniform() < 0.6:
                full[p, j] = full[j, p] = 1.0
    layers.append(full)
for _ in range(2):  # shattered noise layers
    a = np.triu(rng.uniform(size=(N_TOTAL, N_TOTAL)) < 0.02, 1).astype(float)
    layers.append(a + a.T)

stack = MultiNetwork(adjacency=np.stack(layers))
print(f"stack: {stack.n_samples} layers on {stack.n_nodes} nodes")

# step 1: drop nations with few distinct partners across all layers
union = stack.adjacency.max(axis=0)
degree = union.sum(axis=1)
kept_nodes = np.where(degree > 9)[0]
print(f"degree filter (> 9 partners): kept {kept_nodes.size} nodes; "
      f"core nodes kept: {(kept_nodes < N_CORE).sum()}/{N_CORE}")

filtered = MultiNetwork(
    adjacency=stack.adjacency[np.ix_(range(stack.n_samples), kept_nodes, kept_nodes)])

# step 2: per-layer community counts, filtered and averaged
k_hat, kept_layers = consensus_k(filtered, max_k_per_layer=10,
                                 min_largest_community=8)
print(f"consensus: kept {len(kept_layers)}/{stack.n_samples} layers, "
      f"community count = {k_hat}")
print("dropped layers:", sorted(set(range(stack.n_samples)) - set(kept_layers)))
