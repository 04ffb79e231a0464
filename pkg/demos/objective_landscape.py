#!/usr/bin/env python3
"""How the two objective parts see the community structure.

Networks here have identical within- and between-community connection rates
(both 0.5), so block means carry no information at all. The concordance term
still identifies the planted communities: within-community edges co-vary, and
the sum of products of standardized edges peaks when the grouping is right.

We sweep the number of deliberately misassigned nodes and print both objective
parts at each point.
"""

import numpy as np

from depnet import (BlockParams, CorrelationStructure, HardMembership,
                    SimConfig, approx_log_lik, sample_networks)

cfg = SimConfig(
    n_nodes=30,
    community_sizes=(15, 15),
    n_samples=20,
    beta=np.zeros((2, 2)),          # every edge has probability 0.5
    correlation=CorrelationStructure(kind="exchangeable", rho=0.6),
    seed=7,
)
net, truth = sample_networks(cfg)
params = BlockParams(beta=np.zeros((2, 2)), rho=np.array([0.6, 0.6]))

print("edge density:", round(float(net.adjacency.mean()), 3), "(flat by design)")
print()
print("misassigned   marginal part   concordance part   total")

rng = np.random.default_rng(0)
for flips in range(0, 13, 2):
    labels = truth.labels.copy()
    idx = rng.choice(cfg.n_nodes, flips, replace=False)
    labels[idx] = 1 - labels[idx]
    alpha = HardMembership(labels, 2).to_probs()
    parts = approx_log_lik(net, alpha, params, order="2nd")
    print(f"{flips:>10}    {parts.marginal:>12.4f}   {parts.correlation:>15.4f}"
          f"   {parts.total:>9.4f}")

print()
print("The marginal column is constant: with equal block means it cannot")
print("rank labelings. The concordance column drops as labels degrade and")
print("is maximized at the planted partition.")
