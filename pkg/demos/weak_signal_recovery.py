#!/usr/bin/env python3
"""Weak marginal signal, strong dependence: where the concordance term earns
its keep.

Within-community coefficients are 1 and 1.5 on covariates drawn from
Uniform(-0.2, 0.2), so every block's mean rate sits at about 0.5 and the
marginal-only fit has nothing to work with. Within-community edges share an
exchangeable correlation of 0.6. Both methods start from the same five
mediocre initializations (about a quarter of the nodes misassigned).
"""

import numpy as np

from depnet import (CorrelationStructure, FitConfig, HardMembership, SimConfig,
                    adjusted_rand_index, fit, fit_vem, sample_networks)
from depnet.spectral import init_alpha

cfg = SimConfig(
    n_nodes=40,
    community_sizes=(20, 20),
    n_samples=40,
    beta=np.array([[1.0, 0.0], [0.0, 1.5]]),
    covariate_within=(-0.2, 0.2),
    covariate_between=(-0.2, 0.2),
    correlation=CorrelationStructure(kind="exchangeable", rho=0.6),
    seed=3,
)
net, truth = sample_networks(cfg)

rng = np.random.default_rng(11)
inits = []
for _ in range(5):
    labels = truth.labels.copy()
    idx = rng.choice(40, 9, replace=False)
    labels[idx] = 1 - labels[idx]
    inits.append(init_alpha(HardMembership(labels, 2), 2, 0.1))
start_ari = np.mean([adjusted_rand_index(a.harden(), truth) for a in inits])
print(f"starting memberships: mean ARI {start_ari:.2f} vs truth")

for name, runner, order in [("marginal-only (VEM)", fit_vem, "none"),
                            ("concordance 2nd order", fit, "2nd"),
                            ("concordance 4th order", fit, "4th")]:
    res = runner(net, FitConfig(k=2, order=order, seed=1), init_alphas=inits)
    ari = adjusted_rand_index(res.labels, truth)
    print(f"\n{name}:")
    print(f"  ARI {ari:.2f} after {res.iterations} iterations "
          f"(converged: {res.converged})")
    print(f"  beta diagonal: {np.round(np.diag(res.params.beta), 2)}  "
          f"(true: [1.0, 1.5] up to label order)")
    print(f"  estimated correlations: {np.round(res.params.rho, 2)}")
