"""Multi-sample network generator with controlled within-community edge correlation.

Edges are drawn by thresholding Gaussian latents (one shared factor per
correlated group), which hits arbitrary Bernoulli marginals while giving an
exact exchangeable latent correlation. Between-community edges are always
independent. Three dependence structures are supported: ``independent``,
``exchangeable`` (every within-community edge pair shares one correlation),
and ``grouped`` (disjoint exchangeable groups sized to a target pairwise
correlation density), plus a ``hub`` variant where only edges sharing a node
are correlated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .bivariate_normal import bvn_cdf
from .net_model import HardMembership, MultiNetwork, block_mean

CLIP_LO, CLIP_HI = 0.01, 0.99  # bounds for random-effect-shifted means
_CORR_TOL = 1e-6
_DELTA_MAX = 1.0 - 1e-9


class FeasibilityError(ValueError):
    """Requested binary correlation is unattainable for the given marginals."""

    def __init__(self, message, attainable_max=None):
        super().__init__(message)
        self.attainable_max = attainable_max


@dataclass(frozen=True)
class CorrelationStructure:
    """Within-community dependence specification.

    kind: "independent", "exchangeable", "grouped", or "hub".
    rho:  target pairwise correlation, one value per community or a scalar
          shared by all communities (ignored for "independent").
    lam:  for "grouped", the target pairwise correlation density in (0, 1]:
          the fraction of within-community edge pairs that are correlated.
    """

    kind: str = "independent"
    rho: float | tuple = 0.0
    lam: float = 1.0

    def __post_init__(self):
        if self.kind not in ("independent", "exchangeable", "grouped", "hub"):
            raise ValueError(f"unknown correlation kind {self.kind!r}")
        rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        if np.any(rho < 0.0) or np.any(rho > 1.0):
            raise ValueError("rho must lie in [0, 1]")
        if self.kind == "grouped" and not 0.0 < self.lam <= 1.0:
            raise ValueError("lambda must lie in (0, 1]")

    def rho_for(self, q, k):
        """Correlation for community q out of k communities."""
        if self.kind == "independent":
            return 0.0
        rho = np.atleast_1d(np.asarray(self.rho, dtype=float))
        if rho.size == 1:
            return float(rho[0])
        if rho.size != k:
            raise ValueError("rho must be scalar or length-K")
        return float(rho[q])


@dataclass(frozen=True)
class SimConfig:
    """Generator settings for one multi-sample SBM draw."""

    n_nodes: int
    community_sizes: tuple
    n_samples: int
    beta: np.ndarray
    covariate_within: tuple = (1.0, 1.0)
    covariate_between: tuple = (1.0, 1.0)
    correlation: CorrelationStructure = field(default_factory=CorrelationStructure)
    random_effect_sd: float = 0.0
    n_groups: int = 10
    seed: int = 0

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.community_sizes)
        object.__setattr__(self, "community_sizes", sizes)
        if sum(sizes) != self.n_nodes:
            raise ValueError("community sizes must sum to n_nodes")
        if any(s <= 0 for s in sizes):
            raise ValueError("community sizes must be positive")
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        beta = np.asarray(self.beta, dtype=float)
        if beta.shape != (len(sizes), len(sizes)):
            raise ValueError("beta must be K x K for K = len(community_sizes)")
        if np.abs(beta - beta.T).max(initial=0.0) > 1e-12:
            raise ValueError("beta must be symmetric")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        for name, (a, b) in (("covariate_within", self.covariate_within),
                             ("covariate_between", self.covariate_between)):
            if a > b:
                raise ValueError(f"{name} range must satisfy a <= b")
        if self.random_effect_sd < 0.0:
            raise ValueError("random_effect_sd must be >= 0")
        if self.n_groups < 1:
            raise ValueError("n_groups must be >= 1")

    @property
    def k(self) -> int:
        return len(self.community_sizes)

    def truth(self) -> HardMembership:
        labels = np.repeat(np.arange(self.k), self.community_sizes)
        return HardMembership(labels, self.k)


def binary_threshold_corr(mu1, mu2, delta):
    """Correlation of the two binaries obtained by thresholding standard
    bivariate normals with latent correlation delta at ndtri(mu1), ndtri(mu2)."""
    p11 = bvn_cdf(ndtri(mu1), ndtri(mu2), delta)
    denom = np.sqrt(mu1 * (1.0 - mu1) * mu2 * (1.0 - mu2))
    return (p11 - mu1 * mu2) / denom


def latent_threshold_solve(mu1, mu2, rho_target):
    """Latent normal correlation delta whose thresholded binaries have
    correlation ``rho_target``, solved by bisection to 1e-6.

    Raises FeasibilityError when the target exceeds what any delta < 1 can
    reach for these marginals (the Frechet-bound regime), reporting the
    attainable maximum.
    """
    mu1, mu2, rho_target = float(mu1), float(mu2), float(rho_target)
    for mu in (mu1, mu2):
        if not 0.0 < mu < 1.0:
            raise ValueError("marginal means must lie strictly inside (0, 1)")
    if rho_target < 0.0:
        raise ValueError("rho_target must be >= 0 (within-community edges concord)")
    if rho_target == 0.0:
        return 0.0
    r_max = binary_threshold_corr(mu1, mu2, _DELTA_MAX)
    if rho_target > r_max - _CORR_TOL:
        raise FeasibilityError(
            f"correlation {rho_target:.6g} infeasible for marginals "
            f"({mu1:.4g}, {mu2:.4g}); attainable maximum is {r_max:.6g}",
            attainable_max=r_max,
        )
    lo, hi = 0.0, _DELTA_MAX
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        r = binary_threshold_corr(mu1, mu2, mid)
        if abs(r - rho_target) < 0.5 * _CORR_TOL:
            return mid
        if r < rho_target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gen_covariates(cfg: SimConfig, labels: HardMembership, rng) -> np.ndarray:
    """Symmetric edge covariates, fresh per sample: Uniform(a1, a2) for
    within-community pairs, Uniform(b1, b2) for between-community pairs."""
    n, m = cfg.n_nodes, cfg.n_samples
    if labels.n_nodes != n:
        raise ValueError("labels do not match n_nodes")
    same = labels.labels[:, None] == labels.labels[None, :]
    iu = np.triu_indices(n, k=1)
    a1, a2 = cfg.covariate_within
    b1, b2 = cfg.covariate_between
    out = np.zeros((m, n, n))
    for s in range(m):
        u = rng.uniform(size=iu[0].shape[0])
        vals = np.where(same[iu], a1 + (a2 - a1) * u, b1 + (b2 - b1) * u)
        x = np.zeros((n, n))
        x[iu] = vals
        out[s] = x + x.T
    return out


def apply_random_effects(mu, labels: HardMembership, sigma, n_groups, rng):
    """Add one Normal(0, sigma^2) draw per group of consecutive samples to the
    within-community means, then clip everything touched to [0.01, 0.99].

    Sample m belongs to group (m * n_groups) // M. Returns the shifted stack
    and the per-group draws; sigma = 0 is the identity and consumes no
    randomness.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    mu = np.asarray(mu, dtype=float)
    if sigma == 0:
        return mu.copy(), np.zeros(n_groups)
    m = mu.shape[0]
    gammas = rng.normal(0.0, sigma, size=n_groups)
    same = labels.labels[:, None] == labels.labels[None, :]
    np.fill_diagonal(same, False)
    out = mu.copy()
    groups = (np.arange(m) * n_groups) // m
    for s in range(m):
        shifted = np.clip(out[s][same] + gammas[groups[s]], CLIP_LO, CLIP_HI)
        out[s][same] = shifted
    return out, gammas


def _edge_groups(cfg: SimConfig, edge_count, rng_struct):
    """Partition a community's edge list into exchangeable groups.

    exchangeable -> one group; grouped -> disjoint groups of size
    max(2, round(lam * (E - 1)) + 1), assigned uniformly at random and fixed
    across samples; independent -> singletons.
    """
    kind = cfg.correlation.kind
    if kind == "exchangeable":
        return [np.arange(edge_count)]
    if kind == "grouped":
        size = max(2, int(round(cfg.correlation.lam * (edge_count - 1))) + 1)
        perm = rng_struct.permutation(edge_count)
        return [perm[i:i + size] for i in range(0, edge_count, size)]
    return [np.array([e]) for e in range(edge_count)]


def sample_networks(cfg: SimConfig):
    """Draw a MultiNetwork plus its ground-truth labels.

    Per sample: draw covariates, form per-edge means through the block
    logistic model, apply random effects when configured, then draw edges.
    Within-community edges use the Gaussian-copula threshold construction
    with the latent correlation solved at the community's average mean (one
    solve per community per random-effect group); between-community edges are
    independent Bernoulli draws. Same seed, same networks.
    """
    truth = cfg.truth()
    labels = truth.labels
    n, m, k = cfg.n_nodes, cfg.n_samples, cfg.k

    root = np.random.SeedSequence(cfg.seed)
    ss_struct, ss_re, ss_cov, *ss_samples = root.spawn(m + 3)
    rng_struct = np.random.default_rng(ss_struct)
    rng_re = np.random.default_rng(ss_re)
    rng_cov = np.random.default_rng(ss_cov)

    covariates = gen_covariates(cfg, truth, rng_cov)
    beta_edge = cfg.beta[labels[:, None], labels[None, :]]
    mu = np.array([block_mean(beta_edge, covariates[s]) for s in range(m)])
    mu, _ = apply_random_effects(mu, truth, cfg.random_effect_sd, cfg.n_groups, rng_re)

    groups_of = (np.arange(m) * cfg.n_groups) // m if cfg.random_effect_sd > 0 else np.zeros(m, dtype=int)
    n_regimes = cfg.n_groups if cfg.random_effect_sd > 0 else 1

    # per-community edge index lists (upper triangle) and group partitions
    comm_edges = []
    comm_groups = []
    for q in range(k):
        nodes = np.where(labels == q)[0]
        ii, jj = np.triu_indices(nodes.size, k=1)
        edges = (nodes[ii], nodes[jj])
        comm_edges.append(edges)
        if cfg.correlation.kind == "hub":
            comm_groups.append(None)
        else:
            comm_groups.append(_edge_groups(cfg, edges[0].size, rng_struct))

    # latent correlations: one solve per community per random-effect regime
    delta = np.zeros((k, n_regimes))
    for q in range(k):
        rho_q = cfg.correlation.rho_for(q, k)
        if rho_q == 0.0 or cfg.correlation.kind == "independent":
            continue
        ei, ej = comm_edges[q]
        if ei.size == 0:
            continue
        for g in range(n_regimes):
            sel = groups_of == g
            if not sel.any():
                continue
            mu_bar = float(mu[sel][:, ei, ej].mean())
            try:
                if cfg.correlation.kind == "hub":
                    # per-node factors: sqrt(d) (W_i + W_j) + sqrt(1 - 2d) eps
                    # needs d <= 1/2 for a valid idiosyncratic variance
                    d = latent_threshold_solve(mu_bar, mu_bar, rho_q)
                    if d > 0.5:
                        raise FeasibilityError(
                            f"hub structure caps the latent correlation at 0.5; "
                            f"needed {d:.4g}", attainable_max=binary_threshold_corr(mu_bar, mu_bar, 0.5))
                    delta[q, g] = d
                else:
                    delta[q, g] = latent_threshold_solve(mu_bar, mu_bar, rho_q)
            except FeasibilityError as err:
                raise FeasibilityError(
                    f"community {q}: {err}", attainable_max=err.attainable_max
                ) from err

    between_mask = labels[:, None] != labels[None, :]
    iu = np.triu_indices(n, k=1)
    between_sel = between_mask[iu]

    adjacency = np.zeros((m, n, n))
    for s in range(m):
        rng = np.random.default_rng(ss_samples[s])
        y = np.zeros((n, n))
        # within-community edges, community by community in index order
        for q in range(k):
            ei, ej = comm_edges[q]
            if ei.size == 0:
                continue
            mu_e = np.clip(mu[s, ei, ej], 1e-12, 1.0 - 1e-12)
            d = delta[q, groups_of[s]]
            if d == 0.0:
                vals = (rng.uniform(size=ei.size) < mu_e).astype(float)
            elif cfg.correlation.kind == "hub":
                w_node = rng.standard_normal(n)
                eps = rng.standard_normal(ei.size)
                z = (np.sqrt(d) * (w_node[ei] + w_node[ej])
                     + np.sqrt(1.0 - 2.0 * d) * eps)
                vals = (z <= ndtri(mu_e)).astype(float)
            else:
                z = np.empty(ei.size)
                for grp in comm_groups[q]:
                    if grp.size >= 2:
                        w = rng.standard_normal()
                        eps = rng.standard_normal(grp.size)
                        z[grp] = np.sqrt(d) * w + np.sqrt(1.0 - d) * eps
                    else:
                        z[grp] = rng.standard_normal(grp.size)
                vals = (z <= ndtri(mu_e)).astype(float)
            y[ei, ej] = vals
        # between-community edges, independent
        mu_b = mu[s][iu][between_sel]
        y[iu[0][between_sel], iu[1][between_sel]] = (
            rng.uniform(size=mu_b.size) < mu_b
        ).astype(float)
        adjacency[s] = y + y.T

    net = MultiNetwork(adjacency=adjacency, covariates=covariates)
    return net, truth
