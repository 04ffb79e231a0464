"""Core data types for multi-sample networks, memberships, and clustering metrics.

All containers are frozen after construction and safe to share across workers.
Community labels are 0-based everywhere (matching node indices in the file
formats); a K-community partition uses labels 0..K-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

MU_EPS = 1e-9  # clamp for Bernoulli means before standardization
ROW_SUM_TOL = 1e-12


def _as_float_array(x, name):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class MultiNetwork:
    """M symmetric, unweighted sample networks on a shared set of N nodes.

    ``adjacency`` has shape (M, N, N) with entries in {0, 1}, zero diagonal.
    ``covariates`` holds the per-edge real covariates with the same shape;
    it defaults to all ones, which recovers the homogeneous block model.
    """

    adjacency: np.ndarray
    covariates: np.ndarray = None

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=float)
        if adj.ndim != 3 or adj.shape[1] != adj.shape[2]:
            raise ValueError("adjacency must have shape (M, N, N)")
        if not np.isin(adj, (0.0, 1.0)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        if np.abs(adj - adj.transpose(0, 2, 1)).max(initial=0.0) != 0.0:
            raise ValueError("each adjacency matrix must be symmetric")
        if adj.shape[1] and np.abs(np.diagonal(adj, axis1=1, axis2=2)).max(initial=0.0) != 0.0:
            raise ValueError("adjacency matrices must have zero diagonal")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

        if self.covariates is None:
            cov = np.ones_like(adj)
        else:
            cov = _as_float_array(self.covariates, "covariates")
            if cov.shape != adj.shape:
                raise ValueError("covariates must match adjacency shape")
            if np.abs(cov - cov.transpose(0, 2, 1)).max(initial=0.0) != 0.0:
                raise ValueError("covariate matrices must be symmetric")
        cov.setflags(write=False)
        object.__setattr__(self, "covariates", cov)

    @property
    def n_samples(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[1]


@dataclass(frozen=True)
class MembershipProbs:
    """N x K row-stochastic matrix of soft community assignments."""

    alpha: np.ndarray

    def __post_init__(self):
        a = _as_float_array(self.alpha, "alpha")
        if a.ndim != 2:
            raise ValueError("alpha must be a 2-d matrix")
        if a.min(initial=0.0) < 0.0 or a.max(initial=0.0) > 1.0 + ROW_SUM_TOL:
            raise ValueError("alpha entries must lie in [0, 1]")
        if a.shape[1] and np.abs(a.sum(axis=1) - 1.0).max(initial=0.0) > ROW_SUM_TOL:
            raise ValueError("alpha rows must sum to 1")
        a.setflags(write=False)
        object.__setattr__(self, "alpha", a)

    @property
    def n_nodes(self) -> int:
        return self.alpha.shape[0]

    @property
    def n_communities(self) -> int:
        return self.alpha.shape[1]

    def harden(self) -> "HardMembership":
        """Row-argmax labels (ties broken toward the lowest community index)."""
        return HardMembership(np.argmax(self.alpha, axis=1), self.n_communities)


@dataclass(frozen=True)
class HardMembership:
    """Length-N vector of community labels in 0..k-1.

    An empty community is permitted but is always observable through
    ``empty_communities`` so callers can report it rather than lose it.
    """

    labels: np.ndarray
    k: int

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=int)
        if lab.ndim != 1:
            raise ValueError("labels must be a 1-d vector")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if lab.size and (lab.min() < 0 or lab.max() >= self.k):
            raise ValueError(f"labels must lie in 0..{self.k - 1}")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def n_nodes(self) -> int:
        return self.labels.shape[0]

    @property
    def empty_communities(self) -> tuple[int, ...]:
        present = set(self.labels.tolist())
        return tuple(q for q in range(self.k) if q not in present)

    def to_probs(self) -> MembershipProbs:
        a = np.zeros((self.n_nodes, self.k))
        a[np.arange(self.n_nodes), self.labels] = 1.0
        return MembershipProbs(a)


@dataclass(frozen=True)
class BlockParams:
    """Symmetric K x K logistic coefficients plus per-community correlations.

    ``beta[q, l]`` is the coefficient of the edge covariate for block (q, l);
    ``rho[q]`` is the average pairwise correlation of edges inside community q
    (between-community edges are treated as independent, so there is no
    between-community correlation parameter). ``level[q, l]`` is the block's
    mean connection rate: the marginal discriminant scores every edge against
    its block's constant level, the block-wise likelihood form. The default
    level is block_mean(beta, 1), which makes the two views coincide for
    all-ones covariates.
    """

    beta: np.ndarray
    rho: np.ndarray
    level: np.ndarray = None

    def __post_init__(self):
        b = _as_float_array(self.beta, "beta")
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise ValueError("beta must be a square matrix")
        if np.abs(b - b.T).max(initial=0.0) > 1e-12:
            raise ValueError("beta must be symmetric")
        r = _as_float_array(self.rho, "rho")
        if r.ndim != 1 or r.shape[0] != b.shape[0]:
            raise ValueError("rho must be a length-K vector")
        if r.size and (r.min() < 0.0 or r.max() > 1.0):
            raise ValueError("rho entries must lie in [0, 1]")
        if self.level is None:
            lv = block_mean(b, np.ones_like(b))
        else:
            lv = _as_float_array(self.level, "level")
            if lv.shape != b.shape:
                raise ValueError("level must match beta's shape")
            if np.abs(lv - lv.T).max(initial=0.0) > 1e-12:
                raise ValueError("level must be symmetric")
            if lv.size and (lv.min() < 0.0 or lv.max() > 1.0):
                raise ValueError("level entries must lie in [0, 1]")
        b.setflags(write=False)
        r.setflags(write=False)
        lv.setflags(write=False)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "rho", r)
        object.__setattr__(self, "level", lv)

    @property
    def k(self) -> int:
        return self.beta.shape[0]

    def block_levels(self):
        """K x K matrix of block mean connection rates."""
        return self.level


def block_mean(beta_ql, x):
    """Edge probability exp(b*x) / (1 + exp(b*x)), stable for large |b*x|.

    Accepts scalars or arrays (broadcasting); raises on non-finite input.
    """
    beta_ql = np.asarray(beta_ql, dtype=float)
    x = np.asarray(x, dtype=float)
    if not (np.all(np.isfinite(beta_ql)) and np.all(np.isfinite(x))):
        raise ValueError("block_mean requires finite inputs")
    out = expit(beta_ql * x)
    # keep the open interval even when expit saturates in float64
    out = np.clip(out, 5e-324, np.nextafter(1.0, 0.0))
    if out.ndim == 0:
        return float(out)
    return out


def standardize_edge(y, mu):
    """Standardized binary edge (y - mu) / sqrt(mu (1 - mu)).

    ``mu`` is clamped to [MU_EPS, 1 - MU_EPS] first; degenerate block means
    show up in early iterations and must not produce division by zero.
    """
    y = np.asarray(y, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0.0) or np.any(mu > 1.0) or not np.all(np.isfinite(mu)):
        raise ValueError("mu must lie in [0, 1]")
    mu = np.clip(mu, MU_EPS, 1.0 - MU_EPS)
    out = (y - mu) / np.sqrt(mu * (1.0 - mu))
    if out.ndim == 0:
        return float(out)
    return out


def adjusted_rand_index(a: HardMembership, b: HardMembership) -> float:
    """Adjusted Rand Index with the Hubert-Arabie permutation-model correction.

    Symmetric, invariant under relabeling either partition, and 1.0 for
    identical partitions up to a label permutation.
    """
    la, lb = a.labels, b.labels
    if la.shape[0] != lb.shape[0]:
        raise ValueError("partitions must cover the same nodes")
    n = la.shape[0]
    if n < 2:
        raise ValueError("ARI needs at least 2 nodes")
    table = np.zeros((a.k, b.k))
    np.add.at(table, (la, lb), 1.0)

    def comb2(x):
        return x * (x - 1.0) / 2.0

    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    total = comb2(np.array(float(n)))
    expected = sum_rows * sum_cols / total
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        # both partitions place all pairs identically (e.g. all singletons)
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))
