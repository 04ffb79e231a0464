"""Approximate log-likelihood for multi-sample networks with correlated
within-community edges.

The objective splits into a marginal Bernoulli part and a concordance part.
The marginal part is the block-wise likelihood: every edge is scored against
its block's constant mean level (``BlockParams.block_levels``), which is the
classic block-model discriminant and reduces the covariate model to it
exactly when covariates are all ones. The concordance part standardizes each
edge by its own community-k mean at the edge's covariate.
For community k in sample m, with edge weights w_ij (products of membership
probabilities, or 0/1 indicators for hard labels) and edges standardized by
the community's own block mean, the concordance statistic is

    S_mk = sum over ordered pairs of distinct edges of w_ij w_uv yhat_ij yhat_uv
         = T_mk^2 - Q_mk,   T_mk = sum w yhat,   Q_mk = sum (w yhat)^2,

and the concordance part of the objective is

    (1/M) sum_m log(1 + sum_k (rho_k / 2) max(S_mk, 0)  [+ fourth-order term]).

The optional fourth-order term adds, inside the same log argument,
max((rho_k S_mk / 2)^2 - rho_k^2 * P_mk, 0) per community, where
P_mk = sum_{s<t} (gamma_s gamma_t)^2 = ((sum gamma^2)^2 - sum gamma^4) / 2
is computable from the same per-edge sums. Every log argument is >= 1 by
construction, so the concordance part is nonnegative and the total never
falls below the marginal part.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net_model import (MU_EPS, BlockParams, MembershipProbs, MultiNetwork,
                        block_mean)

ORDERS = ("2nd", "4th")


@dataclass(frozen=True)
class LikelihoodParts:
    """Marginal + concordance decomposition of the objective."""

    marginal: float
    correlation: float

    @property
    def total(self) -> float:
        return self.marginal + self.correlation

    @property
    def correlation_share(self) -> float:
        """Diagnostic: concordance magnitude relative to the marginal part."""
        return self.correlation / max(abs(self.marginal), 1e-300)


@dataclass(frozen=True)
class ConcordanceCache:
    """Per (sample, community) sums of weighted standardized edges.

    t[m, k]  = sum_{i<j} w_ij yhat_ij
    q2[m, k] = sum_{i<j} (w_ij yhat_ij)^2
    q4[m, k] = sum_{i<j} (w_ij yhat_ij)^4
    """

    t: np.ndarray
    q2: np.ndarray
    q4: np.ndarray

    def s(self) -> np.ndarray:
        """S_mk = T^2 - Q2: the ordered-pair double sum over distinct edges."""
        return self.t ** 2 - self.q2

    def pair4(self) -> np.ndarray:
        """sum_{s<t} (gamma_s gamma_t)^2, from the squared-sums identity."""
        return 0.5 * (self.q2 ** 2 - self.q4)


def _check_inputs(net: MultiNetwork, alpha: MembershipProbs, params: BlockParams):
    if alpha.n_nodes != net.n_nodes:
        raise ValueError("alpha and network disagree on the number of nodes")
    if params.k != alpha.n_communities:
        raise ValueError("params and alpha disagree on the number of communities")


def _standardized_edges(net: MultiNetwork, params: BlockParams) -> np.ndarray:
    """yhat[k, m, i, j]: edges standardized by community k's block mean at the
    edge's covariate; zero on the diagonal."""
    k = params.k
    out = np.empty((k, net.n_samples, net.n_nodes, net.n_nodes))
    for q in range(k):
        mu = np.clip(block_mean(params.beta[q, q], net.covariates),
                     MU_EPS, 1.0 - MU_EPS)
        out[q] = (net.adjacency - mu) / np.sqrt(mu * (1.0 - mu))
    idx = np.arange(net.n_nodes)
    out[:, :, idx, idx] = 0.0
    return out


def _marginal_block_sums(net: MultiNetwork, params: BlockParams) -> np.ndarray:
    """bsum[q, l, i, j] = sum_m (y log mu_ql + (1 - y) log(1 - mu_ql)) with
    the block-constant mean mu_ql from ``params.block_levels()``; zero on the
    diagonal."""
    k, n, m = params.k, net.n_nodes, net.n_samples
    levels = np.clip(params.block_levels(), MU_EPS, 1.0 - MU_EPS)
    edge_counts = net.adjacency.sum(axis=0)
    bsum = (np.log(levels)[:, :, None, None] * edge_counts
            + np.log1p(-levels)[:, :, None, None] * (m - edge_counts))
    idx = np.arange(n)
    bsum[:, :, idx, idx] = 0.0
    return bsum


def concordance_cache(net: MultiNetwork, alpha: MembershipProbs,
                      params: BlockParams) -> ConcordanceCache:
    """Build the (M, K) concordance sums for soft weights w_ij = a_ik a_jk."""
    _check_inputs(net, alpha, params)
    yhat = _standardized_edges(net, params)
    return _cache_from_parts(yhat, alpha.alpha)


def _weighted_pair_sums(mats: np.ndarray, a: np.ndarray) -> np.ndarray:
    """out[m, k] = 0.5 * sum_ij mats[k, m, i, j] a_ik a_jk (zero diagonals)."""
    k = mats.shape[0]
    out = np.empty((mats.shape[1], k))
    for q in range(k):
        out[:, q] = 0.5 * ((mats[q] @ a[:, q]) @ a[:, q])
    return out


def _cache_from_parts(yhat: np.ndarray, a: np.ndarray) -> ConcordanceCache:
    return ConcordanceCache(
        t=_weighted_pair_sums(yhat, a),
        q2=_weighted_pair_sums(yhat ** 2, a ** 2),
        q4=_weighted_pair_sums(yhat ** 4, a ** 4),
    )


def concordance_stat(net: MultiNetwork, alpha: MembershipProbs,
                     params: BlockParams, m: int, k: int) -> float:
    """S_mk for one (sample, community) pair, in O(N^2) via T^2 - Q2."""
    _check_inputs(net, alpha, params)
    if not 0 <= m < net.n_samples:
        raise ValueError(f"sample index {m} out of range")
    if not 0 <= k < params.k:
        raise ValueError(f"community index {k} out of range")
    cache = concordance_cache(net, alpha, params)
    return float(cache.s()[m, k])


def _log_argument(cache: ConcordanceCache, rho: np.ndarray, order: str) -> np.ndarray:
    """Per-sample log argument; mathematically >= 1, clamped there anyway."""
    s = cache.s()
    arg = 1.0 + (np.maximum(s, 0.0) * (rho / 2.0)).sum(axis=1)
    if order == "4th":
        fourth = np.maximum((rho * s / 2.0) ** 2 - rho ** 2 * cache.pair4(), 0.0)
        arg = arg + fourth.sum(axis=1)
    return np.maximum(arg, 1.0)


def log_lik_independent(net: MultiNetwork, alpha: MembershipProbs,
                        params: BlockParams) -> float:
    """Soft-weighted Bernoulli log-likelihood, averaged over samples.

    With 0/1 membership rows this is exactly the block-sum form: each edge
    contributes y log mu + (1 - y) log(1 - mu) for its own block.
    """
    _check_inputs(net, alpha, params)
    bsum = _marginal_block_sums(net, params)
    a = alpha.alpha
    val = 0.5 * np.einsum("qlij,iq,jl->", bsum, a, a, optimize=True)
    return float(val / net.n_samples)


def log_lik_correlation(net: MultiNetwork, alpha: MembershipProbs,
                        params: BlockParams, order: str = "2nd") -> float:
    """Concordance part of the objective; nonnegative by construction."""
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}")
    _check_inputs(net, alpha, params)
    cache = concordance_cache(net, alpha, params)
    return float(np.mean(np.log(_log_argument(cache, params.rho, order))))


def approx_log_lik(net: MultiNetwork, alpha: MembershipProbs,
                   params: BlockParams, order: str = "2nd") -> LikelihoodParts:
    """Marginal plus concordance objective; total >= marginal always."""
    return LikelihoodParts(
        marginal=log_lik_independent(net, alpha, params),
        correlation=log_lik_correlation(net, alpha, params, order),
    )


class NodeConditional:
    """Evaluates the objective with one node's membership forced, reusing
    cached sums so only terms touching that node are recomputed.

    Built once per (network, membership state, block coefficients);
    ``forced_scores(i)`` returns, for every community c, the objective value
    (up to terms constant in the choice) with row i replaced by the one-hot
    vector at c, soft weights everywhere else. Rows may be swapped via
    ``update_row`` to support sequential sweeps, and ``rho`` may be reassigned
    after the moment step since the cached sums do not depend on it.
    """

    def __init__(self, net: MultiNetwork, alpha: np.ndarray, params: BlockParams,
                 order: str = "2nd"):
        if order not in ORDERS + ("none",):
            raise ValueError(f"order must be one of {ORDERS + ('none',)}")
        self.order = order
        self.n_samples = net.n_samples
        self.k = params.k
        self.rho = np.array(params.rho, dtype=float)
        self.alpha = np.array(alpha, dtype=float)
        self.bsum = _marginal_block_sums(net, params)
        self._fourth = order == "4th"
        self._cached_node = None
        if order != "none":
            self.yhat = _standardized_edges(net, params)
            self.yhat2 = self.yhat ** 2
            self.yhat4 = self.yhat2 ** 2 if self._fourth else None
            self.rebuild_caches()

    def rebuild_caches(self):
        a = self.alpha
        self.t = _weighted_pair_sums(self.yhat, a)
        self.q2 = _weighted_pair_sums(self.yhat2, a ** 2)
        self.q4 = (_weighted_pair_sums(self.yhat4, a ** 4) if self._fourth
                   else np.zeros_like(self.t))
        self._cached_node = None

    def marginal_total(self) -> float:
        a = self.alpha
        val = 0.0
        for q in range(self.k):
            for l in range(self.k):
                val += a[:, q] @ (self.bsum[q, l] @ a[:, l])
        return 0.5 * val / self.n_samples

    def correlation_total(self) -> float:
        if self.order == "none":
            return 0.0
        cache = ConcordanceCache(t=self.t, q2=self.q2, q4=self.q4)
        return float(np.mean(np.log(_log_argument(cache, self.rho, self.order))))

    def objective(self) -> float:
        return self.marginal_total() + self.correlation_total()

    def rho_moments(self):
        """Method-of-moments correlations under the current memberships:
        (sum_m S_mk) / (M * (pair-weight double sum)), before clamping.
        Returns (raw ratios, denominators)."""
        num = (self.t ** 2 - self.q2).sum(axis=0)
        a = self.alpha
        den = np.empty(self.k)
        for q in range(self.k):
            col = a[:, q]
            tw = 0.5 * (col.sum() ** 2 - (col ** 2).sum())
            qw = 0.5 * ((np.outer(col, col) ** 2).sum() - (col ** 4).sum())
            den[q] = self.n_samples * (tw ** 2 - qw)
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = np.where(den > 0, num / np.maximum(den, 1e-300), 0.0)
        return raw, den

    def _node_sums(self, i):
        """u1[m,k] = sum_j a_jk yhat_ij; v2, v4 the squared/quartic analogues.
        Memoized for the most recent node so a score-then-update pair reuses
        one computation; any row change invalidates the memo."""
        if self._cached_node is not None and self._cached_node[0] == i:
            return self._cached_node[1:]
        a = self.alpha
        u1 = np.einsum("kmj,jk->mk", self.yhat[:, :, i, :], a)
        v2 = np.einsum("kmj,jk->mk", self.yhat2[:, :, i, :], a ** 2)
        v4 = (np.einsum("kmj,jk->mk", self.yhat4[:, :, i, :], a ** 4)
              if self._fourth else np.zeros_like(u1))
        self._cached_node = (i, u1, v2, v4)
        return u1, v2, v4

    def _marginal_scores(self, i):
        return np.einsum("clj,jl->c", self.bsum[:, :, i, :], self.alpha) / self.n_samples

    def forced_scores(self, i: int) -> np.ndarray:
        marg = self._marginal_scores(i)
        if self.order == "none":
            return marg

        u1, v2, v4 = self._node_sums(i)
        ai = self.alpha[i]
        t_base = self.t - ai * u1
        q2_base = self.q2 - ai ** 2 * v2
        s_base = t_base ** 2 - q2_base
        contrib_base = np.maximum(s_base, 0.0) * (self.rho / 2.0)
        # forcing node i into community c changes only column c of the sums
        t_forced = t_base + u1
        q2_forced = q2_base + v2
        s_forced = t_forced ** 2 - q2_forced
        contrib_forced = np.maximum(s_forced, 0.0) * (self.rho / 2.0)
        if self._fourth:
            q4_base = self.q4 - ai ** 4 * v4
            pair4_base = 0.5 * (q2_base ** 2 - q4_base)
            contrib_base = contrib_base + np.maximum(
                (self.rho * s_base / 2.0) ** 2 - self.rho ** 2 * pair4_base, 0.0)
            q4_forced = q4_base + v4
            pair4_forced = 0.5 * (q2_forced ** 2 - q4_forced)
            contrib_forced = contrib_forced + np.maximum(
                (self.rho * s_forced / 2.0) ** 2 - self.rho ** 2 * pair4_forced, 0.0)
        base_sum = 1.0 + contrib_base.sum(axis=1)
        arg = np.maximum(base_sum[:, None] - contrib_base + contrib_forced, 1.0)
        return marg + np.mean(np.log(arg), axis=0)

    def update_row(self, i: int, new_row: np.ndarray):
        """Swap node i's membership row, adjusting the concordance sums."""
        new_row = np.asarray(new_row, dtype=float)
        if self.order != "none":
            u1, v2, v4 = self._node_sums(i)
            old = self.alpha[i]
            self.t += (new_row - old) * u1
            self.q2 += (new_row ** 2 - old ** 2) * v2
            if self._fourth:
                self.q4 += (new_row ** 4 - old ** 4) * v4
        self.alpha[i] = new_row
        self._cached_node = None


def bayes_factor_log(net: MultiNetwork, alpha: MembershipProbs,
                     params: BlockParams, i: int, q: int, b: int,
                     order: str = "2nd") -> float:
    """log of the objective ratio with node i forced into community q versus
    community b, all other rows held at their soft values.

    Matches the difference of two full evaluations with one-hot rows; only
    the terms touching node i are recomputed.
    """
    _check_inputs(net, alpha, params)
    n = net.n_nodes
    if not 0 <= i < n:
        raise ValueError(f"node index {i} out of range")
    for c in (q, b):
        if not 0 <= c < params.k:
            raise ValueError(f"community index {c} out of range")
    if q == b:
        return 0.0
    scores = NodeConditional(net, alpha.alpha, params, order).forced_scores(i)
    return float(scores[q] - scores[b])
