import numpy as np
import pytest
from scipy.stats import multivariate_normal

from depnet.bivariate_normal import bvn_cdf
from depnet.net_model import HardMembership
from depnet.simulator import (CorrelationStructure, FeasibilityError,
                              SimConfig, apply_random_effects,
                              binary_threshold_corr, gen_covariates,
                              latent_threshold_solve, sample_networks)

# frozen Monte-Carlo inversion oracle (1e7 one-factor latent draws, bisection)
MC_DELTA_HALF_HALF_06 = 0.8090668


def _pairwise_corr(samples):
    """Average pairwise correlation across columns of (n_draws, n_vars)."""
    z = (samples - samples.mean(axis=0)) / samples.std(axis=0)
    c = (z.T @ z) / samples.shape[0]
    n = c.shape[0]
    return (c.sum() - np.trace(c)) / (n * (n - 1))


class TestBvnCdf:
    def test_against_scipy_grid(self):
        rng = np.random.default_rng(0)
        for _ in range(60):
            h, k = rng.uniform(-3, 3, 2)
            r = rng.uniform(-0.999, 0.999)
            ref = multivariate_normal(cov=[[1, r], [r, 1]]).cdf([h, k])
            assert bvn_cdf(h, k, r) == pytest.approx(ref, abs=1e-7)

    def test_independence_factorizes(self):
        from scipy.special import ndtr
        assert bvn_cdf(0.7, -1.1, 0.0) == pytest.approx(ndtr(0.7) * ndtr(-1.1), abs=1e-14)

    def test_arcsine_identity_at_origin(self):
        for r in (-0.9, -0.3, 0.2, 0.8):
            assert bvn_cdf(0, 0, r) == pytest.approx(0.25 + np.arcsin(r) / (2 * np.pi),
                                                     abs=1e-12)

    def test_monotone_in_correlation(self):
        vals = [bvn_cdf(0.5, -0.2, r) for r in np.linspace(-0.99, 0.99, 21)]
        assert np.all(np.diff(vals) > 0)

    def test_symmetry(self):
        assert bvn_cdf(1.2, -0.4, 0.5) == pytest.approx(bvn_cdf(-0.4, 1.2, 0.5), abs=1e-14)


class TestLatentThresholdSolve:
    def test_zero_maps_to_zero(self):
        assert latent_threshold_solve(0.3, 0.7, 0.0) == 0.0

    def test_frozen_mc_oracle_value(self):
        delta = latent_threshold_solve(0.5, 0.5, 0.6)
        assert delta == pytest.approx(MC_DELTA_HALF_HALF_06, abs=2.5e-3)
        # arcsine closed form for equal 0.5 marginals: corr = 2 asin(d) / pi
        assert delta == pytest.approx(np.sin(0.3 * np.pi), abs=1e-5)

    def test_solution_reproduces_target(self):
        for mu1, mu2, rho in [(0.3, 0.3, 0.4), (0.5, 0.7, 0.3), (0.2, 0.8, 0.1)]:
            d = latent_threshold_solve(mu1, mu2, rho)
            assert binary_threshold_corr(mu1, mu2, d) == pytest.approx(rho, abs=1e-6)

    def test_perfect_correlation_reported_infeasible(self):
        with pytest.raises(FeasibilityError) as exc:
            latent_threshold_solve(0.5, 0.5, 1.0)
        assert exc.value.attainable_max < 1.0

    def test_frechet_bound_infeasible(self):
        # max corr for (0.1, 0.9) marginals is 1/9
        with pytest.raises(FeasibilityError):
            latent_threshold_solve(0.1, 0.9, 0.5)

    def test_validation(self):
        with pytest.raises(ValueError):
            latent_threshold_solve(0.0, 0.5, 0.2)
        with pytest.raises(ValueError):
            latent_threshold_solve(0.5, 0.5, -0.1)


def _cfg(**kw):
    base = dict(n_nodes=20, community_sizes=(10, 10), n_samples=10,
                beta=np.zeros((2, 2)), seed=0)
    base.update(kw)
    return SimConfig(**base)


class TestCovariates:
    def test_weak_preset_ranges(self):
        cfg = _cfg(covariate_within=(-0.2, 0.2), covariate_between=(-0.2, 0.2))
        x = gen_covariates(cfg, cfg.truth(), np.random.default_rng(0))
        off = x[:, ~np.eye(20, dtype=bool)]
        assert off.min() >= -0.2 and off.max() <= 0.2

    def test_strong_preset_separates_blocks(self):
        cfg = _cfg(covariate_within=(0.9, 1.1), covariate_between=(-0.8, -0.6))
        truth = cfg.truth()
        x = gen_covariates(cfg, truth, np.random.default_rng(0))
        same = truth.labels[:, None] == truth.labels[None, :]
        np.fill_diagonal(same, False)
        within = x[:, same]
        between = x[:, ~same & ~np.eye(20, dtype=bool)]
        assert within.min() >= 0.9 and within.max() <= 1.1
        assert between.min() >= -0.8 and between.max() <= -0.6

    def test_degenerate_range_is_constant(self):
        cfg = _cfg(covariate_within=(0.3, 0.3), covariate_between=(0.3, 0.3))
        x = gen_covariates(cfg, cfg.truth(), np.random.default_rng(0))
        off = x[:, ~np.eye(20, dtype=bool)]
        assert np.all(off == 0.3)

    def test_symmetric_and_fresh_per_sample(self):
        cfg = _cfg(covariate_within=(-1, 1), covariate_between=(-1, 1))
        x = gen_covariates(cfg, cfg.truth(), np.random.default_rng(0))
        assert np.abs(x - x.transpose(0, 2, 1)).max() == 0.0
        assert not np.array_equal(x[0], x[1])


class TestRandomEffects:
    def test_sigma_zero_is_identity(self):
        mu = np.full((6, 4, 4), 0.5)
        labels = HardMembership(np.array([0, 0, 1, 1]), 2)
        rng = np.random.default_rng(0)
        state_before = rng.bit_generator.state
        out, gammas = apply_random_effects(mu, labels, 0.0, 3, rng)
        assert np.array_equal(out, mu)
        assert np.all(gammas == 0.0)
        assert rng.bit_generator.state == state_before

    def test_group_shift_scale(self):
        """Per-group draws have standard deviation sigma over many groups."""
        labels = HardMembership(np.zeros(3, dtype=int), 1)
        draws = []
        for rep in range(40):
            mu = np.full((10, 3, 3), 0.5)
            _, gammas = apply_random_effects(mu, labels, 0.5, 10,
                                             np.random.default_rng(rep))
            draws.extend(gammas)
        assert np.std(draws) == pytest.approx(0.5, abs=0.05)

    def test_clipping_bounds(self):
        labels = HardMembership(np.zeros(4, dtype=int), 1)
        mu = np.full((20, 4, 4), 0.5)
        out, _ = apply_random_effects(mu, labels, 1.5, 10, np.random.default_rng(1))
        off = out[:, ~np.eye(4, dtype=bool)]
        assert off.min() >= 0.01 and off.max() <= 0.99

    def test_only_within_community_entries_move(self):
        labels = HardMembership(np.array([0, 0, 1, 1]), 2)
        mu = np.full((4, 4, 4), 0.5)
        out, _ = apply_random_effects(mu, labels, 1.0, 2, np.random.default_rng(2))
        between = labels.labels[:, None] != labels.labels[None, :]
        assert np.all(out[:, between] == 0.5)


class TestSampleNetworks:
    def test_shape_symmetry_determinism(self):
        cfg = _cfg(correlation=CorrelationStructure(kind="exchangeable", rho=0.4))
        net1, truth = sample_networks(cfg)
        net2, _ = sample_networks(cfg)
        assert np.array_equal(net1.adjacency, net2.adjacency)
        assert np.array_equal(net1.covariates, net2.covariates)
        assert np.abs(net1.adjacency - net1.adjacency.transpose(0, 2, 1)).max() == 0
        net3, _ = sample_networks(_cfg(seed=1, correlation=CorrelationStructure(
            kind="exchangeable", rho=0.4)))
        assert not np.array_equal(net1.adjacency, net3.adjacency)
        assert truth.n_nodes == 20

    def test_independent_marginal_and_correlation(self):
        cfg = _cfg(n_nodes=16, community_sizes=(16,), n_samples=400,
                   beta=np.zeros((1, 1)))
        net, truth = sample_networks(cfg)
        iu = np.triu_indices(16, k=1)
        draws = net.adjacency[:, iu[0], iu[1]]
        assert abs(draws.mean() - 0.5) < 3 * 0.5 / np.sqrt(draws.size)
        assert abs(_pairwise_corr(draws)) < 0.03

    def test_per_block_marginal_fidelity_at_rho_zero(self):
        """Independent edges: every block's empirical rate sits within three
        binomial standard errors of its model-implied target."""
        from depnet.net_model import block_mean
        cfg = _cfg(n_nodes=20, community_sizes=(8, 12), n_samples=300,
                   beta=np.array([[0.9, -0.4], [-0.4, 1.6]]),
                   covariate_within=(0.4, 0.8), covariate_between=(0.4, 0.8))
        net, truth = sample_networks(cfg)
        labels = truth.labels
        mu = block_mean(cfg.beta[labels[:, None], labels[None, :]], net.covariates)
        for q in range(2):
            for l in range(q, 2):
                mask = np.triu((labels[:, None] == q) & (labels[None, :] == l)
                               | (labels[:, None] == l) & (labels[None, :] == q), 1)
                count = int(mask.sum()) * net.n_samples
                target = mu[:, mask].mean()
                realized = net.adjacency[:, mask].mean()
                se = np.sqrt(target * (1 - target) / count)
                assert abs(realized - target) <= 3 * se, (q, l)

    def test_exchangeable_moments(self):
        """The shared factor inflates the grand-mean variance to about
        rho * p (1 - p) / M, so the sample count sets the tolerance."""
        cfg = _cfg(n_nodes=16, community_sizes=(16,), n_samples=2000,
                   beta=np.zeros((1, 1)),
                   correlation=CorrelationStructure(kind="exchangeable", rho=0.6))
        net, _ = sample_networks(cfg)
        iu = np.triu_indices(16, k=1)
        draws = net.adjacency[:, iu[0], iu[1]]
        assert abs(draws.mean() - 0.5) < 0.03
        assert _pairwise_corr(draws) == pytest.approx(0.6, abs=0.05)

    def test_between_communities_stay_independent(self):
        cfg = _cfg(n_samples=400,
                   correlation=CorrelationStructure(kind="exchangeable", rho=0.6))
        net, truth = sample_networks(cfg)
        between = np.argwhere(truth.labels[:, None] != truth.labels[None, :])
        pick = [tuple(e) for e in between if e[0] < e[1]][:40]
        draws = np.stack([net.adjacency[:, i, j] for i, j in pick], axis=1)
        assert abs(_pairwise_corr(draws)) < 0.03

    def test_grouped_density(self):
        from depnet.simulator import _edge_groups
        cfg = _cfg(n_nodes=20, community_sizes=(20,), n_samples=2,
                   beta=np.zeros((1, 1)),
                   correlation=CorrelationStructure(kind="grouped", rho=0.6, lam=0.05))
        e = 20 * 19 // 2
        groups = _edge_groups(cfg, e, np.random.default_rng(0))
        covered = sorted(int(i) for g in groups for i in g)
        assert covered == list(range(e))
        pair_count = sum(len(g) * (len(g) - 1) // 2 for g in groups)
        density = 2 * pair_count / (e * (e - 1))
        assert 0.03 <= density <= 0.08

    def test_grouped_correlation_concentrates_in_groups(self):
        cfg = _cfg(n_nodes=12, community_sizes=(12,), n_samples=600,
                   beta=np.zeros((1, 1)),
                   correlation=CorrelationStructure(kind="grouped", rho=0.6, lam=0.2))
        from depnet.simulator import _edge_groups
        e = 12 * 11 // 2
        groups = _edge_groups(cfg, e, np.random.default_rng(
            np.random.SeedSequence(cfg.seed).spawn(1)[0]))
        net, _ = sample_networks(cfg)
        iu = np.triu_indices(12, k=1)
        draws = net.adjacency[:, iu[0], iu[1]]
        z = (draws - draws.mean(axis=0)) / draws.std(axis=0)
        corr = (z.T @ z) / draws.shape[0]
        big = [g for g in groups if len(g) >= 2]
        within_vals = [corr[a, b] for g in big for a in g for b in g if a < b]
        g0 = set(int(v) for v in big[0])
        cross_vals = [corr[a, b] for a in sorted(g0)[:4]
                      for b in range(e) if b not in g0]
        assert np.mean(within_vals) == pytest.approx(0.6, abs=0.05)
        assert abs(np.mean(cross_vals)) < 0.03

    def test_infeasible_combination_names_community(self):
        cfg = _cfg(correlation=CorrelationStructure(kind="exchangeable", rho=1.0))
        with pytest.raises(FeasibilityError, match="community"):
            sample_networks(cfg)

    def test_hub_cap_reported_as_infeasible(self):
        cfg = _cfg(correlation=CorrelationStructure(kind="hub", rho=0.6))
        with pytest.raises(FeasibilityError, match="community"):
            sample_networks(cfg)

    def test_hub_structure_correlates_sharing_edges(self):
        """Edges sharing a node hit the target correlation; disjoint edges
        stay independent (averaged over many node pairs)."""
        cfg = _cfg(n_nodes=10, community_sizes=(10,), n_samples=4000,
                   beta=np.zeros((1, 1)),
                   correlation=CorrelationStructure(kind="hub", rho=0.2))
        net, _ = sample_networks(cfg)
        iu = np.triu_indices(10, k=1)
        draws = net.adjacency[:, iu[0], iu[1]]
        z = (draws - draws.mean(axis=0)) / draws.std(axis=0)
        corr = (z.T @ z) / draws.shape[0]
        share_vals, disjoint_vals = [], []
        edges = list(zip(*iu))
        for a in range(len(edges)):
            for b in range(a + 1, len(edges)):
                common = set(edges[a]) & set(edges[b])
                (share_vals if common else disjoint_vals).append(corr[a, b])
        assert np.mean(share_vals) == pytest.approx(0.2, abs=0.03)
        assert abs(np.mean(disjoint_vals)) < 0.03


class TestSimConfigValidation:
    def test_sizes_must_sum(self):
        with pytest.raises(ValueError):
            _cfg(community_sizes=(5, 5))

    def test_bad_rho_and_lambda(self):
        with pytest.raises(ValueError):
            CorrelationStructure(kind="exchangeable", rho=1.5)
        with pytest.raises(ValueError):
            CorrelationStructure(kind="grouped", rho=0.5, lam=0.0)
        with pytest.raises(ValueError):
            CorrelationStructure(kind="banana")

    def test_truth_layout(self):
        cfg = _cfg(community_sizes=(4, 16))
        truth = cfg.truth()
        assert np.array_equal(truth.labels[:4], np.zeros(4))
        assert np.array_equal(truth.labels[4:], np.ones(16))
