import numpy as np
import pytest

from depnet.likelihood import (ConcordanceCache, NodeConditional,
                               approx_log_lik, bayes_factor_log,
                               concordance_cache, concordance_stat,
                               log_lik_correlation, log_lik_independent)
from depnet.net_model import BlockParams, MembershipProbs, MultiNetwork

from oracles import (concordance_bruteforce, correlation_loglik_bruteforce,
                     marginal_loglik_bruteforce, random_instance,
                     total_loglik_bruteforce)


def _one_edge_net():
    y = np.zeros((1, 2, 2))
    y[0, 0, 1] = y[0, 1, 0] = 1.0
    return MultiNetwork(adjacency=y)


class TestMarginal:
    def test_single_edge_at_half(self):
        net = _one_edge_net()
        alpha = MembershipProbs(np.ones((2, 1)))
        params = BlockParams(beta=np.zeros((1, 1)), rho=np.zeros(1))
        assert log_lik_independent(net, alpha, params) == pytest.approx(np.log(0.5))

    def test_hard_labels_match_block_sum_oracle(self):
        rng = np.random.default_rng(0)
        net, _, params = random_instance(rng, n=5, m=2, k=2)
        labels = rng.integers(0, 2, size=5)
        a = np.zeros((5, 2))
        a[np.arange(5), labels] = 1.0
        alpha = MembershipProbs(a)
        got = log_lik_independent(net, alpha, params)
        want = marginal_loglik_bruteforce(net, a, params)
        assert got == pytest.approx(want, rel=1e-12)

    def test_soft_weights_match_bruteforce(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            net, alpha, params = random_instance(rng, n=3, m=1, k=2)
            got = log_lik_independent(net, alpha, params)
            want = marginal_loglik_bruteforce(net, alpha.alpha, params)
            assert got == pytest.approx(want, rel=1e-11)

    def test_uniform_alpha_is_permutation_symmetric(self):
        rng = np.random.default_rng(2)
        net, _, _ = random_instance(rng, n=6, m=2, k=2)
        alpha = MembershipProbs(np.full((6, 2), 0.5))
        params = BlockParams(beta=np.zeros((2, 2)), rho=np.zeros(2),
                             level=np.full((2, 2), 0.4))
        base = log_lik_independent(net, alpha, params)
        swapped = BlockParams(beta=np.zeros((2, 2)), rho=np.zeros(2),
                              level=np.full((2, 2), 0.4)[::-1, ::-1].copy())
        assert log_lik_independent(net, alpha, swapped) == pytest.approx(base, rel=1e-12)

    def test_dimension_mismatch_rejected(self):
        net = _one_edge_net()
        params = BlockParams(beta=np.zeros((1, 1)), rho=np.zeros(1))
        with pytest.raises(ValueError):
            log_lik_independent(net, MembershipProbs(np.ones((3, 1))), params)
        with pytest.raises(ValueError):
            log_lik_independent(net, MembershipProbs(np.ones((2, 1))),
                                BlockParams(beta=np.zeros((2, 2)), rho=np.zeros(2)))


class TestConcordance:
    def test_empty_community_is_zero(self):
        rng = np.random.default_rng(3)
        net, _, params = random_instance(rng, n=5, m=1, k=2)
        a = np.zeros((5, 2))
        a[:, 0] = 1.0  # community 1 gets zero weight everywhere
        alpha = MembershipProbs(a)
        assert concordance_stat(net, alpha, params, 0, 1) == 0.0

    def test_two_edge_identity(self):
        # with exactly two weighted edges, T^2 - Q = 2ab
        a, b = 0.7, -1.3
        cache = ConcordanceCache(t=np.array([[a + b]]), q2=np.array([[a * a + b * b]]),
                                 q4=np.array([[a ** 4 + b ** 4]]))
        assert cache.s()[0, 0] == pytest.approx(2 * a * b, rel=1e-12)

    def test_matches_quadruple_loop_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(4):
            net, alpha, params = random_instance(rng, n=5, m=2, k=2,
                                                 with_covariates=True)
            for m in range(net.n_samples):
                for k in range(params.k):
                    got = concordance_stat(net, alpha, params, m, k)
                    want = concordance_bruteforce(net, alpha.alpha, params, m, k)
                    assert got == pytest.approx(want, rel=1e-9, abs=1e-9)

    def test_index_validation(self):
        rng = np.random.default_rng(5)
        net, alpha, params = random_instance(rng, n=4, m=1, k=2)
        with pytest.raises(ValueError):
            concordance_stat(net, alpha, params, 1, 0)
        with pytest.raises(ValueError):
            concordance_stat(net, alpha, params, 0, 2)


class TestCorrelationTerm:
    def test_zero_rho_gives_zero(self):
        rng = np.random.default_rng(6)
        net, alpha, params = random_instance(rng, n=5, m=2, k=2)
        params = BlockParams(beta=params.beta, rho=np.zeros(2), level=params.level)
        assert log_lik_correlation(net, alpha, params, "2nd") == 0.0

    def test_negative_concordance_is_guarded_to_zero(self):
        """One edge in a 3-node clique pattern gives S = T^2 - Q < 0."""
        y = np.zeros((1, 3, 3))
        y[0, 0, 1] = y[0, 1, 0] = 1.0
        net = MultiNetwork(adjacency=y)
        alpha = MembershipProbs(np.ones((3, 1)))
        params = BlockParams(beta=np.zeros((1, 1)), rho=np.array([0.8]))
        assert concordance_stat(net, alpha, params, 0, 0) < 0
        assert log_lik_correlation(net, alpha, params, "2nd") == 0.0

    def test_matches_bruteforce_both_orders(self):
        rng = np.random.default_rng(7)
        for order in ("2nd", "4th"):
            net, alpha, params = random_instance(rng, n=5, m=2, k=1,
                                                 with_covariates=True)
            got = log_lik_correlation(net, alpha, params, order)
            want = correlation_loglik_bruteforce(net, alpha.alpha, params, order)
            assert got == pytest.approx(want, rel=1e-9)

    def test_single_community_formula(self):
        rng = np.random.default_rng(8)
        net, alpha, _ = random_instance(rng, n=5, m=2, k=1)
        params = BlockParams(beta=np.zeros((1, 1)), rho=np.array([0.6]))
        s = [concordance_stat(net, alpha, params, m, 0) for m in range(2)]
        want = np.mean([np.log(1 + 0.3 * max(v, 0.0)) for v in s])
        got = log_lik_correlation(net, alpha, params, "2nd")
        assert got == pytest.approx(want, rel=1e-12)

    def test_order_validation(self):
        rng = np.random.default_rng(9)
        net, alpha, params = random_instance(rng, n=4, m=1, k=1)
        with pytest.raises(ValueError):
            log_lik_correlation(net, alpha, params, "3rd")


class TestTotalObjective:
    def test_total_is_sum_and_dominates_marginal(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            net, alpha, params = random_instance(rng, n=6, m=2, k=2)
            parts = approx_log_lik(net, alpha, params, "2nd")
            assert parts.total == parts.marginal + parts.correlation
            assert parts.correlation >= 0.0
            assert parts.total >= parts.marginal

    def test_rho_zero_collapses_to_marginal(self):
        rng = np.random.default_rng(11)
        net, alpha, params = random_instance(rng, n=5, m=2, k=2)
        params = BlockParams(beta=params.beta, rho=np.zeros(2), level=params.level)
        parts = approx_log_lik(net, alpha, params, "4th")
        assert parts.total == parts.marginal

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(12)
        net, alpha, params = random_instance(rng, n=6, m=2, k=2)
        perm = np.array([1, 0])
        alpha_p = MembershipProbs(alpha.alpha[:, perm])
        params_p = BlockParams(beta=params.beta[np.ix_(perm, perm)],
                               rho=params.rho[perm],
                               level=params.level[np.ix_(perm, perm)])
        for order in ("2nd", "4th"):
            a = approx_log_lik(net, alpha, params, order)
            b = approx_log_lik(net, alpha_p, params_p, order)
            assert b.marginal == pytest.approx(a.marginal, rel=1e-12)
            assert b.correlation == pytest.approx(a.correlation, rel=1e-12)

    def test_ordering_around_true_partition(self):
        """With flat marginal means and correlated within-community edges, the
        total objective peaks at the true labels while the marginal part is
        constant across labelings."""
        from depnet.simulator import (CorrelationStructure, SimConfig,
                                      sample_networks)
        cfg = SimConfig(n_nodes=30, community_sizes=(15, 15), n_samples=20,
                        beta=np.zeros((2, 2)),
                        correlation=CorrelationStructure(kind="exchangeable", rho=0.6),
                        seed=5)
        net, truth = sample_networks(cfg)
        params = BlockParams(beta=np.zeros((2, 2)), rho=np.array([0.6, 0.6]))
        rng = np.random.default_rng(0)
        totals, marginals = [], []
        for flips in range(0, 9, 2):
            lab = truth.labels.copy()
            idx = rng.choice(30, flips, replace=False)
            lab[idx] = 1 - lab[idx]
            a = np.zeros((30, 2))
            a[np.arange(30), lab] = 1.0
            parts = approx_log_lik(net, MembershipProbs(a), params, "2nd")
            totals.append(parts.total)
            marginals.append(parts.marginal)
        assert np.argmax(totals) == 0
        assert np.ptp(marginals) < 1e-9  # flat: all block levels are 0.5


class TestBayesFactor:
    def test_same_community_is_exactly_zero(self):
        rng = np.random.default_rng(13)
        net, alpha, params = random_instance(rng, n=5, m=1, k=2)
        assert bayes_factor_log(net, alpha, params, 2, 1, 1) == 0.0

    def test_antisymmetry(self):
        rng = np.random.default_rng(14)
        net, alpha, params = random_instance(rng, n=6, m=2, k=3)
        for order in ("2nd", "4th"):
            ab = bayes_factor_log(net, alpha, params, 0, 1, 2, order)
            ba = bayes_factor_log(net, alpha, params, 0, 2, 1, order)
            assert ab == pytest.approx(-ba, rel=1e-12)

    def test_symmetric_node_is_indifferent(self):
        """Node 4 connects identically into two mirror-image communities."""
        y = np.zeros((1, 5, 5))
        for i, j in [(0, 1), (2, 3), (4, 0), (4, 1), (4, 2), (4, 3)]:
            y[0, i, j] = y[0, j, i] = 1.0
        net = MultiNetwork(adjacency=y)
        a = np.zeros((5, 2))
        a[[0, 1], 0] = 1.0
        a[[2, 3], 1] = 1.0
        a[4] = 0.5
        alpha = MembershipProbs(a)
        params = BlockParams(beta=np.zeros((2, 2)), rho=np.array([0.5, 0.5]),
                             level=np.full((2, 2), 0.5))
        assert abs(bayes_factor_log(net, alpha, params, 4, 0, 1)) < 1e-10

    def test_matches_full_recompute(self):
        rng = np.random.default_rng(15)
        for order in ("2nd", "4th"):
            for _ in range(4):
                net, alpha, params = random_instance(rng, n=6, m=2, k=2,
                                                     with_covariates=True)
                i, q, b = 3, 0, 1
                got = bayes_factor_log(net, alpha, params, i, q, b, order)
                forced = []
                for c in (q, b):
                    a = alpha.alpha.copy()
                    a[i] = 0.0
                    a[i, c] = 1.0
                    forced.append(total_loglik_bruteforce(net, a, params, order))
                want = forced[0] - forced[1]
                assert got == pytest.approx(want, rel=1e-8, abs=1e-10)

    def test_index_validation(self):
        rng = np.random.default_rng(16)
        net, alpha, params = random_instance(rng, n=4, m=1, k=2)
        with pytest.raises(ValueError):
            bayes_factor_log(net, alpha, params, 7, 0, 1)
        with pytest.raises(ValueError):
            bayes_factor_log(net, alpha, params, 0, 0, 5)


class TestNodeConditionalCaches:
    def test_incremental_updates_track_full_rebuild(self):
        rng = np.random.default_rng(17)
        net, alpha, params = random_instance(rng, n=7, m=2, k=2)
        ev = NodeConditional(net, alpha.alpha, params, order="4th")
        for i in range(7):
            row = rng.uniform(0.05, 1.0, size=2)
            ev.update_row(i, row / row.sum())
        fresh = NodeConditional(net, ev.alpha, params, order="4th")
        np.testing.assert_allclose(ev.t, fresh.t, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(ev.q2, fresh.q2, rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(ev.q4, fresh.q4, rtol=1e-9, atol=1e-12)

    def test_concordance_cache_matches_stat(self):
        rng = np.random.default_rng(18)
        net, alpha, params = random_instance(rng, n=6, m=3, k=2)
        cache = concordance_cache(net, alpha, params)
        for m in range(3):
            for k in range(2):
                assert cache.s()[m, k] == pytest.approx(
                    concordance_stat(net, alpha, params, m, k), rel=1e-12)
