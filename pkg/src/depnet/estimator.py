"""Iterative maximization of the dependence-aware objective.

One iteration updates, in order: the block logistic coefficients (weighted
Bernoulli likelihood, independence working correlation by default), the
per-community concordance correlations (method of moments), and then every
node's membership row through log Bayes factors against the current best
community. Dropping the concordance term ("none" order) recovers the plain
variational EM loop, and ``fit_vem`` is exactly that special case.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .likelihood import NodeConditional, concordance_cache
from .net_model import (BlockParams, HardMembership, MembershipProbs,
                        MultiNetwork, block_mean)
from .spectral import init_alpha, spectral_cluster

BETA_BOUND = 12.0
_WEIGHT_EPS = 1e-8

ORDERS = ("2nd", "4th", "none")
SCHEDULES = ("gauss-seidel", "jacobi")
WORKING = ("independence", "exchangeable")


class DegenerateBlockError(RuntimeError):
    """A block carries (numerically) no membership weight."""


class EstimationError(RuntimeError):
    """No restart produced a usable fit."""


@dataclass(frozen=True)
class FitConfig:
    """Settings for one fit; ``order="none"`` runs the marginal-only loop."""

    k: int
    order: str = "2nd"
    epsilon: float = 1e-4
    max_iters: int = 200
    seed: int = 0
    n_inits: int = 5
    update_schedule: str = "gauss-seidel"
    gee_working: str = "independence"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.n_inits < 1:
            raise ValueError("n_inits must be >= 1")
        if self.order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")
        if self.update_schedule not in SCHEDULES:
            raise ValueError(f"update_schedule must be one of {SCHEDULES}")
        if self.gee_working not in WORKING:
            raise ValueError(f"gee_working must be one of {WORKING}")


@dataclass(frozen=True)
class FitResult:
    """Converged (or truncated) state of one fit."""

    alpha: MembershipProbs
    labels: HardMembership
    params: BlockParams
    trace: tuple          # (total objective, max membership change) per iteration
    iterations: int
    converged: bool
    init_index: int
    init_loglik: float
    events: tuple = ()

    @property
    def final_loglik(self) -> float:
        return self.trace[-1][0]


def _block_weight(alpha: np.ndarray, q: int, l: int) -> np.ndarray:
    """Pair weights for block (q, l) over unordered pairs, zero diagonal."""
    if q == l:
        w = np.outer(alpha[:, q], alpha[:, q])
    else:
        w = np.outer(alpha[:, q], alpha[:, l]) + np.outer(alpha[:, l], alpha[:, q])
    np.fill_diagonal(w, 0.0)
    return w


class _FlatPairs:
    """Upper-triangle views of a network stack: x, y as (M, P) and the pair
    weight vector machinery, so scalar-coefficient fits touch each unordered
    pair exactly once."""

    def __init__(self, net: MultiNetwork):
        iu = np.triu_indices(net.n_nodes, k=1)
        self.iu = iu
        self.n_samples = net.n_samples
        self.x = np.ascontiguousarray(net.covariates[:, iu[0], iu[1]])
        self.y = np.ascontiguousarray(net.adjacency[:, iu[0], iu[1]])
        self.y_count = self.y.sum(axis=0)
        self.all_ones = bool(np.all(self.x == 1.0))

    def block_weight(self, alpha, q, l):
        return _block_weight(alpha, q, l)[self.iu]


def _beta_objective(beta, x, y, w):
    t = beta * x
    # w * (y*t - log(1 + exp(t))), stable for large |t|
    return float(((y * t - (np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t))))) @ w).sum())


def _newton_beta(x, y, w, beta0=0.0, rho=0.0, pair_weight=None):
    """Damped Newton / Fisher scoring for the scalar block coefficient.

    ``x``, ``y`` are (M, P) upper-triangle views; ``w`` is the (P,) pair
    weight vector. ``rho > 0`` switches the score to the exchangeable
    working-correlation form, mixing residuals within each sample network;
    the weights then enter as square roots on both sides so rho = 0
    reproduces the plain weighted score.
    """
    beta = float(np.clip(beta0, -BETA_BOUND, BETA_BOUND))
    sqw = np.sqrt(w) if rho > 0.0 else None
    w_scale = max(1.0, float(np.sum(w)))
    for _ in range(60):
        mu = block_mean(beta, x)
        if rho > 0.0:
            sd = np.sqrt(mu * (1.0 - mu))
            d = sqw * x * sd
            r = sqw * (y - mu) / sd
            e_eff = max(2.0, float(pair_weight))
            shrink = rho / (1.0 + (e_eff - 1.0) * rho)
            d_sum = d.sum(axis=1)
            r_sum = r.sum(axis=1)
            grad = float((np.sum(d * r, axis=1) - shrink * d_sum * r_sum).sum()
                         / (1.0 - rho))
            curv = float((np.sum(d * d, axis=1) - shrink * d_sum ** 2).sum()
                         / (1.0 - rho))
        else:
            grad = float(((x * (y - mu)).sum(axis=0) * w).sum())
            curv = float(((x * x * mu * (1.0 - mu)).sum(axis=0) * w).sum())
        if curv <= 0.0 or not np.isfinite(grad):
            break
        step = grad / curv
        if abs(step) < 1e-12:
            break
        if abs(step) <= 1.0:
            beta = float(np.clip(beta + step, -BETA_BOUND, BETA_BOUND))
        else:
            base = _beta_objective(beta, x, y, w)
            new_beta = beta
            for _ in range(30):
                cand = float(np.clip(beta + step, -BETA_BOUND, BETA_BOUND))
                if _beta_objective(cand, x, y, w) >= base - 1e-12:
                    new_beta = cand
                    break
                step *= 0.5
            if new_beta == beta:
                break
            beta = new_beta
        if abs(grad) < 1e-10 * w_scale:
            break
    return beta


def _fit_block_beta_flat(flat: _FlatPairs, alpha: np.ndarray, q: int, l: int,
                         prev_beta=0.0, working="independence", rho=0.0):
    """Returns (beta, x_bar, clamped) for block (q, l)."""
    w = flat.block_weight(alpha, q, l)
    pair_weight = float(w.sum())
    if pair_weight < _WEIGHT_EPS:
        raise DegenerateBlockError(f"block ({q}, {l}) carries no weight")
    wmean = float(flat.y_count @ w) / (pair_weight * flat.n_samples)
    x_bar = float(flat.x.sum(axis=0) @ w) / (pair_weight * flat.n_samples)
    if wmean <= 0.0 or wmean >= 1.0:
        beta = BETA_BOUND if wmean >= 1.0 else -BETA_BOUND
        return beta, x_bar, True
    if flat.all_ones and (working == "independence" or q != l or rho == 0.0):
        beta = float(np.log(wmean / (1.0 - wmean)))
        clamped = abs(beta) >= BETA_BOUND
        return float(np.clip(beta, -BETA_BOUND, BETA_BOUND)), x_bar, clamped
    use_rho = rho if (working == "exchangeable" and q == l) else 0.0
    beta = _newton_beta(flat.x, flat.y, w, beta0=prev_beta, rho=use_rho,
                        pair_weight=pair_weight)
    return beta, x_bar, abs(beta) >= BETA_BOUND - 1e-9


def m_step_beta(net: MultiNetwork, alpha: MembershipProbs, q: int, l: int,
                working="independence", rho=0.0) -> float:
    """Maximize the weighted Bernoulli log-likelihood of block (q, l) in its
    scalar coefficient. With all-ones covariates this is the logit of the
    weighted edge mean. Raises DegenerateBlockError when the block carries no
    weight; warns and clamps to +-12 when the weighted mean saturates."""
    beta, _, clamped = _fit_block_beta_flat(_FlatPairs(net), alpha.alpha, q, l,
                                            working=working, rho=rho)
    if clamped:
        warnings.warn(f"block ({q}, {l}) coefficient clamped to {beta:+g}",
                      RuntimeWarning, stacklevel=2)
    return beta


def _moment_rho(net: MultiNetwork, alpha: np.ndarray, params: BlockParams, k: int):
    """Returns (rho, degenerate) for community k."""
    probs = MembershipProbs(alpha)
    cache = concordance_cache(net, probs, params)
    num = float(cache.s()[:, k].sum())
    w = np.outer(alpha[:, k], alpha[:, k])
    np.fill_diagonal(w, 0.0)
    tw = 0.5 * w.sum()
    qw = 0.5 * (w ** 2).sum()
    den = net.n_samples * (tw ** 2 - qw)
    if den < _WEIGHT_EPS:
        return 0.0, True
    return float(np.clip(num / den, 0.0, 1.0)), False


def m_step_rho(net: MultiNetwork, alpha: MembershipProbs, params: BlockParams,
               k: int) -> float:
    """Method-of-moments within-community correlation: the ratio of the
    weighted concordance sum to the total pair weight, clamped to [0, 1].
    Returns 0 (with a warning) when the pair weight is degenerate."""
    if not 0 <= k < params.k:
        raise ValueError(f"community index {k} out of range")
    rho, degenerate = _moment_rho(net, alpha.alpha, params, k)
    if degenerate:
        warnings.warn(f"community {k} has no pair weight; correlation set to 0",
                      RuntimeWarning, stacklevel=2)
    return rho


def _posterior_row(prior_row, scores):
    delta = scores - scores.max()
    unnorm = prior_row * np.exp(delta)
    total = unnorm.sum()
    if total <= 0.0 or not np.isfinite(total):
        return prior_row.copy(), True
    return unnorm / total, False


def _sweep(evaluator: NodeConditional, schedule: str):
    """One membership sweep on an existing evaluator: each row becomes its
    prior times the exponentiated log Bayes factor against the node's best
    community. Leaves the evaluator's state (rows and cached sums) current;
    returns the events raised."""
    n = evaluator.alpha.shape[0]
    events = []
    if schedule == "jacobi":
        scores = [evaluator.forced_scores(i) for i in range(n)]
        for i in range(n):
            row, collapsed = _posterior_row(evaluator.alpha[i], scores[i])
            if collapsed:
                events.append(f"node {i}: membership row underflow, kept previous")
            evaluator.alpha[i] = row
        if evaluator.order != "none":
            evaluator.rebuild_caches()
        return events
    # gauss-seidel: nodes see already-updated rows within the sweep
    for i in range(n):
        row, collapsed = _posterior_row(evaluator.alpha[i],
                                        evaluator.forced_scores(i))
        if collapsed:
            events.append(f"node {i}: membership row underflow, kept previous")
        evaluator.update_row(i, row)
    return events


def e_step(net: MultiNetwork, alpha_prev: MembershipProbs, params: BlockParams,
           cfg: FitConfig) -> MembershipProbs:
    """Update every membership row: prior row times the exponentiated log
    Bayes factor against the node's best community, renormalized."""
    evaluator = NodeConditional(net, alpha_prev.alpha, params, order=cfg.order)
    _sweep(evaluator, cfg.update_schedule)
    return MembershipProbs(evaluator.alpha.copy())


def _fit_single(net: MultiNetwork, alpha0: np.ndarray, cfg: FitConfig,
                flat: _FlatPairs = None):
    """One restart of the alternating loop.

    Each iteration refits every block's coefficient, sets the block level to
    the model-implied mean rate block_mean(beta, x_bar) at the block's average
    covariate, refreshes the moment correlations, and sweeps the memberships.
    """
    k = cfg.k
    if flat is None:
        flat = _FlatPairs(net)
    alpha = alpha0.copy()
    beta = np.zeros((k, k))
    rho = np.zeros(k)
    level = np.full((k, k), 0.5)
    events = []
    trace = []
    init_loglik = None
    converged = False
    iterations = 0
    for s in range(1, cfg.max_iters + 1):
        for q in range(k):
            for l in range(q, k):
                try:
                    b, x_bar, clamped = _fit_block_beta_flat(
                        flat, alpha, q, l, prev_beta=beta[q, l],
                        working=cfg.gee_working, rho=rho[q] if q == l else 0.0)
                    beta[q, l] = beta[l, q] = b
                    level[q, l] = level[l, q] = block_mean(b, x_bar)
                    if clamped:
                        events.append(f"iter {s}: block ({q},{l}) clamped at {b:+g}")
                except DegenerateBlockError:
                    events.append(f"iter {s}: block ({q},{l}) degenerate, kept previous")
        params = BlockParams(beta=beta.copy(), rho=rho.copy(), level=level.copy())
        evaluator = NodeConditional(net, alpha, params, order=cfg.order)
        if cfg.order != "none":
            raw, den = evaluator.rho_moments()
            for q in range(k):
                if den[q] < _WEIGHT_EPS:
                    rho[q] = 0.0
                    events.append(f"iter {s}: community {q} pair weight degenerate")
                else:
                    rho[q] = float(np.clip(raw[q], 0.0, 1.0))
            evaluator.rho = rho.copy()
        if init_loglik is None:
            init_loglik = evaluator.objective()
        step_events = _sweep(evaluator, cfg.update_schedule)
        events.extend(f"iter {s}: {e}" for e in step_events)
        new_alpha = evaluator.alpha
        max_change = float(np.abs(new_alpha - alpha).max())
        alpha = new_alpha.copy()
        trace.append((evaluator.objective(), max_change))
        iterations = s
        if max_change < cfg.epsilon:
            converged = True
            break
    params = BlockParams(beta=beta.copy(), rho=rho.copy(), level=level.copy())
    labels = HardMembership(np.argmax(alpha, axis=1), k)
    for q in labels.empty_communities:
        events.append(f"final labels leave community {q} empty")
    return {
        "alpha": alpha,
        "labels": labels,
        "params": params,
        "trace": tuple(trace),
        "iterations": iterations,
        "converged": converged,
        "init_loglik": init_loglik,
        "events": tuple(events),
    }


def default_initializations(net: MultiNetwork, cfg: FitConfig):
    """Spectral clusterings of evenly spaced individual sample networks,
    softened into membership rows."""
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_inits)
    smoothing = min(0.1, 0.5 / cfg.k)
    inits = []
    for r in range(cfg.n_inits):
        m = (r * net.n_samples) // cfg.n_inits
        seed = int(children[r].generate_state(1)[0])
        labels = spectral_cluster(net.adjacency[m], cfg.k, seed=seed)
        inits.append(init_alpha(labels, cfg.k, smoothing))
    return inits


def fit(net: MultiNetwork, cfg: FitConfig, init_alphas=None) -> FitResult:
    """Run the full loop from several initializations and keep the restart
    with the highest final objective. Deterministic given the seed."""
    if cfg.k > net.n_nodes:
        raise ValueError("k cannot exceed the number of nodes")
    if init_alphas is None:
        init_alphas = default_initializations(net, cfg)
    flat = _FlatPairs(net)
    candidates = []
    failures = []
    for r, a0 in enumerate(init_alphas):
        arr = a0.alpha if isinstance(a0, MembershipProbs) else np.asarray(a0, float)
        if arr.shape != (net.n_nodes, cfg.k):
            raise ValueError("initialization has the wrong shape")
        try:
            cand = _fit_single(net, arr, cfg, flat=flat)
        except (DegenerateBlockError, FloatingPointError) as err:
            failures.append(f"restart {r}: {err}")
            continue
        if not np.isfinite(cand["trace"][-1][0]):
            failures.append(f"restart {r}: non-finite objective")
            continue
        candidates.append((r, cand))
    if not candidates:
        raise EstimationError("all restarts degenerate: " + "; ".join(failures))
    best_r, best = max(candidates, key=lambda rc: (rc[1]["trace"][-1][0], -rc[0]))
    return FitResult(
        alpha=MembershipProbs(best["alpha"]),
        labels=best["labels"],
        params=best["params"],
        trace=best["trace"],
        iterations=best["iterations"],
        converged=best["converged"],
        init_index=best_r,
        init_loglik=best["init_loglik"],
        events=best["events"],
    )


def fit_vem(net: MultiNetwork, cfg: FitConfig, init_alphas=None) -> FitResult:
    """Marginal-only special case: identical to ``fit`` with order "none"."""
    return fit(net, replace(cfg, order="none"), init_alphas=init_alphas)
