"""Preset experiment harness: simulate, fit every method, aggregate tables.

Replicates follow a controlled protocol: every method in a cell sees the same
simulated networks and the same fixed initial memberships. The initial
memberships are built by misassigning a fixed number of nodes from the
planted truth, which pins the starting agreement into a mediocre band;
methods must climb (or fail to climb) from identical starting points, so
differences are attributable to the objective, not the start.

Replicates can run in parallel processes; per-replicate seeds derive from the
preset seed alone, so results are identical for any DEPNET_THREADS setting.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from itertools import permutations

import numpy as np

from .estimator import EstimationError, FitConfig, fit
from .net_model import HardMembership, adjusted_rand_index
from .simulator import CorrelationStructure, SimConfig, sample_networks
from .spectral import init_alpha

METHOD_ORDERS = {"vem": "none", "bahadur2": "2nd", "bahadur4": "4th"}

WEAK_BETA = ((1.0, 0.0), (0.0, 1.5))
STRONG_BETA = ((0.3, 0.2), (0.2, 0.6))
WEAK_RANGES = ((-0.2, 0.2), (-0.2, 0.2))
STRONG_RANGES = ((0.9, 1.1), (-0.8, -0.6))
SIZES = {"balanced": (20, 20), "unbalanced": (10, 30)}


@dataclass(frozen=True)
class Cell:
    """One grid point of an experiment."""

    balance: str
    m: int
    rho: float = 0.0
    sigma: float = 0.0
    lam: float = None
    signal: str = "weak"

    def label(self) -> str:
        parts = [self.signal, self.balance, f"M={self.m}", f"rho={self.rho:g}"]
        if self.sigma:
            parts.append(f"sigma={self.sigma:g}")
        if self.lam is not None:
            parts.append(f"lambda={self.lam:g}")
        return " ".join(parts)


@dataclass(frozen=True)
class ExperimentPreset:
    """A named grid of cells plus the shared fitting protocol."""

    name: str
    cells: tuple
    methods: tuple = ("vem", "bahadur2", "bahadur4")
    n_replicates: int = 10
    seed: int = 0
    n_nodes: int = 40
    init_misassignments: int = 9
    n_inits: int = 5
    epsilon: float = 1e-4
    max_iters: int = 200

    def __post_init__(self):
        if not self.cells:
            raise ValueError("preset grid must be nonempty")
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be >= 1")
        for m in self.methods:
            if m not in METHOD_ORDERS:
                raise ValueError(f"unknown method {m!r}")


def _grid(signal, balances, ms, rhos, sigmas=(0.0,), lams=(None,)):
    return tuple(Cell(balance=b, m=m, rho=r, sigma=s, lam=lam, signal=signal)
                 for b in balances for r in rhos for s in sigmas
                 for lam in lams for m in ms)


def preset(name, **overrides) -> ExperimentPreset:
    """Named presets mirroring the simulation studies at desk scale."""
    if name in ("table1-weak", "tables6-8-params"):
        cells = _grid("weak", ("unbalanced", "balanced"), (20, 40, 60),
                      (0.0, 0.3, 0.6))
    elif name == "table2-strong":
        cells = _grid("strong", ("unbalanced", "balanced"), (20, 40, 60),
                      (0.0, 0.3, 0.6))
    elif name == "study2-misspec":
        cells = _grid("weak", ("balanced", "unbalanced"), (20, 40, 60),
                      (0.3, 0.6), sigmas=(0.5, 1.5))
    elif name == "fig2-lambda-sweep":
        cells = _grid("weak", ("balanced",), (40,), (0.6,),
                      lams=(0.01, 0.05, 0.1, 0.3, 1.0))
    elif name == "smoke":
        # one fast strong-signal cell; meant for pipeline checks, not results
        cells = _grid("strong", ("balanced",), (6,), (0.3,))
        overrides.setdefault("n_replicates", 2)
        overrides.setdefault("max_iters", 25)
    else:
        raise ValueError(f"unknown preset {name!r}")
    return ExperimentPreset(name=name, cells=cells, **overrides)


@dataclass(frozen=True)
class ExperimentReport:
    """Aggregated rows (one per cell-method) plus raw per-replicate records."""

    preset_name: str
    n_replicates: int
    rows: tuple
    records: tuple

    def __post_init__(self):
        for row in self.rows:
            if row["n_ok"] and not -1.0 <= row["mean_ari"] <= 1.0:
                raise ValueError("mean ARI outside [-1, 1]")

    def row(self, method, **cell_fields):
        """The aggregate row for a method at the cell matching the fields."""
        for row in self.rows:
            if row["method"] != method:
                continue
            if all(row[k] == v for k, v in cell_fields.items()):
                return row
        raise KeyError(f"no row for {method} at {cell_fields}")

    def write_csv(self, path):
        beta_keys = ["beta_00", "beta_01", "beta_11"]
        cols = ["cell", "signal", "balance", "m", "rho", "sigma", "lam",
                "method", "n_ok", "unreliable", "mean_ari", "sd_ari"]
        cols += [f"mean_{k}" for k in beta_keys] + [f"sd_{k}" for k in beta_keys]
        cols += ["mean_rho_0", "mean_rho_1", "mean_iterations", "mean_runtime"]
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for row in self.rows:
                vals = []
                for c in cols:
                    v = row.get(c, "")
                    if v is None:
                        vals.append("")
                    elif isinstance(v, float):
                        vals.append(format(v, ".9g"))
                    else:
                        vals.append(str(v))
                fh.write(",".join(vals) + "\n")

    def format_table(self) -> str:
        """Plain-text summary: one block per (signal, balance, sigma, lambda),
        methods by rows, sample counts by columns."""
        groups = {}
        for row in self.rows:
            key = (row["signal"], row["balance"], row["sigma"], row["lam"])
            groups.setdefault(key, []).append(row)
        lines = [f"preset: {self.preset_name} "
                 f"(mean ARI over {self.n_replicates} replicates)"]
        for key in sorted(groups, key=str):
            signal, balance, sigma, lam = key
            header = f"[{signal} signal, {balance}"
            if sigma:
                header += f", sigma={sigma:g}"
            if lam is not None:
                header += f", lambda={lam:g}"
            header += "]"
            lines.append(header)
            rows = groups[key]
            ms = sorted({r["m"] for r in rows})
            lines.append("  rho    method    " + "".join(f"M={m:<7}" for m in ms))
            for rho in sorted({r["rho"] for r in rows}):
                for method in dict.fromkeys(r["method"] for r in rows):
                    cells = [r for r in rows
                             if r["rho"] == rho and r["method"] == method]
                    by_m = {r["m"]: r for r in cells}
                    vals = "".join(
                        f"{by_m[m]['mean_ari']:<9.2f}" if m in by_m and by_m[m]["n_ok"]
                        else "   --    " for m in ms)
                    flag = "*" if any(r["unreliable"] for r in cells) else " "
                    lines.append(f"  {rho:<6g} {method:<9}{flag}{vals}")
        return "\n".join(lines) + "\n"


def _sim_config(preset_, cell_idx, rep) -> SimConfig:
    cell = preset_.cells[cell_idx]
    sizes = SIZES[cell.balance]
    beta = np.array(WEAK_BETA if cell.signal == "weak" else STRONG_BETA)
    within, between = WEAK_RANGES if cell.signal == "weak" else STRONG_RANGES
    if cell.lam is not None:
        corr = CorrelationStructure(kind="grouped", rho=cell.rho, lam=cell.lam)
    elif cell.rho > 0:
        corr = CorrelationStructure(kind="exchangeable", rho=cell.rho)
    else:
        corr = CorrelationStructure()
    seed = int(np.random.SeedSequence(
        (preset_.seed, 17, cell_idx, rep)).generate_state(1)[0])
    return SimConfig(n_nodes=preset_.n_nodes, community_sizes=sizes,
                     n_samples=cell.m, beta=beta, covariate_within=within,
                     covariate_between=between, correlation=corr,
                     random_effect_sd=cell.sigma, seed=seed)


def _fixed_initializations(truth: HardMembership, preset_, cell_idx, rep):
    """Shared mediocre starts: flip a fixed number of labels away from truth."""
    k = truth.k
    inits = []
    for i in range(preset_.n_inits):
        rng = np.random.default_rng(np.random.SeedSequence(
            (preset_.seed, 29, cell_idx, rep, i)))
        labels = truth.labels.copy()
        idx = rng.choice(labels.size, preset_.init_misassignments, replace=False)
        shift = 1 + rng.integers(0, k - 1, size=idx.size) if k > 2 else np.ones(idx.size, dtype=int)
        labels[idx] = (labels[idx] + shift) % k
        inits.append(init_alpha(HardMembership(labels, k), k, 0.1))
    return inits


def _align_to_truth(labels: HardMembership, truth: HardMembership):
    """Permutation of estimated communities maximizing label agreement."""
    k = truth.k
    best, best_hits = None, -1
    for perm in permutations(range(k)):
        mapped = np.asarray(perm)[labels.labels]
        hits = int(np.sum(mapped == truth.labels))
        if hits > best_hits:
            best, best_hits = perm, hits
    return np.asarray(best)


def _run_task(args):
    preset_, cell_idx, rep = args
    cell = preset_.cells[cell_idx]
    sim = _sim_config(preset_, cell_idx, rep)
    net, truth = sample_networks(sim)
    inits = _fixed_initializations(truth, preset_, cell_idx, rep)
    k = truth.k
    out = []
    for method in preset_.methods:
        fit_seed = int(np.random.SeedSequence(
            (preset_.seed, 43, cell_idx, rep)).generate_state(1)[0])
        cfg = FitConfig(k=k, order=METHOD_ORDERS[method], seed=fit_seed,
                        epsilon=preset_.epsilon, max_iters=preset_.max_iters,
                        n_inits=preset_.n_inits)
        record = {"cell": cell.label(), "cell_idx": cell_idx, "rep": rep,
                  "method": method, "signal": cell.signal,
                  "balance": cell.balance, "m": cell.m, "rho": cell.rho,
                  "sigma": cell.sigma, "lam": cell.lam}
        start = time.perf_counter()
        try:
            res = fit(net, cfg, init_alphas=inits)
        except EstimationError as err:
            record.update(error=str(err))
            out.append(record)
            continue
        perm = _align_to_truth(res.labels, truth)
        inv = np.argsort(perm)
        beta = res.params.beta[np.ix_(inv, inv)]
        rho = res.params.rho[inv]
        record.update(
            error=None,
            ari=adjusted_rand_index(res.labels, truth),
            beta=beta.tolist(),
            rho=rho.tolist(),
            iterations=res.iterations,
            converged=res.converged,
            runtime=time.perf_counter() - start,
        )
        out.append(record)
    return out


def _aggregate(preset_, records):
    rows = []
    for cell_idx, cell in enumerate(preset_.cells):
        for method in preset_.methods:
            recs = [r for r in records
                    if r["cell_idx"] == cell_idx and r["method"] == method]
            ok = [r for r in recs if r["error"] is None]
            row = {"cell": cell.label(), "signal": cell.signal,
                   "balance": cell.balance, "m": cell.m, "rho": cell.rho,
                   "sigma": cell.sigma, "lam": cell.lam, "method": method,
                   "n_ok": len(ok), "n_failed": len(recs) - len(ok),
                   "unreliable": (len(recs) - len(ok)) * 2 > len(recs)}
            if ok:
                aris = np.array([r["ari"] for r in ok])
                betas = np.array([r["beta"] for r in ok])
                rhos = np.array([r["rho"] for r in ok])
                row.update(
                    mean_ari=float(aris.mean()), sd_ari=float(aris.std(ddof=0)),
                    mean_beta_00=float(betas[:, 0, 0].mean()),
                    mean_beta_01=float(betas[:, 0, 1].mean()),
                    mean_beta_11=float(betas[:, 1, 1].mean()),
                    sd_beta_00=float(betas[:, 0, 0].std(ddof=0)),
                    sd_beta_01=float(betas[:, 0, 1].std(ddof=0)),
                    sd_beta_11=float(betas[:, 1, 1].std(ddof=0)),
                    mean_rho_0=float(rhos[:, 0].mean()),
                    mean_rho_1=float(rhos[:, 1].mean()) if rhos.shape[1] > 1 else 0.0,
                    mean_iterations=float(np.mean([r["iterations"] for r in ok])),
                    mean_runtime=float(np.mean([r["runtime"] for r in ok])),
                )
            rows.append(row)
    return rows


def worker_count() -> int:
    """Worker cap from DEPNET_THREADS (default 1 = sequential)."""
    try:
        return max(1, int(os.environ.get("DEPNET_THREADS", "1")))
    except ValueError:
        return 1


def run_preset(preset_: ExperimentPreset) -> ExperimentReport:
    """All cells, all replicates, all methods; deterministic given the seed
    regardless of the worker count."""
    tasks = [(preset_, c, rep) for c in range(len(preset_.cells))
             for rep in range(preset_.n_replicates)]
    threads = worker_count()
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(_run_task, tasks))
    else:
        chunks = [_run_task(t) for t in tasks]
    records = [rec for chunk in chunks for rec in chunk]
    rows = _aggregate(preset_, records)
    return ExperimentReport(preset_name=preset_.name,
                            n_replicates=preset_.n_replicates,
                            rows=tuple(rows), records=tuple(records))


def run_lambda_sweep(lam_grid, n_replicates=10, methods=("vem", "bahadur2"),
                     seed=0, **overrides) -> ExperimentReport:
    """Grouped-correlation density sweep at the fixed weak-signal regime
    (rho = 0.6, N = 40, M = 40, balanced)."""
    for lam in lam_grid:
        if not 0.0 < lam <= 1.0:
            raise ValueError("lambda grid must lie in (0, 1]")
    cells = _grid("weak", ("balanced",), (40,), (0.6,), lams=tuple(lam_grid))
    p = ExperimentPreset(name="fig2-lambda-sweep", cells=cells, methods=tuple(methods),
                         n_replicates=n_replicates, seed=seed, **overrides)
    return run_preset(p)
