"""Command-line surface: simulate, fit, eval, bench, ingest.

File formats are plain text for diffability. Edge lists carry a header line
``nodes=N samples=M`` followed by one ``m i j`` line per edge (0-based,
undirected, canonical i < j ordering, sorted); covariate files use the same
header with ``m i j x`` lines. Matrices are written as CSV with 9 significant
digits. All commands honor --seed and are bit-reproducible.

Exit codes: 0 success, 1 usage or parse error, 2 fit hit the iteration cap
without converging (results still written), 3 nothing left after filtering.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import METHOD_ORDERS, preset, run_preset
from .estimator import FitConfig, fit
from .net_model import HardMembership, MultiNetwork, adjusted_rand_index
from .simulator import CorrelationStructure, SimConfig, sample_networks
from .spectral import ConsensusError, consensus_k


class CliError(Exception):
    def __init__(self, message, code=1):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"usage error: {message}", code=1)


# ---------------------------------------------------------------- file formats

def _parse_header(line, path):
    parts = line.split()
    try:
        keys = dict(p.split("=", 1) for p in parts)
        return int(keys["nodes"]), int(keys["samples"])
    except (ValueError, KeyError):
        raise CliError(f"{path}:1: expected header 'nodes=N samples=M', got {line!r}")


def read_edge_list(path):
    """Returns (adjacency stack (M, N, N), n, m)."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as err:
        raise CliError(f"cannot read {path}: {err}")
    if not lines:
        raise CliError(f"{path}:1: empty file")
    n, m = _parse_header(lines[0], path)
    adj = np.zeros((m, n, n))
    seen = set()
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise CliError(f"{path}:{ln}: expected 'm i j', got {line!r}")
        try:
            s, i, j = (int(p) for p in parts)
        except ValueError:
            raise CliError(f"{path}:{ln}: non-integer index in {line!r}")
        if not (0 <= s < m and 0 <= i < n and 0 <= j < n):
            raise CliError(f"{path}:{ln}: index out of range")
        if i == j:
            raise CliError(f"{path}:{ln}: self-loop not allowed")
        key = (s, min(i, j), max(i, j))
        if key in seen:
            raise CliError(f"{path}:{ln}: duplicate edge {key}")
        seen.add(key)
        adj[s, i, j] = adj[s, j, i] = 1.0
    return adj, n, m


def write_edge_list(path, adjacency):
    m, n, _ = adjacency.shape
    lines = [f"nodes={n} samples={m}"]
    for s in range(m):
        ii, jj = np.nonzero(np.triu(adjacency[s], k=1))
        for i, j in zip(ii, jj):
            lines.append(f"{s} {i} {j}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_covariates(path, n, m):
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines:
        raise CliError(f"{path}:1: empty file")
    cn, cm = _parse_header(lines[0], path)
    if (cn, cm) != (n, m):
        raise CliError(f"{path}:1: covariate header disagrees with edge list")
    cov = np.ones((m, n, n))
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 4:
            raise CliError(f"{path}:{ln}: expected 'm i j x', got {line!r}")
        try:
            s, i, j = int(parts[0]), int(parts[1]), int(parts[2])
            x = float(parts[3])
        except ValueError:
            raise CliError(f"{path}:{ln}: malformed covariate line {line!r}")
        if not (0 <= s < m and 0 <= i < n and 0 <= j < n) or i == j:
            raise CliError(f"{path}:{ln}: index out of range")
        cov[s, i, j] = cov[s, j, i] = x
    return cov


def write_covariates(path, covariates):
    m, n, _ = covariates.shape
    lines = [f"nodes={n} samples={m}"]
    for s in range(m):
        for i in range(n):
            for j in range(i + 1, n):
                lines.append(f"{s} {i} {j} {format(covariates[s, i, j], '.17g')}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_labels(path):
    try:
        vals = [int(v) for v in Path(path).read_text().split()]
    except (OSError, ValueError) as err:
        raise CliError(f"cannot parse labels from {path}: {err}")
    return np.array(vals, dtype=int)


def write_labels(path, labels):
    Path(path).write_text("\n".join(str(int(v)) for v in labels) + "\n")


def _write_matrix_csv(path, mat):
    with open(path, "w") as fh:
        for row in np.atleast_2d(mat):
            fh.write(",".join(format(v, ".9g") for v in row) + "\n")


# ------------------------------------------------------------------ run configs

_SIM_KEYS = {"n_nodes", "community_sizes", "n_samples", "beta",
             "covariate_within", "covariate_between", "correlation",
             "random_effect_sd", "n_groups", "seed"}
_CORR_KEYS = {"kind", "rho", "lambda"}
_FIT_KEYS = {"k", "order", "epsilon", "max_iters", "seed", "n_inits",
             "update_schedule", "gee_working"}


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except OSError as err:
        raise CliError(f"cannot read {path}: {err}")
    except json.JSONDecodeError as err:
        raise CliError(f"{path}:{err.lineno}: {err.msg}")


def load_sim_config(path, seed_override=None) -> SimConfig:
    raw = _load_json(path)
    if not isinstance(raw, dict):
        raise CliError(f"{path}: config must be a JSON object")
    unknown = set(raw) - _SIM_KEYS
    if unknown:
        raise CliError(f"{path}: unknown config key {sorted(unknown)[0]!r}")
    corr_raw = raw.pop("correlation", {"kind": "independent"})
    if not isinstance(corr_raw, dict):
        raise CliError(f"{path}: 'correlation' must be an object")
    unknown = set(corr_raw) - _CORR_KEYS
    if unknown:
        raise CliError(f"{path}: unknown correlation key {sorted(unknown)[0]!r}")
    corr = CorrelationStructure(kind=corr_raw.get("kind", "independent"),
                                rho=corr_raw.get("rho", 0.0),
                                lam=corr_raw.get("lambda", 1.0))
    kwargs = dict(raw)
    kwargs["correlation"] = corr
    if "beta" in kwargs:
        kwargs["beta"] = np.asarray(kwargs["beta"], dtype=float)
    for key in ("community_sizes", "covariate_within", "covariate_between"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    if seed_override is not None:
        kwargs["seed"] = seed_override
    try:
        return SimConfig(**kwargs)
    except (TypeError, ValueError) as err:
        raise CliError(f"{path}: invalid simulate config: {err}")


def load_fit_config(path, overrides) -> FitConfig:
    raw = _load_json(path) if path else {}
    if not isinstance(raw, dict):
        raise CliError(f"{path}: config must be a JSON object")
    unknown = set(raw) - _FIT_KEYS
    if unknown:
        raise CliError(f"{path}: unknown config key {sorted(unknown)[0]!r}")
    raw.update({k: v for k, v in overrides.items() if v is not None})
    if "k" not in raw:
        raise CliError("number of communities required (config key 'k' or --k)")
    try:
        return FitConfig(**raw)
    except (TypeError, ValueError) as err:
        raise CliError(f"invalid fit config: {err}")


# ------------------------------------------------------------------- commands

def cmd_simulate(args) -> int:
    cfg = load_sim_config(args.config, args.seed)
    net, truth = sample_networks(cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(out / "edges.txt", net.adjacency)
    write_covariates(out / "covariates.txt", net.covariates)
    write_labels(out / "truth_labels.txt", truth.labels)
    print(f"wrote {cfg.n_samples} networks on {cfg.n_nodes} nodes to {out}")
    return 0


def cmd_fit(args) -> int:
    adjacency, n, m = read_edge_list(args.edges)
    covariates = read_covariates(args.covariates, n, m) if args.covariates else None
    net = MultiNetwork(adjacency=adjacency, covariates=covariates)
    order = METHOD_ORDERS[args.method] if args.method else None
    cfg = load_fit_config(args.config, {
        "k": args.k, "order": order, "seed": args.seed,
        "epsilon": args.epsilon, "max_iters": args.max_iters,
    })
    if cfg.k > n:
        raise CliError(f"k={cfg.k} exceeds the {n} nodes in {args.edges}")
    res = fit(net, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_labels(out / "labels.txt", res.labels.labels)
    _write_matrix_csv(out / "alpha.csv", res.alpha.alpha)
    _write_matrix_csv(out / "beta.csv", res.params.beta)
    _write_matrix_csv(out / "rho.csv", res.params.rho.reshape(-1, 1))
    with open(out / "trace.csv", "w") as fh:
        fh.write("iteration,loglik,max_change\n")
        for s, (ll, ch) in enumerate(res.trace, start=1):
            fh.write(f"{s},{format(ll, '.9g')},{format(ch, '.9g')}\n")
    status = "converged" if res.converged else "hit the iteration cap"
    print(f"{status} after {res.iterations} iterations; results in {out}")
    return 0 if res.converged else 2


def cmd_eval(args) -> int:
    a = read_labels(args.labels)
    b = read_labels(args.reference)
    if a.size != b.size:
        raise CliError("label files cover different node counts")
    ka, kb = int(a.max()) + 1, int(b.max()) + 1
    ari = adjusted_rand_index(HardMembership(a, ka), HardMembership(b, kb))
    print(format(ari, ".9g"))
    return 0


def cmd_bench(args) -> int:
    try:
        p = preset(args.preset, n_replicates=args.replicates, seed=args.seed or 0)
    except ValueError as err:
        raise CliError(str(err))
    report = run_preset(p)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write_csv(out / f"{p.name}.csv")
    summary = report.format_table()
    (out / f"{p.name}-summary.txt").write_text(summary)
    print(summary, end="")
    return 0


def cmd_ingest(args) -> int:
    adjacency, n, m = read_edge_list(args.edges)
    union = adjacency.max(axis=0)
    degrees = union.sum(axis=1)
    kept_nodes = np.where(degrees > args.min_degree)[0]
    if kept_nodes.size == 0:
        print("no nodes survive the degree filter", file=sys.stderr)
        return 3
    sub = adjacency[np.ix_(np.arange(m), kept_nodes, kept_nodes)]
    net = MultiNetwork(adjacency=sub)
    try:
        k_hat, kept_layers = consensus_k(net, max_k_per_layer=args.max_k_per_layer,
                                         min_largest_community=args.min_largest)
    except ConsensusError:
        print("no layers survive the consensus filters", file=sys.stderr)
        return 3
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(out / "filtered_edges.txt", sub[kept_layers])
    with open(out / "ingest_report.txt", "w") as fh:
        fh.write(f"nodes_kept={kept_nodes.size} layers_kept={len(kept_layers)} "
                 f"k={k_hat}\n")
        fh.write("nodes: " + " ".join(str(int(v)) for v in kept_nodes) + "\n")
        fh.write("layers: " + " ".join(str(int(v)) for v in kept_layers) + "\n")
    print(f"kept {kept_nodes.size}/{n} nodes, {len(kept_layers)}/{m} layers, "
          f"consensus k={k_hat}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="depnet",
                     description="Community detection for multi-sample networks "
                                 "with correlated within-community edges.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="generate synthetic networks")
    p_sim.add_argument("--config", required=True)
    p_sim.add_argument("--out", required=True)
    p_sim.add_argument("--seed", type=int, default=None)

    p_fit = sub.add_parser("fit", help="estimate memberships and parameters")
    p_fit.add_argument("edges")
    p_fit.add_argument("--covariates", default=None)
    p_fit.add_argument("--config", default=None)
    p_fit.add_argument("--out", required=True)
    p_fit.add_argument("--method", choices=sorted(METHOD_ORDERS), default=None)
    p_fit.add_argument("--k", type=int, default=None)
    p_fit.add_argument("--epsilon", type=float, default=None)
    p_fit.add_argument("--max-iters", dest="max_iters", type=int, default=None)
    p_fit.add_argument("--seed", type=int, default=None)

    p_eval = sub.add_parser("eval", help="adjusted Rand index of two label files")
    p_eval.add_argument("labels")
    p_eval.add_argument("reference")
    p_eval.add_argument("--seed", type=int, default=None,
                        help="accepted for interface uniformity; eval is deterministic")

    p_bench = sub.add_parser("bench", help="run a preset experiment grid")
    p_bench.add_argument("--preset", required=True)
    p_bench.add_argument("--out", required=True)
    p_bench.add_argument("--replicates", type=int, default=10)
    p_bench.add_argument("--seed", type=int, default=None)

    p_ing = sub.add_parser("ingest", help="degree/layer filtering + consensus k")
    p_ing.add_argument("edges")
    p_ing.add_argument("--out", required=True)
    p_ing.add_argument("--min-degree", dest="min_degree", type=int, default=9)
    p_ing.add_argument("--max-k-per-layer", dest="max_k_per_layer", type=int,
                       default=10)
    p_ing.add_argument("--min-largest", dest="min_largest", type=int, default=14)
    p_ing.add_argument("--seed", type=int, default=None,
                       help="accepted for interface uniformity; ingest is deterministic")

    return parser


_COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "eval": cmd_eval,
             "bench": cmd_bench, "ingest": cmd_ingest}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except CliError as err:
        print(f"depnet: {err}", file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
