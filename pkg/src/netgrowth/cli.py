"""Command-line surface: simulate | infer | estimate | oracle-check | experiment.

All subcommands are deterministic under a fixed --seed.  JSON output carries
floats at 12 significant digits; exit code 2 flags validation errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from importlib import resources

import numpy as np

from .estimation import em_estimate_alpha, estimate_theta
from .experiments import (CoverageScenario, SizeScenario, run_coverage_experiment,
                          run_size_experiment, worker_count)
from .gibbs import ChainConfig, run_chains
from .graph import DisconnectedGraphError, EdgeListParseError, load_edge_list_file
from .inference import (ClusterCollector, FixedKClusterMatcher,
                        RandomKClusterTracker, credible_set, total_variation)
from .models import (InvalidParamsError, ModelParams, Variant, generate_fixed_k,
                     generate_random_k, generate_seq, generate_single_root,
                     relabel_randomly)
from .oracle import exact_root_posterior

SCHEMA_VERSION = 1


class CliError(Exception):
    pass


def _round12(obj):
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf"
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


def _dump_json(payload, path):
    text = json.dumps(_round12(payload), indent=2, sort_keys=True) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _params_from_args(args, variant: Variant) -> ModelParams:
    alpha = math.inf if args.alpha in ("inf", "ua") else float(args.alpha)
    beta = float(args.beta)
    if variant is Variant.SINGLE_ROOT:
        return ModelParams.single_root(alpha, beta, theta=args.theta)
    if variant is Variant.FIXED_K:
        if args.k is None:
            raise CliError("--k is required for the fixed-k variant")
        return ModelParams.fixed_k(alpha, beta, k=args.k, theta=args.theta)
    if variant is Variant.RANDOM_K:
        if args.alpha0 is None:
            raise CliError("--alpha0 is required for the random-k variant")
        return ModelParams.random_k(alpha, beta, alpha0=args.alpha0, theta=args.theta)
    if variant is Variant.SEQ:
        return ModelParams.seq(alpha, beta, theta=args.theta,
                               alpha_tilde=args.alpha_tilde, beta_tilde=args.beta_tilde)
    return ModelParams.seq_delete(alpha, beta, theta=args.theta, eta=args.eta,
                                  alpha_tilde=args.alpha_tilde,
                                  beta_tilde=args.beta_tilde)


def _add_model_args(p: argparse.ArgumentParser, include_m=True):
    p.add_argument("--variant", required=True,
                   choices=[v.value for v in Variant])
    p.add_argument("--alpha", default="1", help="attachment offset, or 'ua'/'inf'")
    p.add_argument("--beta", type=float, default=0.0, help="attachment degree weight")
    p.add_argument("--theta", type=float, default=0.0, help="noise level")
    p.add_argument("--eta", type=float, default=0.0, help="tree-edge deletion probability")
    p.add_argument("--alpha-tilde", type=float, default=None)
    p.add_argument("--beta-tilde", type=float, default=None)
    p.add_argument("--k", type=int, default=None, help="number of roots (fixed-k)")
    p.add_argument("--alpha0", type=float, default=None, help="new-root rate (random-k)")
    if include_m:
        p.add_argument("--m", type=int, default=None, help="total edge count")


def _add_chain_args(p: argparse.ArgumentParser):
    p.add_argument("--burn-in", type=int, default=50)
    p.add_argument("--max-sweeps", type=int, default=10_000)
    p.add_argument("--tol", type=float, default=None,
                   help="convergence threshold (default 0.1 single root, 0.01 multi root)")
    p.add_argument("--chains", type=int, default=2)
    p.add_argument("--collapsed", action="store_true")
    p.add_argument("--sample-alpha0", action="store_true",
                   help="resample alpha0 each sweep (random-k)")


def _chain_config(args) -> ChainConfig:
    return ChainConfig(burn_in=args.burn_in, max_sweeps=args.max_sweeps,
                       convergence_tol=args.tol, num_chains=args.chains,
                       collapsed=args.collapsed,
                       sample_alpha0=getattr(args, "sample_alpha0", False))


def cmd_simulate(args) -> int:
    variant = Variant(args.variant)
    params = _params_from_args(args, variant)
    rng = np.random.default_rng(args.seed)
    n = args.n
    if variant.sequential:
        sim = generate_seq(n, params, rng)
    else:
        if args.m is None:
            raise CliError("--m is required for Erdos-Renyi noise variants")
        gen = {Variant.SINGLE_ROOT: generate_single_root,
               Variant.FIXED_K: generate_fixed_k,
               Variant.RANDOM_K: generate_random_k}[variant]
        sim = gen(n, args.m, params, rng)
    if args.relabel:
        sim = relabel_randomly(sim, rng)
    edges_path = f"{args.out}.edges"
    with open(edges_path, "w", encoding="utf-8") as fh:
        for u, v in sorted(sim.graph.edges):
            fh.write(f"{sim.graph.labels[u]} {sim.graph.labels[v]}\n")
    _dump_json(sim.to_dict(), f"{args.out}.truth.json")
    print(f"wrote {edges_path} ({sim.graph.node_count} nodes, "
          f"{sim.graph.edge_count} edges) and {args.out}.truth.json")
    return 0


def _estimated_params(graph, variant: Variant, args) -> ModelParams:
    theta = estimate_theta(graph.node_count, graph.edge_count)
    alpha = em_estimate_alpha(graph, theta)
    beta = 0.0 if math.isinf(alpha) else 1.0
    alpha = 1.0 if math.isinf(alpha) else alpha
    if variant is Variant.SINGLE_ROOT:
        return ModelParams.single_root(alpha, beta, theta=theta)
    if variant is Variant.FIXED_K:
        if args.k is None:
            raise CliError("--k is required for the fixed-k variant")
        return ModelParams.fixed_k(alpha, beta, k=args.k, theta=theta)
    if variant is Variant.RANDOM_K:
        if args.alpha0 is None:
            raise CliError("--alpha0 is required for the random-k variant")
        return ModelParams.random_k(alpha, beta, alpha0=args.alpha0, theta=theta)
    raise CliError("parameter estimation applies to ER-noise variants only")


def _params_json(params: ModelParams) -> dict:
    return {
        "alpha": "inf" if math.isinf(params.alpha) else params.alpha,
        "beta": params.beta,
        "theta": params.theta,
        "k": params.k,
        "alpha0": params.alpha0,
        "alpha_tilde": params.alpha_tilde,
        "beta_tilde": params.beta_tilde,
        "eta": params.eta,
    }


def validate_report(report: dict) -> None:
    import jsonschema

    schema = json.loads(resources.files("netgrowth.schema")
                        .joinpath("report.schema.json").read_text())
    jsonschema.validate(report, schema)


def cmd_infer(args) -> int:
    graph = load_edge_list_file(args.input)
    variant = Variant(args.variant)
    if args.estimate:
        params = _estimated_params(graph, variant, args)
    else:
        params = _params_from_args(args, variant)
    config = _chain_config(args)
    matcher = None
    collector = None
    if variant is Variant.FIXED_K:
        matcher = FixedKClusterMatcher(graph.node_count, params.k)
        collector = ClusterCollector(params, matcher, chain_index=0)
    elif variant is Variant.RANDOM_K:
        matcher = RandomKClusterTracker(graph.node_count)
        collector = ClusterCollector(params, matcher, chain_index=0)
    t0 = time.perf_counter()
    result = run_chains(graph, params, config, seed=args.seed, collector=collector)
    dist = result.root_distribution
    rng = np.random.default_rng(args.seed + 1)
    levels = {}
    for eps in args.epsilon:
        cs = credible_set(dist, eps, rng=rng, multi_root=variant.multi_root)
        levels[f"{1 - eps:g}"] = {
            "nodes": [graph.labels[u] for u in cs.nodes],
            "cumulative_mass": cs.cumulative_mass,
        }
    report = {
        "schema_version": SCHEMA_VERSION,
        "variant": variant.value,
        "n": graph.node_count,
        "m": graph.edge_count,
        "params": _params_json(params),
        "root_distribution": {graph.labels[u]: float(dist[u])
                              for u in range(graph.node_count)},
        "credible_sets": levels,
        "clusters": None,
        "membership": None,
        "posterior_over_k": None,
        "diagnostics": {
            "converged": result.diagnostics.converged,
            "sweeps": result.diagnostics.sweeps,
            "final_distance": result.diagnostics.final_distance,
            "wall_time_s": time.perf_counter() - t0,
            "num_chains": result.diagnostics.num_chains,
            "samples_per_chain": result.diagnostics.samples_per_chain,
        },
    }
    if matcher is not None:
        summary = matcher.finalize()
        clusters = []
        for dist_k, freq in zip(summary.clusters, summary.posterior_frequency):
            top = np.argsort(dist_k)[::-1][:10]
            clusters.append({
                "posterior_frequency": float(freq),
                "top_nodes": [{"node": graph.labels[int(u)],
                               "probability": float(dist_k[int(u)])}
                              for u in top if dist_k[int(u)] > 0],
            })
        report["clusters"] = clusters
        report["membership"] = {graph.labels[u]: int(summary.assignment[u])
                                for u in range(graph.node_count)}
        if variant is Variant.RANDOM_K:
            report["posterior_over_k"] = {str(k): v for k, v in
                                          matcher.posterior_over_k().items()}
    validate_report(_round12(report))
    _dump_json(report, args.output)
    return 0


def cmd_estimate(args) -> int:
    graph = load_edge_list_file(args.input)
    theta = estimate_theta(graph.node_count, graph.edge_count)
    alpha = em_estimate_alpha(graph, theta)
    payload = {
        "n": graph.node_count,
        "m": graph.edge_count,
        "alpha_hat": "inf" if math.isinf(alpha) else alpha,
        "beta": 0.0 if math.isinf(alpha) else 1.0,
        "theta_hat": theta,
    }
    _dump_json(payload, args.output)
    return 0


def cmd_oracle_check(args) -> int:
    graph = load_edge_list_file(args.input)
    variant = Variant(args.variant)
    params = _params_from_args(args, variant)
    post = exact_root_posterior(graph, params)
    config = _chain_config(args)
    result = run_chains(graph, params, config, seed=args.seed)
    sampled = result.root_distribution
    tv = total_variation(sampled / sampled.sum(),
                         post.root_dist / post.root_dist.sum())
    payload = {
        "n": graph.node_count,
        "m": graph.edge_count,
        "tv_distance": tv,
        "sweeps": result.diagnostics.sweeps,
        "converged": result.diagnostics.converged,
    }
    _dump_json(payload, args.output)
    return 0


def _write_csv(path, rows: list[dict]) -> None:
    if not rows:
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for r in rows:
            writer.writerow({k: _round12(v) for k, v in r.items()})


def cmd_experiment(args) -> int:
    variant = Variant(args.variant)
    params = _params_from_args(args, variant)
    chain = _chain_config(args)
    workers = worker_count(args.workers)
    if args.kind == "coverage":
        scenario = CoverageScenario(params=params, n=args.n, m=args.m,
                                    epsilons=tuple(args.epsilon),
                                    trials=args.trials,
                                    estimate_params=args.estimate,
                                    chain=chain, seed=args.seed)
        rows, agg = run_coverage_experiment(scenario, workers=workers)
        _write_csv(f"{args.out}.trials.csv", rows)
        _write_csv(f"{args.out}.aggregate.csv", [agg])
        print(json.dumps(_round12(agg), sort_keys=True))
    else:
        if not args.edge_grid:
            raise CliError("--edge-grid is required for the size experiment")
        scenario = SizeScenario(params=params, n=args.n,
                                edge_counts=tuple(args.edge_grid),
                                epsilon=args.epsilon[0], trials=args.trials,
                                estimate_params=args.estimate,
                                chain=chain, seed=args.seed)
        rows = run_size_experiment(scenario, workers=workers)
        _write_csv(f"{args.out}.sizes.csv", rows)
        print(json.dumps(_round12(rows), sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="netgrowth",
        description="Root and community inference on noisy network growth models")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw one graph and its hidden truth")
    _add_model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--relabel", action="store_true",
                   help="apply a random node relabeling to the output")
    p.add_argument("--out", required=True, help="output path prefix")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("infer", help="posterior root inference on an edge list")
    _add_model_args(p, include_m=False)
    p.add_argument("--input", required=True)
    p.add_argument("--estimate", action="store_true",
                   help="estimate alpha/theta from the graph (beta normalized to 1)")
    p.add_argument("--epsilon", type=float, nargs="+", default=[0.2, 0.05])
    p.add_argument("--seed", type=int, default=0)
    _add_chain_args(p)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("estimate", help="plug-in noise level and EM attachment estimate")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("oracle-check",
                       help="compare the sampler to the exact brute-force posterior")
    _add_model_args(p, include_m=False)
    p.add_argument("--input", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_chain_args(p)
    p.add_argument("--output", default="-")
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("experiment", help="coverage loops and size-vs-edges sweeps")
    p.add_argument("--kind", choices=["coverage", "size"], required=True)
    _add_model_args(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--epsilon", type=float, nargs="+", default=[0.2])
    p.add_argument("--edge-grid", type=int, nargs="+", default=None)
    p.add_argument("--estimate", action="store_true")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: NETGROWTH_WORKERS or all cores)")
    p.add_argument("--seed", type=int, default=0)
    _add_chain_args(p)
    p.add_argument("--out", required=True, help="output CSV path prefix")
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CliError, InvalidParamsError, EdgeListParseError,
            DisconnectedGraphError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
