"""Repeatable simulation experiments: coverage of root credible sets and
confidence-set size sweeps.  Used by the CLI and the acceptance suite."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from multiprocessing import get_context
from typing import Optional

import numpy as np

from .estimation import em_estimate_alpha, estimate_theta
from .gibbs import ChainConfig, run_chains
from .inference import credible_set
from .models import ModelParams, Variant, generate_fixed_k, generate_random_k, \
    generate_seq, generate_single_root, relabel_randomly


def worker_count(requested: Optional[int] = None) -> int:
    if requested is not None and requested > 0:
        return requested
    env = os.environ.get("NETGROWTH_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, os.cpu_count() or 1)


@dataclass(frozen=True)
class CoverageScenario:
    """One coverage experiment: simulate, (optionally) estimate, infer, score."""

    params: ModelParams
    n: int
    m: Optional[int] = None          # ignored by sequential variants
    epsilons: tuple[float, ...] = (0.2,)
    trials: int = 100
    estimate_params: bool = False    # re-estimate alpha/theta per trial
    chain: ChainConfig = field(default_factory=ChainConfig)
    seed: int = 0


def _simulate(scenario: CoverageScenario, rng) -> "SimOutput":
    p = scenario.params
    if p.variant is Variant.SINGLE_ROOT:
        sim = generate_single_root(scenario.n, scenario.m, p, rng)
    elif p.variant is Variant.FIXED_K:
        sim = generate_fixed_k(scenario.n, scenario.m, p, rng)
    elif p.variant is Variant.RANDOM_K:
        sim = generate_random_k(scenario.n, scenario.m, p, rng)
    else:
        sim = generate_seq(scenario.n, p, rng)
    return relabel_randomly(sim, rng)


def _inference_params(scenario: CoverageScenario, sim) -> ModelParams:
    p = scenario.params
    if not scenario.estimate_params:
        return p
    theta = estimate_theta(sim.graph.node_count, sim.graph.edge_count)
    alpha = em_estimate_alpha(sim.graph, theta)
    beta = 0.0 if math.isinf(alpha) else 1.0
    alpha = 1.0 if math.isinf(alpha) else alpha
    if p.variant is Variant.SINGLE_ROOT:
        return ModelParams.single_root(alpha, beta, theta=theta)
    if p.variant is Variant.FIXED_K:
        return ModelParams.fixed_k(alpha, beta, k=p.k, theta=theta)
    if p.variant is Variant.RANDOM_K:
        return ModelParams.random_k(alpha, beta, alpha0=p.alpha0, theta=theta)
    return p


def run_coverage_trial(scenario: CoverageScenario, trial: int) -> dict:
    rng = np.random.default_rng(np.random.SeedSequence((scenario.seed, trial)))
    sim = _simulate(scenario, rng)
    params = _inference_params(scenario, sim)
    result = run_chains(sim.graph, params, scenario.chain,
                        seed=int(rng.integers(2 ** 63)))
    dist = result.root_distribution
    multi = params.variant.multi_root
    row = {
        "trial": trial,
        "converged": int(result.diagnostics.converged),
        "sweeps": result.diagnostics.sweeps,
        "wall_time_s": result.diagnostics.wall_time_s,
    }
    tie_rng = np.random.default_rng((scenario.seed, trial, 7))
    for eps in scenario.epsilons:
        cs = credible_set(dist, eps, rng=tie_rng, multi_root=multi)
        members = set(cs.nodes)
        covered = (sim.true_roots <= members) if multi else \
            (next(iter(sim.true_roots)) in members)
        row[f"covered_{eps}"] = int(covered)
        row[f"size_{eps}"] = len(cs)
    return row


def _trial_star(args):
    return run_coverage_trial(*args)


def run_coverage_experiment(scenario: CoverageScenario,
                            workers: Optional[int] = None) -> tuple[list[dict], dict]:
    """All trials (possibly in a worker pool) plus per-level aggregates."""
    nproc = min(worker_count(workers), scenario.trials)
    jobs = [(scenario, t) for t in range(scenario.trials)]
    if nproc <= 1:
        rows = [run_coverage_trial(*job) for job in jobs]
    else:
        with get_context("spawn").Pool(nproc) as pool:
            rows = pool.map(_trial_star, jobs)
    agg = {"trials": scenario.trials}
    for eps in scenario.epsilons:
        agg[f"coverage_{eps}"] = float(np.mean([r[f"covered_{eps}"] for r in rows]))
        agg[f"mean_size_{eps}"] = float(np.mean([r[f"size_{eps}"] for r in rows]))
    agg["convergence_rate"] = float(np.mean([r["converged"] for r in rows]))
    return rows, agg


@dataclass(frozen=True)
class SizeScenario:
    """Mean credible-set size across an edge-count grid (phase-behavior sweeps)."""

    params: ModelParams
    n: int
    edge_counts: tuple[int, ...]
    epsilon: float = 0.05
    trials: int = 30
    estimate_params: bool = False
    chain: ChainConfig = field(default_factory=ChainConfig)
    seed: int = 0


def run_size_experiment(scenario: SizeScenario,
                        workers: Optional[int] = None) -> list[dict]:
    out = []
    for m in scenario.edge_counts:
        cov = CoverageScenario(params=scenario.params, n=scenario.n, m=m,
                               epsilons=(scenario.epsilon,),
                               trials=scenario.trials,
                               estimate_params=scenario.estimate_params,
                               chain=scenario.chain, seed=scenario.seed)
        rows, agg = run_coverage_experiment(cov, workers=workers)
        out.append({"n": scenario.n, "m": m,
                    "mean_size": agg[f"mean_size_{scenario.epsilon}"],
                    "coverage": agg[f"coverage_{scenario.epsilon}"],
                    "trials": scenario.trials})
    return out
