"""Exact brute-force posteriors on tiny graphs.

Ground truth for sampler-correctness tests: enumerate every spanning forest,
weight each (forest, root assignment) pair by its exact model probability,
and marginalize.  Hard-capped because the combinatorics explode.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Forest, LabeledGraph
from .history import _log_table, _tree_log_h, _tree_structures
from .models import ModelParams, Variant

DEFAULT_NODE_CAP = 8
DEFAULT_EDGE_CAP = 14


class OracleCapError(ValueError):
    """Raised when the instance exceeds the brute-force size cap."""


def forest_from_edges(n: int, edges) -> Forest:
    """Build a Forest from an acyclic edge set, rooting each tree at its min node."""
    adj: list[list[int]] = [[] for _ in range(n)]
    for u, v in edges:
        adj[u].append(v)
        adj[v].append(u)
    parent: list = [None] * n
    roots: set[int] = set()
    seen = [False] * n
    for s in range(n):
        if seen[s]:
            continue
        roots.add(s)
        seen[s] = True
        stack = [s]
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    parent[w] = u
                    stack.append(w)
    return Forest(parent, roots)


def enumerate_spanning_forests(graph: LabeledGraph, k: int | None = None,
                               node_cap: int = DEFAULT_NODE_CAP,
                               edge_cap: int = DEFAULT_EDGE_CAP) -> list[Forest]:
    """All spanning forests of ``graph``; exactly ``k`` trees if ``k`` is given.

    ``k=None`` enumerates every acyclic edge subset (singleton trees count),
    which is the support of the random-K posterior.  ``k=1`` yields spanning
    trees.
    """
    n = graph.node_count
    m = graph.edge_count
    if n > node_cap or m > edge_cap:
        raise OracleCapError(f"instance n={n}, m={m} exceeds cap ({node_cap}, {edge_cap})")
    edges = sorted(graph.edges)
    target = None if k is None else n - k
    out: list[Forest] = []

    def find(uf, x):
        while uf[x] != x:
            uf[x] = uf[uf[x]]
            x = uf[x]
        return x

    def rec(idx: int, uf: list[int], chosen: list):
        remaining = m - idx
        if target is not None:
            if len(chosen) > target or len(chosen) + remaining < target:
                return
        if idx == m:
            if target is None or len(chosen) == target:
                out.append(forest_from_edges(n, chosen))
            return
        u, v = edges[idx]
        ru, rv = find(uf, u), find(uf, v)
        if ru != rv:
            uf2 = list(uf)
            uf2[ru] = rv
            chosen.append((u, v))
            rec(idx + 1, uf2, chosen)
            chosen.pop()
        rec(idx + 1, uf, chosen)

    rec(0, list(range(n)), [])
    return out


@dataclass
class _ForestEntry:
    log_weight: float              # total weight, root assignments summed out
    root_weights: dict[int, float]  # per-node log root weight within its tree
    tree_lse: dict[int, float]      # per-node log-sum of its tree's root weights


@dataclass
class ExactPosterior:
    """Exact root posterior plus the joint (forest, root set) weight table."""

    root_dist: np.ndarray
    forests: dict[frozenset, _ForestEntry]
    log_normalizer: float

    def log_joint_weight(self, forest_edges, roots) -> float:
        """Unnormalized log weight of one (spanning forest, root set) state."""
        entry = self.forests.get(frozenset(tuple(sorted(e)) for e in forest_edges))
        if entry is None:
            return -math.inf
        lw = entry.log_weight
        for r in roots:
            lw += entry.root_weights[r] - entry.tree_lse[r]
        return lw

    def joint_probability(self, forest_edges, roots) -> float:
        return math.exp(self.log_joint_weight(forest_edges, roots) - self.log_normalizer)


def _log_psi_table(alpha: float, beta: float, max_deg: int) -> tuple[list[float], list[float]]:
    """Cumulative log attachment products for non-root and root degree factors."""
    lpsi = [0.0] * (max_deg + 1)
    lpsir = [0.0] * (max_deg + 2)
    for d in range(2, max_deg + 1):
        lpsi[d] = lpsi[d - 1] + math.log(beta * (d - 1) + alpha)
    for d in range(1, max_deg + 2):
        lpsir[d] = lpsir[d - 1] + math.log(beta * (d + 1) + alpha)
    return lpsi, lpsir


def _log_binom(a: int, b: int) -> float:
    return math.lgamma(a + 1) - math.lgamma(b + 1) - math.lgamma(a - b + 1)


def exact_root_posterior(graph: LabeledGraph, params: ModelParams,
                         node_cap: int = DEFAULT_NODE_CAP,
                         edge_cap: int = DEFAULT_EDGE_CAP) -> ExactPosterior:
    """Exact posterior root distribution by exhaustive forest enumeration.

    Single-root: root_dist[u] = P(first arrival = u | graph).  Multi-root
    variants: root_dist[u] = P(u in root set | graph), which need not sum
    to one.  Sequential-noise variants are out of scope; their reference
    values come from naive likelihood enumeration in the sampler tests.
    """
    if params.variant.sequential:
        raise OracleCapError("no exact oracle for sequential-noise variants")
    n = graph.node_count
    m = graph.edge_count
    total_pairs = n * (n - 1) // 2
    alpha, beta = params.attachment
    variant = params.variant

    if variant is Variant.SINGLE_ROOT:
        forests = enumerate_spanning_forests(graph, k=1, node_cap=node_cap, edge_cap=edge_cap)
    elif variant is Variant.FIXED_K:
        forests = enumerate_spanning_forests(graph, k=params.k, node_cap=node_cap, edge_cap=edge_cap)
    else:
        forests = enumerate_spanning_forests(graph, k=None, node_cap=node_cap, edge_cap=edge_cap)
    if not forests:
        raise ValueError("graph admits no spanning forest for this variant")

    lpsi, lpsir = _log_psi_table(alpha, beta, n + 1)
    table = _log_table(n)
    per_node: list[list[float]] = [[] for _ in range(n)]
    entries: dict[frozenset, _ForestEntry] = {}
    forest_weights: list[float] = []

    for forest in forests:
        deg = forest.degrees()
        k = len(forest.roots)
        children, size = _tree_structures(forest)
        base = sum(lpsi[d] for d in deg)
        if variant is Variant.RANDOM_K:
            base += (k - 1) * math.log(params.alpha0)
            base += -_log_binom(total_pairs - (n - k), m - (n - k))
        root_weights: dict[int, float] = {}
        tree_lse: dict[int, float] = {}
        tree_term = 0.0
        for r in sorted(forest.roots):
            log_h = _tree_log_h(forest, r, children, size, table)
            n_k = size[r]
            vals = {}
            for u, lh in log_h.items():
                w = lh
                if variant.multi_root:
                    w += lpsir[deg[u]] - lpsi[deg[u]]
                vals[u] = w
            lse = float(np.logaddexp.reduce(np.array(list(vals.values()))))
            if variant is Variant.FIXED_K:
                tree_term += lse - math.lgamma(n_k)
            elif variant is Variant.RANDOM_K:
                tree_term += lse - math.lgamma(n_k + 1)
            else:
                tree_term += lse
            root_weights.update(vals)
            for u in vals:
                tree_lse[u] = lse
        log_w_forest = base + tree_term
        forest_weights.append(log_w_forest)
        for u in range(n):
            per_node[u].append(log_w_forest + root_weights[u] - tree_lse[u])
        key = frozenset(forest.edge_set())
        entries[key] = _ForestEntry(log_w_forest, root_weights, tree_lse)

    log_norm = float(np.logaddexp.reduce(np.array(forest_weights)))
    node_lse = np.array([np.logaddexp.reduce(np.array(v)) for v in per_node])
    probs = np.exp(node_lse - log_norm)
    if not variant.multi_root:
        probs = probs / probs.sum()
    return ExactPosterior(probs, entries, log_norm)
