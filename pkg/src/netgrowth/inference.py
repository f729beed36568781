"""Posterior aggregation: root distributions, credible sets, the degree
baseline, and community extraction from forest samples."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import Forest, LabeledGraph
from .history import _log_table, _root_log_weights, _tree_log_h, _tree_structures
from .models import ModelParams


def hellinger(p: np.ndarray, q: np.ndarray) -> float:
    """Hellinger distance between two distributions on the same support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("distributions must share a support")
    bc = float(np.sqrt(p * q).sum())
    return math.sqrt(max(0.0, 1.0 - bc))


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())


def aggregate_root_distribution(samples: Iterable[np.ndarray]) -> np.ndarray:
    """Mean of per-sample analytic root distributions (not first-node counts)."""
    total = None
    count = 0
    for q in samples:
        total = np.array(q, dtype=float) if total is None else total + q
        count += 1
    if count == 0:
        raise ValueError("need at least one sample")
    return total / count


@dataclass
class CredibleSet:
    """Probability-sorted node prefix meeting the level's mass rule."""

    nodes: list[int]
    level: float
    cumulative_mass: float

    def __contains__(self, u: int) -> bool:
        return u in set(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)


def credible_set(dist: np.ndarray, epsilon: float, rng=None,
                 multi_root: bool = False) -> CredibleSet:
    """Smallest probability-sorted node set at level 1 - epsilon.

    Single root: smallest prefix with cumulative mass >= 1 - epsilon.
    Multi root (membership probabilities): smallest prefix whose excluded
    tail mass is <= epsilon.  Ties are broken by a seeded random shuffle.
    """
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if rng is None:
        rng = np.random.default_rng(0)
    dist = np.asarray(dist, dtype=float)
    n = dist.shape[0]
    shuffled = rng.permutation(n)
    order = shuffled[np.argsort(-dist[shuffled], kind="stable")]
    csum = np.cumsum(dist[order])
    if multi_root:
        total = csum[-1]
        tail = total - csum
        k = int(np.argmax(tail <= epsilon)) + 1
    else:
        target = 1.0 - epsilon
        if csum[-1] < target:
            k = n
        else:
            k = int(np.argmax(csum >= target)) + 1
    return CredibleSet(list(map(int, order[:k])), 1.0 - epsilon, float(csum[k - 1]))


def degree_baseline_set(graph: LabeledGraph, size: int) -> list[int]:
    """The ``size`` highest-degree nodes, ties broken by node index."""
    if not 1 <= size <= graph.node_count:
        raise ValueError("size out of range")
    order = sorted(range(graph.node_count), key=lambda u: (-graph.degree(u), u))
    return order[:size]


def per_tree_root_distributions(forest: Forest, params: ModelParams
                                ) -> list[tuple[list[int], np.ndarray]]:
    """For each tree: (member nodes, full-length root distribution of that tree)."""
    n = forest.node_count
    children, size = _tree_structures(forest)
    table = _log_table(n)
    deg = forest.degrees()
    out = []
    for r in sorted(forest.roots):
        log_h = _tree_log_h(forest, r, children, size, table)
        weights = _root_log_weights(log_h, deg, params)
        nodes = sorted(weights.keys())
        vals = np.array([weights[u] for u in nodes])
        vals -= vals.max()
        p = np.exp(vals)
        p /= p.sum()
        full = np.zeros(n)
        full[nodes] = p
        out.append((nodes, full))
    return out


@dataclass
class ClusterSummary:
    """Discovered clusters as root distributions plus per-node memberships."""

    clusters: list[np.ndarray]
    posterior_frequency: list[float]
    membership: np.ndarray  # (n, n_clusters) membership probabilities
    assignment: list[int]   # argmax cluster id per node

    @property
    def cluster_count(self) -> int:
        return len(self.clusters)


class FixedKClusterMatcher:
    """Greedy Hungarian matching of per-sample trees to K running references.

    Reference distributions are running averages; tree labels within a sample
    are aligned to the references by minimizing total variation distance.
    """

    def __init__(self, n: int, k: int):
        self.n = n
        self.k = k
        self.refs: Optional[list[np.ndarray]] = None
        self.counts = np.zeros((n, k))
        self.samples = 0

    def update(self, tree_dists: Sequence[np.ndarray],
               tree_nodes: Sequence[Sequence[int]]) -> None:
        if len(tree_dists) != self.k:
            raise ValueError("sample does not have K trees")
        self.samples += 1
        if self.refs is None:
            self.refs = [np.array(d) for d in tree_dists]
            for k, nodes in enumerate(tree_nodes):
                self.counts[list(nodes), k] += 1
            return
        cost = np.empty((self.k, self.k))
        for i, d in enumerate(tree_dists):
            for j, ref in enumerate(self.refs):
                cost[i, j] = total_variation(d, ref)
        rows, cols = linear_sum_assignment(cost)
        j = self.samples
        for i, tgt in zip(rows, cols):
            self.refs[tgt] = ((j - 1) / j) * self.refs[tgt] + (1.0 / j) * tree_dists[i]
            self.counts[list(tree_nodes[i]), tgt] += 1

    def finalize(self) -> ClusterSummary:
        if self.refs is None:
            raise ValueError("no samples")
        membership = self.counts / self.samples
        assignment = list(map(int, membership.argmax(axis=1)))
        return ClusterSummary([np.array(r) for r in self.refs],
                              [1.0] * self.k, membership, assignment)


class RandomKClusterTracker:
    """Cluster discovery for the random-K model.

    Sample trees are matched to the running reference list by Hungarian
    assignment on total variation distance (dummy columns pad unequal
    sizes); a matched pair further than ``tv_threshold`` spawns a new
    cluster.  Trees smaller than ``min_size_fraction`` of the nodes are
    ignored.  Clusters may overlap across samples.
    """

    def __init__(self, n: int, tv_threshold: float = 0.75,
                 min_size_fraction: float = 0.01):
        self.n = n
        self.tv_threshold = tv_threshold
        self.min_size = max(1, math.ceil(min_size_fraction * n))
        self.refs: list[np.ndarray] = []
        self.rho: list[int] = []
        self.counts: list[np.ndarray] = []
        self.samples = 0
        self.k_histogram: dict[int, int] = {}

    def update(self, tree_dists: Sequence[np.ndarray],
               tree_nodes: Sequence[Sequence[int]]) -> None:
        self.samples += 1
        kept = [(d, nodes) for d, nodes in zip(tree_dists, tree_nodes)
                if len(nodes) >= self.min_size]
        self.k_histogram[len(kept)] = self.k_histogram.get(len(kept), 0) + 1
        if not kept:
            return
        j = self.samples
        if not self.refs:
            for d, nodes in kept:
                self._new_cluster(d, nodes)
            return
        size = max(len(kept), len(self.refs))
        cost = np.ones((size, size))  # dummy pads at maximal TV
        for i, (d, _) in enumerate(kept):
            for c, ref in enumerate(self.refs):
                cost[i, c] = total_variation(d, ref)
        rows, cols = linear_sum_assignment(cost)
        for i, c in zip(rows, cols):
            if i >= len(kept):
                continue
            d, nodes = kept[i]
            if c >= len(self.refs) or cost[i, c] > self.tv_threshold:
                self._new_cluster(d, nodes)
            else:
                self.refs[c] = ((j - 1) / j) * self.refs[c] + (1.0 / j) * d
                self.rho[c] += 1
                self.counts[c][list(nodes)] += 1

    def _new_cluster(self, dist: np.ndarray, nodes) -> None:
        self.refs.append(np.array(dist))
        self.rho.append(1)
        cnt = np.zeros(self.n)
        cnt[list(nodes)] += 1
        self.counts.append(cnt)

    def posterior_over_k(self) -> dict[int, float]:
        total = sum(self.k_histogram.values())
        return {k: v / total for k, v in sorted(self.k_histogram.items())}

    def finalize(self) -> ClusterSummary:
        if not self.refs:
            raise ValueError("no samples")
        membership = (np.stack(self.counts, axis=1) / self.samples
                      if self.counts else np.zeros((self.n, 0)))
        assignment = list(map(int, membership.argmax(axis=1)))
        freq = [r / self.samples for r in self.rho]
        order = np.argsort(freq)[::-1]
        return ClusterSummary([self.refs[i] for i in order],
                              [freq[i] for i in order],
                              membership[:, order], assignment)


def posterior_over_k(tree_counts: Iterable[int]) -> dict[int, float]:
    """Histogram of per-sample (size-filtered) tree counts."""
    hist: dict[int, int] = {}
    total = 0
    for k in tree_counts:
        hist[k] = hist.get(k, 0) + 1
        total += 1
    if total == 0:
        raise ValueError("no samples")
    return {k: v / total for k, v in sorted(hist.items())}


@dataclass
class ClusterCollector:
    """run_chains collector feeding forest samples into a cluster matcher."""

    params: ModelParams
    matcher: object
    chain_index: Optional[int] = None

    def __call__(self, ci: int, sweep_idx: int, state) -> None:
        if self.chain_index is not None and ci != self.chain_index:
            return
        dists = per_tree_root_distributions(state.forest, self.params)
        self.matcher.update([d for _, d in dists], [nodes for nodes, _ in dists])
