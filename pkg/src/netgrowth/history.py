"""Counting and sampling of arrival histories on trees and forests.

A history of a forest is an arrival ordering whose every prefix induces a
connected subtree within each component.  The number of histories rooted at a
node follows from the product of inverse subtree sizes; all counts are kept
in log-domain because they grow super-exponentially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import Forest, Ordering
from .models import ModelParams, Variant


@dataclass
class HistoryCounts:
    """Per-node log history counts of a single tree plus their log-sum."""

    log_h: np.ndarray
    log_h_total: float

    def root_distribution(self) -> np.ndarray:
        w = np.exp(self.log_h - self.log_h_total)
        return w / w.sum()


def _tree_structures(forest: Forest):
    """Component lists, per-node subtree sizes, and children under current roots."""
    children = forest.children_lists()
    order: list[int] = []
    stack = sorted(forest.roots)
    while stack:
        u = stack.pop()
        order.append(u)
        stack.extend(children[u])
    size = [1] * forest.node_count
    for u in reversed(order):
        p = forest.parent[u]
        if p is not None:
            size[p] += size[u]
    return children, size


def _tree_log_h(forest: Forest, root: int, children, size, log_table) -> dict[int, float]:
    """log h(u, tree) for every u in the tree containing ``root``.

    Uses the message-passing recurrence h(u) = h(pa(u)) * n_u / (n - n_u)
    after evaluating the subtree-size product once at the current root.
    """
    n_k = size[root]
    members = []
    stack = [root]
    while stack:
        u = stack.pop()
        members.append(u)
        stack.extend(children[u])
    log_h_root = math.lgamma(n_k + 1) - sum(log_table[size[u]] for u in members)
    log_h = {root: log_h_root}
    stack = list(children[root])
    while stack:
        u = stack.pop()
        p = forest.parent[u]
        log_h[u] = log_h[p] + log_table[size[u]] - log_table[n_k - size[u]]
        stack.extend(children[u])
    return log_h


def _log_table(n: int) -> list[float]:
    return [0.0] + [math.log(i) for i in range(1, n + 1)]


def count_histories(tree: Forest) -> HistoryCounts:
    """History counts of a single spanning tree, for every candidate root."""
    if len(tree.roots) != 1:
        raise ValueError("count_histories expects a single tree")
    children, size = _tree_structures(tree)
    root = next(iter(tree.roots))
    table = _log_table(tree.node_count)
    log_h = _tree_log_h(tree, root, children, size, table)
    arr = np.empty(tree.node_count)
    for u, v in log_h.items():
        arr[u] = v
    total = float(np.logaddexp.reduce(arr))
    return HistoryCounts(arr, total)


def _root_log_weights(log_h: dict[int, float], deg, params: ModelParams) -> dict[int, float]:
    """Log weight of each node being its tree's root.

    Single-root trees weight by history counts alone; multi-root variants add
    the two extra attachment factors contributed by the root's imaginary
    self-loop.
    """
    if not params.variant.multi_root:
        return dict(log_h)
    alpha, beta = params.attachment
    out = {}
    for u, lh in log_h.items():
        d = deg[u]
        if d == 0:
            out[u] = lh  # singleton tree: its root is forced
        else:
            out[u] = lh + math.log(beta * d + beta + alpha) + math.log(beta * d + alpha)
    return out


def root_probabilities(tree: Forest, params: ModelParams) -> np.ndarray:
    """Posterior over which node arrived first, for a single tree."""
    if len(tree.roots) != 1:
        raise ValueError("root_probabilities expects a single tree")
    children, size = _tree_structures(tree)
    root = next(iter(tree.roots))
    table = _log_table(tree.node_count)
    log_h = _tree_log_h(tree, root, children, size, table)
    weights = _root_log_weights(log_h, tree.degrees(), params)
    arr = np.empty(tree.node_count)
    for u, v in weights.items():
        arr[u] = v
    arr -= np.logaddexp.reduce(arr)
    p = np.exp(arr)
    return p / p.sum()


def root_membership_probabilities(forest: Forest, params: ModelParams) -> np.ndarray:
    """P(u is a root | forest) per node: the per-tree root posterior in place.

    For single-root variants this is the usual first-arrival posterior; for
    multi-root variants each tree contributes its own normalized root weights.
    """
    n = forest.node_count
    children, size = _tree_structures(forest)
    table = _log_table(n)
    deg = forest.degrees()
    out = np.zeros(n)
    for r in forest.roots:
        log_h = _tree_log_h(forest, r, children, size, table)
        weights = _root_log_weights(log_h, deg, params)
        nodes = list(weights.keys())
        vals = np.array([weights[u] for u in nodes])
        vals -= np.logaddexp.reduce(vals)
        p = np.exp(vals)
        p /= p.sum()
        for u, pu in zip(nodes, p):
            out[u] = pu
    return out


def _sample_from_log_weights(nodes, log_w, rng) -> int:
    vals = np.array(log_w)
    vals -= vals.max()
    w = np.exp(vals)
    w /= w.sum()
    return nodes[int(rng.choice(len(nodes), p=w))]


def sample_history(forest: Forest, params: ModelParams, rng) -> Ordering:
    """Draw an ordering from its exact conditional given the forest (ER-noise case).

    The forest is read-only: per-tree roots are resampled internally (history
    counts times the multi-root self-loop factors where applicable), then a
    uniformly random permutation is repaired in place so that every node is
    preceded by its parent.  Callers that need the forest re-rooted to match
    should apply :func:`reroot_to_ordering` afterwards.
    """
    n = forest.node_count
    if n == 0:
        raise ValueError("empty forest")
    children, size = _tree_structures(forest)
    table = _log_table(n)
    deg = forest.degrees()

    new_roots: list[int] = []
    tree_sizes: list[int] = []
    for r in sorted(forest.roots):
        log_h = _tree_log_h(forest, r, children, size, table)
        weights = _root_log_weights(log_h, deg, params)
        nodes = list(weights.keys())
        new_roots.append(_sample_from_log_weights(nodes, [weights[u] for u in nodes], rng))
        tree_sizes.append(size[r])

    # orient parents toward the freshly sampled roots (local copy only)
    parent_local: list = [None] * n
    seen = [False] * n
    for r in new_roots:
        seen[r] = True
        stack = [r]
        while stack:
            u = stack.pop()
            p_old = forest.parent[u]
            for w in children[u]:
                if not seen[w]:
                    seen[w] = True
                    parent_local[w] = u
                    stack.append(w)
            if p_old is not None and not seen[p_old]:
                seen[p_old] = True
                parent_local[p_old] = u
                stack.append(p_old)

    variant = params.variant
    if variant is Variant.FIXED_K:
        head = [new_roots[int(i)] for i in rng.permutation(len(new_roots))]
    elif variant is Variant.RANDOM_K:
        probs = np.array(tree_sizes, dtype=float) / n
        head = [new_roots[int(rng.choice(len(new_roots), p=probs))]]
    else:
        if len(new_roots) != 1:
            raise ValueError("single-root variant requires a connected forest")
        head = [new_roots[0]]

    head_set = set(head)
    rest = [u for u in range(n) if u not in head_set]
    perm = head + [rest[int(i)] for i in rng.permutation(len(rest))]
    posn = [0] * n
    for pos, u in enumerate(perm):
        posn[u] = pos

    # in-place repair: at each position place the highest not-yet-placed
    # ancestor of the tentative occupant, swapping the occupant downward
    for t in range(len(head), n):
        v = perm[t]
        p = parent_local[v]
        while p is not None and posn[p] >= t:
            v = p
            p = parent_local[v]
        if v != perm[t]:
            tv = posn[v]
            u = perm[t]
            perm[t], perm[tv] = v, u
            posn[v], posn[u] = t, tv
    return Ordering(perm, posn)


def reroot_to_ordering(forest: Forest, ordering: Ordering) -> None:
    """Re-orient each tree so the earliest node per the ordering is its root."""
    n2p = ordering.node_to_position
    edges = forest.edge_set()
    parent: list = [None] * forest.node_count
    for u, v in edges:
        if n2p[u] < n2p[v]:
            parent[v] = u
        else:
            parent[u] = v
    forest.parent = parent
    forest.roots = {u for u in range(forest.node_count) if parent[u] is None}
