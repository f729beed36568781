"""Independent brute-force oracles used to pin expected values in tests.

Everything here enumerates from first principles (model definitions only) so
it stays independent of the library code paths it checks.
"""

from __future__ import annotations

import itertools
import math
from typing import Optional

from netgrowth.graph import Forest


def enumerate_histories(forest: Forest, variant: str = "single") -> list[tuple[int, ...]]:
    """All valid arrival orderings by direct prefix-connectivity recursion.

    variant: 'single' (one tree, root can be any node? no: orderings of the
    given rooted forest), 'fixed' (roots occupy the first K slots), 'random'
    (roots may arrive at any time).  A node is eligible once its parent has
    been placed; roots are eligible per the variant rule.
    """
    n = forest.node_count
    parent = forest.parent
    roots = set(forest.roots)
    out: list[tuple[int, ...]] = []

    def rec(placed: list[int], placed_set: set[int]):
        if len(placed) == n:
            out.append(tuple(placed))
            return
        t = len(placed)
        for u in range(n):
            if u in placed_set:
                continue
            if u in roots:
                if variant == "fixed" and t >= len(roots):
                    continue
                if variant == "single" and t > 0:
                    continue
            else:
                if variant == "fixed" and t < len(roots):
                    continue
                if parent[u] not in placed_set:
                    continue
            placed.append(u)
            placed_set.add(u)
            rec(placed, placed_set)
            placed.pop()
            placed_set.discard(u)

    rec([], set())
    return out


def histories_starting_at(tree_edges: list[tuple[int, int]], n: int, start: int) -> int:
    """Count prefix-connected orderings of an unrooted tree starting at a node."""
    adj = [[] for _ in range(n)]
    for u, v in tree_edges:
        adj[u].append(v)
        adj[v].append(u)

    count = 0

    def rec(placed_set: set[int], frontier: set[int]):
        nonlocal count
        if len(placed_set) == n:
            count += 1
            return
        for u in list(frontier):
            new_frontier = set(frontier)
            new_frontier.discard(u)
            for w in adj[u]:
                if w not in placed_set:
                    new_frontier.add(w)
            placed_set.add(u)
            rec(placed_set, new_frontier)
            placed_set.discard(u)

    rec({start}, {w for w in adj[start]})
    return count


def enumerate_recursive_trees(n: int):
    """All single-root time-labeled trees as parent arrays (node 0 root)."""
    if n == 1:
        yield [None]
        return
    for choices in itertools.product(*[range(t) for t in range(1, n)]):
        yield [None] + list(choices)


def enumerate_fixed_k_forests(n: int, k: int):
    """All fixed-K time-labeled forests (roots are nodes 0..k-1)."""
    if n == k:
        yield [None] * n
        return
    for choices in itertools.product(*[range(t) for t in range(k, n)]):
        yield [None] * k + list(choices)


def enumerate_random_k_forests(n: int):
    """All random-K time-labeled forests; parent -1 encodes a new root."""
    options = [[-1] + list(range(t)) for t in range(1, n)]
    for choices in itertools.product(*options):
        yield [None] + [None if c < 0 else c for c in choices]


def seq_loglik_naive(graph_edges: set[tuple[int, int]], tree_edges: set[tuple[int, int]],
                     perm: list[int], n: int, theta: float, alpha_t: float,
                     beta_t: float, eta: float = 0.0) -> float:
    """P(observed graph | ordering, latent tree) straight from the definitions.

    O(n^2) double loop over pairs; the per-pair noise probability uses the
    earlier node's tree degree just before the later node arrives.
    """

    def canon(a, b):
        return (a, b) if a < b else (b, a)

    pos = {u: i + 1 for i, u in enumerate(perm)}  # 1-based arrival times

    def tree_deg_at(x: int, time_limit: int) -> int:
        d = 0
        for (a, b) in tree_edges:
            if a == x or b == x:
                other = b if a == x else a
                if pos[other] <= time_limit and pos[x] <= time_limit:
                    d += 1
        return d

    total = 0.0
    for k_time in range(3, n + 1):
        y = perm[k_time - 1]
        scale = 2.0 * beta_t * (k_time - 2) + alpha_t * (k_time - 1)
        for j_time in range(1, k_time):
            x = perm[j_time - 1]
            e = canon(x, y)
            if e in tree_edges:
                continue
            q = min(theta * (beta_t * tree_deg_at(x, k_time - 1) + alpha_t) / scale, 1.0)
            if e in graph_edges:
                if q <= 0.0:
                    return -math.inf
                total += math.log(q)
            else:
                if q >= 1.0:
                    return -math.inf
                total += math.log(1.0 - q)
    # noise edges cannot exist between the first two arrivals
    first_pair = canon(perm[0], perm[1])
    if first_pair in graph_edges and first_pair not in tree_edges:
        return -math.inf
    if eta > 0.0:
        for e in tree_edges:
            total += math.log(1.0 - eta) if e in graph_edges else math.log(eta)
    elif any(e not in graph_edges for e in tree_edges):
        return -math.inf
    return total


def is_valid_history(tree_edges, perm: list[int]) -> bool:
    """Every non-first node has exactly one earlier tree neighbor."""
    pos = {u: i for i, u in enumerate(perm)}
    adj = {}
    for u, v in tree_edges:
        adj.setdefault(u, []).append(v)
        adj.setdefault(v, []).append(u)
    for u in perm[1:]:
        earlier = sum(1 for z in adj.get(u, ()) if pos[z] < pos[u])
        if earlier != 1:
            return False
    return True
