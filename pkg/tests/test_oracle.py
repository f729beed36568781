import itertools
import math

import numpy as np
import pytest

from helpers import (enumerate_fixed_k_forests, enumerate_random_k_forests,
                     enumerate_recursive_trees)
from netgrowth import (Forest, LabeledGraph, ModelParams, OracleCapError,
                       count_histories, enumerate_spanning_forests,
                       exact_root_posterior, log_likelihood_forest,
                       root_probabilities)

UA = ModelParams.single_root(1.0, 0.0)
LPA = ModelParams.single_root(0.0, 1.0)


def triangle():
    return LabeledGraph(3, [(0, 1), (1, 2), (2, 0)])


def cycle4():
    return LabeledGraph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])


def test_enumerate_spanning_trees_counts():
    assert len(enumerate_spanning_forests(triangle(), k=1)) == 3
    assert len(enumerate_spanning_forests(cycle4(), k=1)) == 4
    tree = LabeledGraph(4, [(0, 1), (1, 2), (2, 3)])
    assert len(enumerate_spanning_forests(tree, k=1)) == 1


def test_enumerate_forests_all_acyclic_subsets():
    # triangle: forests = all edge subsets except the full triangle
    assert len(enumerate_spanning_forests(triangle(), k=None)) == 7


def test_cap_exceeded():
    big = LabeledGraph(9, [(i, i + 1) for i in range(8)])
    with pytest.raises(OracleCapError):
        enumerate_spanning_forests(big, k=1)


def test_exact_posterior_triangle_uniform():
    post = exact_root_posterior(triangle(), UA)
    assert post.root_dist == pytest.approx([1 / 3] * 3, rel=1e-12)


def test_exact_posterior_cycle4_uniform():
    post = exact_root_posterior(cycle4(), UA)
    assert post.root_dist == pytest.approx([0.25] * 4, rel=1e-12)


def test_exact_posterior_tree_input_equals_history_formula():
    g = LabeledGraph(3, [(0, 1), (1, 2)])
    post = exact_root_posterior(g, UA)
    assert post.root_dist == pytest.approx([0.25, 0.5, 0.25], rel=1e-12)
    direct = root_probabilities(Forest([None, 0, 1], {0}), UA)
    assert post.root_dist == pytest.approx(direct, rel=1e-12)


def test_exact_posterior_ua_proportional_to_history_sums():
    g = LabeledGraph(4, [(0, 1), (1, 2), (2, 3), (3, 0), (0, 2)])
    post = exact_root_posterior(g, UA)
    sums = np.zeros(4)
    for f in enumerate_spanning_forests(g, k=1):
        sums += np.exp(count_histories(f).log_h)
    assert post.root_dist == pytest.approx(sums / sums.sum(), rel=1e-9)


def _naive_posterior(graph, params):
    """Posterior by brute force over time-labeled forests x label bijections.

    Uses only log_likelihood_forest (normalization-tested separately) plus
    the conditional Erdos-Renyi noise term, nothing from the oracle module.
    """
    n = graph.node_count
    m = graph.edge_count
    total_pairs = n * (n - 1) // 2
    variant = params.variant.value
    if variant == "single":
        forests = [(p, {0}) for p in enumerate_recursive_trees(n)]
    elif variant == "fixed-k":
        forests = [(p, set(range(params.k)))
                   for p in enumerate_fixed_k_forests(n, params.k)]
    else:
        forests = [(p, {u for u, q in enumerate(p) if q is None})
                   for p in enumerate_random_k_forests(n)]
    root_mass = np.zeros(n)
    total = 0.0
    for parent, roots in forests:
        f = Forest(list(parent), set(roots))
        ll = log_likelihood_forest(f, params)
        if ll == -math.inf:
            continue
        k = len(roots)
        noise_pairs = total_pairs - (n - k)
        noise_edges = m - (n - k)
        if noise_edges < 0:
            continue
        lw = ll - (math.lgamma(noise_pairs + 1) - math.lgamma(noise_edges + 1)
                   - math.lgamma(noise_pairs - noise_edges + 1))
        w = math.exp(lw)
        tree_edges = f.edge_set()
        for perm in itertools.permutations(range(n)):
            mapped = {tuple(sorted((perm[u], perm[v]))) for u, v in tree_edges}
            if not mapped <= graph.edges:
                continue
            total += w
            for r in roots:
                root_mass[perm[r]] += w
    return root_mass / total


@pytest.mark.parametrize("params", [
    UA, LPA, ModelParams.single_root(2.0, 1.0),
    ModelParams.fixed_k(1.0, 0.0, k=2), ModelParams.fixed_k(0.0, 1.0, k=2),
    ModelParams.random_k(1.0, 0.0, alpha0=1.5),
    ModelParams.random_k(0.0, 1.0, alpha0=0.8),
    ModelParams.random_k(2.0, 1.0, alpha0=3.0),
])
def test_exact_posterior_matches_fully_naive(params):
    g = LabeledGraph(4, [(0, 1), (1, 2), (2, 3), (1, 3)])
    post = exact_root_posterior(g, params)
    naive = _naive_posterior(g, params)
    assert post.root_dist == pytest.approx(naive, abs=1e-9)


def test_exact_posterior_joint_normalizes():
    g = LabeledGraph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    params = ModelParams.random_k(0.0, 1.0, alpha0=1.0)
    post = exact_root_posterior(g, params)
    total = 0.0
    for f in enumerate_spanning_forests(g, k=None):
        trees = f.tree_members()
        for combo in itertools.product(*trees):
            total += post.joint_probability(f.edge_set(), combo)
    assert total == pytest.approx(1.0, rel=1e-9)


def test_exact_posterior_disconnected_needs_random_k():
    g = LabeledGraph(4, [(0, 1), (2, 3)])
    with pytest.raises(ValueError):
        exact_root_posterior(g, UA)
    post = exact_root_posterior(g, ModelParams.random_k(1.0, 0.0, alpha0=1.0))
    # each component hosts at least one root; symmetry within components
    assert post.root_dist[0] + post.root_dist[1] >= 1.0
    assert post.root_dist[0] == pytest.approx(post.root_dist[1])
    assert post.root_dist[2] == pytest.approx(post.root_dist[3])
