import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from netgrowth import (EdgeListParseError, Forest, LabeledGraph, Ordering,
                       load_edge_list, subtree_sizes, uniform_spanning_forest)


def test_load_edge_list_basic():
    g = load_edge_list("a b\nb c")
    assert g.node_count == 3
    assert g.edge_count == 2
    assert g.labels == ["a", "b", "c"]


def test_load_edge_list_drops_self_loops():
    g = load_edge_list("a a\na b")
    assert g.node_count == 2
    assert g.edge_count == 1
    assert g.self_loops_dropped == 1


def test_load_edge_list_collapses_duplicates():
    g = load_edge_list("a b\nb a")
    assert g.node_count == 2
    assert g.edge_count == 1
    assert g.duplicates_collapsed == 1


def test_load_edge_list_ignores_blanks_and_comments():
    g = load_edge_list("# header\n\na b\n   \nb c\n")
    assert g.node_count == 3
    assert g.edge_count == 2


def test_load_edge_list_malformed_line_number():
    with pytest.raises(EdgeListParseError) as exc:
        load_edge_list("a b\na b c\n")
    assert exc.value.line_number == 2


def test_adjacency_symmetric_and_degrees():
    g = load_edge_list("a b\nb c\nc a\nc d")
    for u, v in g.edges:
        assert v in g.adjacency[u] and u in g.adjacency[v]
    assert g.degree(g.label_to_index["c"]) == 3


def _cycle(n):
    return LabeledGraph(n, [(i, (i + 1) % n) for i in range(n)])


@pytest.mark.parametrize("n", [3, 4])
def test_usf_uniform_over_cycle_spanning_trees(n):
    # a cycle's spanning trees are exactly the n "drop one edge" trees
    g = _cycle(n)
    rng = np.random.default_rng(12345)
    counts = {}
    draws = 30_000
    for _ in range(draws):
        f = uniform_spanning_forest(g, rng)
        key = frozenset(f.edge_set())
        counts[key] = counts.get(key, 0) + 1
    assert len(counts) == n
    res = chisquare(list(counts.values()))
    assert res.pvalue > 0.001


def test_usf_tree_input_returns_it():
    g = load_edge_list("a b\nb c\nc d")
    rng = np.random.default_rng(7)
    f = uniform_spanning_forest(g, rng)
    assert f.edge_set() == g.edges


def test_usf_disconnected_one_root_per_component():
    g = LabeledGraph(5, [(0, 1), (1, 2), (3, 4)])
    rng = np.random.default_rng(0)
    f = uniform_spanning_forest(g, rng)
    f.validate()
    assert len(f.roots) == 2
    assert sum(1 for p in f.parent if p is not None) == 3


def test_subtree_sizes_star():
    f = Forest([None, 0, 0, 0], {0})
    assert subtree_sizes(f) == [4, 1, 1, 1]


def test_subtree_sizes_path():
    f = Forest([None, 0, 1], {0})
    assert subtree_sizes(f) == [3, 2, 1]


def test_subtree_sizes_singleton():
    f = Forest([None], {0})
    assert subtree_sizes(f) == [1]


def test_forest_validate_catches_cycle():
    f = Forest([1, 0], set())
    with pytest.raises(AssertionError):
        f.validate()


def test_ordering_invariants():
    o = Ordering([2, 0, 1])
    o.validate()
    assert o.node_to_position == [1, 2, 0]
    f = Forest([None, 0, 1], {0})
    assert not o.is_history_of(f)
    assert Ordering([0, 1, 2]).is_history_of(f)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=2, max_value=7), st.data())
def test_usf_valid_forest_property(n, data):
    all_pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    edges = data.draw(st.lists(st.sampled_from(all_pairs), min_size=1,
                               max_size=len(all_pairs), unique=True))
    g = LabeledGraph(n, edges)
    f = uniform_spanning_forest(g, np.random.default_rng(0))
    f.validate()
    assert len(f.roots) == len(g.connected_components())
    sizes = subtree_sizes(f)
    assert sum(sizes[r] for r in f.roots) == n
