import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import (enumerate_fixed_k_forests, enumerate_random_k_forests,
                     enumerate_recursive_trees)
from netgrowth import (Forest, InvalidParamsError, ModelParams, Ordering,
                       Variant, generate_fixed_k, generate_random_k,
                       generate_seq, generate_single_root, generate_tree,
                       log_likelihood_forest, relabel_randomly)

UA = ModelParams.single_root(1.0, 0.0)
LPA = ModelParams.single_root(0.0, 1.0)


# -- parameter validation -------------------------------------------------------------

def test_params_reject_double_zero():
    with pytest.raises(InvalidParamsError):
        ModelParams.single_root(0.0, 0.0)


def test_params_variant_fields_enforced():
    with pytest.raises(InvalidParamsError):
        ModelParams(Variant.SINGLE_ROOT, 1.0, 0.0, k=2)
    with pytest.raises(InvalidParamsError):
        ModelParams(Variant.FIXED_K, 1.0, 0.0)
    with pytest.raises(InvalidParamsError):
        ModelParams(Variant.RANDOM_K, 1.0, 0.0, alpha0=0.0)
    with pytest.raises(InvalidParamsError):
        ModelParams(Variant.SEQ, 1.0, 0.0, theta=1.0)


def test_ua_sentinel_attachment():
    p = ModelParams.single_root(math.inf, 1.0)
    assert p.attachment == (1.0, 0.0)


# -- tree growth ------------------------------------------------------------------------

def test_generate_tree_n2_forced():
    sim = generate_tree(2, UA, np.random.default_rng(0))
    assert sim.true_forest.parent == [None, 0]
    assert sim.graph.edge_count == 1


@pytest.mark.parametrize("params", [UA, LPA])
def test_generate_tree_n3_half_half(params):
    rng = np.random.default_rng(1)
    hits = 0
    n_draws = 20_000
    for _ in range(n_draws):
        sim = generate_tree(3, params, rng)
        hits += sim.true_forest.parent[2] == 0
    assert abs(hits / n_draws - 0.5) < 0.012


def test_attachment_weights_normalize():
    # decomposed sampler must reproduce beta*deg+alpha over existing nodes
    alpha, beta = 0.7, 1.3
    rng = np.random.default_rng(2)
    sim = generate_tree(50, ModelParams.single_root(alpha, beta), rng)
    deg = sim.true_forest.degrees()
    t = 50
    total = sum(beta * deg[w] + alpha for w in range(t))
    assert total == pytest.approx(2 * beta * (t - 1) + alpha * t)


def test_generate_tree_matches_likelihood_frequencies():
    # empirical tree frequencies against the exact likelihood, n=4 LPA
    rng = np.random.default_rng(3)
    counts = {}
    n_draws = 40_000
    for _ in range(n_draws):
        sim = generate_tree(4, LPA, rng)
        key = tuple(sim.true_forest.parent[1:])
        counts[key] = counts.get(key, 0) + 1
    for key, cnt in counts.items():
        f = Forest([None] + list(key), {0})
        expect = math.exp(log_likelihood_forest(f, LPA))
        assert cnt / n_draws == pytest.approx(expect, abs=0.01)


# -- noisy variants ---------------------------------------------------------------------

def test_generate_single_root_tree_only():
    sim = generate_single_root(6, 5, UA, np.random.default_rng(0))
    assert sim.graph.edges == frozenset(sim.true_forest.edge_set())


def test_generate_single_root_triangle():
    sim = generate_single_root(3, 3, UA, np.random.default_rng(0))
    assert sim.graph.edge_count == 3


def test_generate_single_root_edge_budget():
    sim = generate_single_root(100, 260, LPA, np.random.default_rng(0))
    assert sim.graph.edge_count == 260
    with pytest.raises(InvalidParamsError):
        generate_single_root(10, 8, UA, np.random.default_rng(0))


def test_generate_fixed_k_degenerate_all_roots():
    params = ModelParams.fixed_k(1.0, 0.0, k=5)
    sim = generate_fixed_k(5, 3, params, np.random.default_rng(0))
    assert sim.true_roots == set(range(5))
    assert all(p is None for p in sim.true_forest.parent)
    assert sim.graph.edge_count == 3


def test_generate_fixed_k_first_attach_uniform_when_beta0():
    params = ModelParams.fixed_k(1.0, 0.0, k=2)
    rng = np.random.default_rng(4)
    hits = 0
    n_draws = 20_000
    for _ in range(n_draws):
        sim = generate_fixed_k(3, 1, params, rng)
        hits += sim.true_forest.parent[2] == 0
    assert abs(hits / n_draws - 0.5) < 0.012


def test_generate_random_k_expected_tree_count():
    # expected number of trees ~ (alpha0/(2 beta + alpha)) log n
    alpha0, alpha, beta = 3.0, 1.0, 0.5
    params = ModelParams.random_k(alpha, beta, alpha0=alpha0)
    n = 2000
    rng = np.random.default_rng(5)
    counts = [len(generate_random_k(n, n - 1, params, rng).true_roots)
              for _ in range(60)]
    expected = alpha0 / (2 * beta + alpha) * math.log(n)
    assert np.mean(counts) == pytest.approx(expected, rel=0.15)


def test_generate_seq_noiseless_equals_tree():
    params = ModelParams.seq(1.0, 0.0, theta=0.0)
    sim = generate_seq(30, params, np.random.default_rng(0))
    assert sim.graph.edges == frozenset(sim.true_forest.edge_set())


def test_generate_seq_noise_rate_approaches_theta():
    theta = 1.5
    params = ModelParams.seq(0.0, 1.0, theta=theta)
    rng = np.random.default_rng(6)
    extra = []
    for _ in range(30):
        sim = generate_seq(400, params, rng)
        extra.append((sim.graph.edge_count - 399) / 398)
    assert np.mean(extra) == pytest.approx(theta, rel=0.08)


def test_generate_seq_table_regime_edge_count():
    params = ModelParams.seq(0.0, 1.0, theta=1.5)
    sim = generate_seq(600, params, np.random.default_rng(7))
    assert 1300 <= sim.graph.edge_count <= 1700


def test_generate_seq_delete_keeps_latent_tree():
    params = ModelParams.seq_delete(0.0, 1.0, theta=1.5, eta=0.5, alpha_tilde=8.0,
                                    beta_tilde=1.0)
    sim = generate_seq(200, params, np.random.default_rng(8))
    tree_edges = sim.true_forest.edge_set()
    assert len(tree_edges) == 199
    missing = sum(1 for e in tree_edges if e not in sim.graph.edges)
    assert 60 <= missing <= 140  # ~eta fraction deleted from the observation


def test_seq_noise_probabilities_capped():
    params = ModelParams.seq(0.0, 1.0, theta=50.0)
    sim = generate_seq(50, params, np.random.default_rng(9))  # must not crash
    assert sim.graph.node_count == 50


# -- relabeling -------------------------------------------------------------------------

def test_relabel_preserves_shape_and_truth():
    sim = generate_single_root(20, 30, LPA, np.random.default_rng(10))
    out = relabel_randomly(sim, np.random.default_rng(11))
    assert sorted(map(len, (out.graph.adjacency[u] for u in range(20)))) == \
        sorted(map(len, (sim.graph.adjacency[u] for u in range(20))))
    assert out.true_ordering.is_history_of(out.true_forest)
    assert {out.true_ordering.position_to_node[0]} == out.true_roots
    # truth round-trips: the ordering's time labels recover the original tree
    n2p = out.true_ordering.node_to_position
    orig_edges = {tuple(sorted((n2p[u], n2p[v])))
                  for u, v in out.true_forest.edge_set()}
    assert orig_edges == sim.true_forest.edge_set()


def test_relabel_root_position_uniform():
    sim = generate_tree(3, UA, np.random.default_rng(12))
    rng = np.random.default_rng(13)
    counts = [0, 0, 0]
    for _ in range(15_000):
        out = relabel_randomly(sim, rng)
        counts[next(iter(out.true_roots))] += 1
    from scipy.stats import chisquare
    assert chisquare(counts).pvalue > 0.001


# -- likelihoods ------------------------------------------------------------------------

def test_loglik_ua_any_tree():
    for n in (3, 5, 8):
        parent = [None] + [0] * (n - 1)
        val = log_likelihood_forest(Forest(parent, {0}), UA)
        assert val == pytest.approx(-math.lgamma(n), rel=1e-12)


def test_loglik_lpa_path3():
    val = log_likelihood_forest(Forest([None, 0, 1], {0}), LPA)
    assert val == pytest.approx(math.log(0.5), rel=1e-12)


def test_loglik_degree_multiset_sufficiency():
    # two different 5-node trees with degree multiset {1,1,1,2,3}
    t1 = Forest([None, 0, 1, 1, 2], {0})
    t2 = Forest([None, 0, 1, 2, 2], {0})
    params = ModelParams.single_root(2.5, 1.0)
    d1 = sorted(t1.degrees())
    d2 = sorted(t2.degrees())
    assert d1 == d2
    assert log_likelihood_forest(t1, params) == log_likelihood_forest(t2, params)


def test_loglik_invalid_history_is_neg_inf():
    f = Forest([1, None, 1], {1})  # node 0's parent arrives later
    assert log_likelihood_forest(f, UA) == -math.inf


@pytest.mark.parametrize("alpha,beta", [(1.0, 0.0), (0.0, 1.0), (8.0, 1.0)])
def test_loglik_single_root_normalizes(alpha, beta):
    params = ModelParams.single_root(alpha, beta)
    for n in (2, 3, 4, 5):
        total = 0.0
        for parent in enumerate_recursive_trees(n):
            total += math.exp(log_likelihood_forest(Forest(list(parent), {0}), params))
        assert total == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("alpha,beta", [(1.0, 0.0), (0.0, 1.0), (2.0, 1.5)])
def test_loglik_fixed_k_normalizes(alpha, beta):
    for n, k in ((4, 2), (5, 2), (5, 3)):
        params = ModelParams.fixed_k(alpha, beta, k=k)
        total = 0.0
        for parent in enumerate_fixed_k_forests(n, k):
            f = Forest(list(parent), set(range(k)))
            total += math.exp(log_likelihood_forest(f, params))
        assert total == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("alpha,beta,alpha0", [(1.0, 0.0, 2.0), (0.0, 1.0, 0.7),
                                               (2.0, 1.0, 5.0)])
def test_loglik_random_k_normalizes(alpha, beta, alpha0):
    params = ModelParams.random_k(alpha, beta, alpha0=alpha0)
    for n in (3, 4, 5):
        total = 0.0
        for parent in enumerate_random_k_forests(n):
            roots = {u for u, p in enumerate(parent) if p is None}
            f = Forest(list(parent), roots)
            total += math.exp(log_likelihood_forest(f, params))
        assert total == pytest.approx(1.0, abs=1e-10)


def test_loglik_with_explicit_ordering():
    f = Forest([None, 0, 1], {0})
    good = Ordering([0, 1, 2])
    bad = Ordering([0, 2, 1])
    assert log_likelihood_forest(f, UA, good) == pytest.approx(-math.log(2))
    assert log_likelihood_forest(f, UA, bad) == -math.inf


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 10.0), st.floats(0.0, 5.0), st.integers(3, 40),
       st.integers(0, 30), st.floats(0.01, 5.0))
def test_seq_noise_probability_in_unit_interval(alpha_t, beta_t, t, d, theta):
    if alpha_t == 0 and beta_t == 0:
        alpha_t = 1.0
    from netgrowth.models import seq_noise_scale
    q = min(theta * (beta_t * d + alpha_t) / seq_noise_scale(t, alpha_t, beta_t), 1.0)
    assert 0.0 <= q <= 1.0


def test_sim_output_round_trip():
    sim = generate_single_root(12, 20, LPA, np.random.default_rng(20))
    d = sim.to_dict()
    from netgrowth.models import SimOutput
    back = SimOutput.from_dict(d, LPA)
    assert back.graph.edges == sim.graph.edges
    assert back.true_forest.parent == sim.true_forest.parent
