"""Forward simulation of the noisy growth models and exact forest likelihoods.

All model variants grow a latent recursive tree/forest by affine preferential
attachment (new node picks an existing target with weight beta*degree + alpha,
roots carrying an extra 2*beta for their imaginary self-loop in multi-root
variants) and then add noise edges, either Erdos-Renyi conditioned on the
final edge count or sequentially per arrival.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

from .graph import Forest, LabeledGraph, Ordering


class Variant(Enum):
    SINGLE_ROOT = "single"
    FIXED_K = "fixed-k"
    RANDOM_K = "random-k"
    SEQ = "seq"
    SEQ_DELETE = "seq-delete"

    @property
    def multi_root(self) -> bool:
        return self in (Variant.FIXED_K, Variant.RANDOM_K)

    @property
    def sequential(self) -> bool:
        return self in (Variant.SEQ, Variant.SEQ_DELETE)


class InvalidParamsError(ValueError):
    pass


@dataclass(frozen=True)
class ModelParams:
    """Growth-model parameters plus the variant discriminator.

    ``alpha = math.inf`` is the uniform-attachment sentinel; it is treated as
    (alpha, beta) = (1, 0) in every weight and likelihood computation.
    """

    variant: Variant
    alpha: float
    beta: float
    theta: float = 0.0
    k: Optional[int] = None
    alpha0: Optional[float] = None
    alpha_tilde: Optional[float] = None
    beta_tilde: Optional[float] = None
    eta: float = 0.0

    def __post_init__(self):
        if not math.isinf(self.alpha) and self.alpha < 0:
            raise InvalidParamsError("alpha must be >= 0 (or inf sentinel)")
        if self.beta < 0:
            raise InvalidParamsError("beta < 0 is not supported")
        if self.alpha == 0 and self.beta == 0:
            raise InvalidParamsError("alpha and beta cannot both be zero")
        if not 0 <= self.theta:
            raise InvalidParamsError("theta must be nonnegative")
        if self.variant is Variant.FIXED_K:
            if self.k is None or self.k < 1:
                raise InvalidParamsError("fixed-k variant requires k >= 1")
        elif self.k is not None:
            raise InvalidParamsError("k is only valid for the fixed-k variant")
        if self.variant is Variant.RANDOM_K:
            if self.alpha0 is None or self.alpha0 <= 0:
                raise InvalidParamsError("random-k variant requires alpha0 > 0")
        elif self.alpha0 is not None:
            raise InvalidParamsError("alpha0 is only valid for the random-k variant")
        if self.variant.sequential:
            if self.alpha_tilde is None or self.beta_tilde is None:
                raise InvalidParamsError("seq variants require alpha_tilde and beta_tilde")
            if self.alpha_tilde < 0 or self.beta_tilde < 0:
                raise InvalidParamsError("alpha_tilde/beta_tilde must be >= 0")
            if self.alpha_tilde == 0 and self.beta_tilde == 0:
                raise InvalidParamsError("alpha_tilde and beta_tilde cannot both be zero")
        elif self.alpha_tilde is not None or self.beta_tilde is not None:
            raise InvalidParamsError("alpha_tilde/beta_tilde only valid for seq variants")
        if self.variant is Variant.SEQ_DELETE:
            if not 0 <= self.eta < 1:
                raise InvalidParamsError("eta must lie in [0, 1)")
        elif self.eta != 0.0:
            raise InvalidParamsError("eta is only valid for the seq-delete variant")

    @property
    def attachment(self) -> tuple[float, float]:
        """(alpha, beta) with the uniform-attachment sentinel resolved."""
        if math.isinf(self.alpha):
            return 1.0, 0.0
        return self.alpha, self.beta

    @property
    def noise_attachment(self) -> tuple[float, float]:
        if math.isinf(self.alpha_tilde):
            return 1.0, 0.0
        return self.alpha_tilde, self.beta_tilde

    # -- convenience constructors -------------------------------------------------

    @classmethod
    def single_root(cls, alpha: float, beta: float, theta: float = 0.0) -> "ModelParams":
        return cls(Variant.SINGLE_ROOT, alpha, beta, theta=theta)

    @classmethod
    def fixed_k(cls, alpha: float, beta: float, k: int, theta: float = 0.0) -> "ModelParams":
        return cls(Variant.FIXED_K, alpha, beta, theta=theta, k=k)

    @classmethod
    def random_k(cls, alpha: float, beta: float, alpha0: float, theta: float = 0.0) -> "ModelParams":
        return cls(Variant.RANDOM_K, alpha, beta, theta=theta, alpha0=alpha0)

    @classmethod
    def seq(cls, alpha: float, beta: float, theta: float,
            alpha_tilde: Optional[float] = None, beta_tilde: Optional[float] = None) -> "ModelParams":
        if alpha_tilde is None:
            alpha_tilde = alpha
        if beta_tilde is None:
            beta_tilde = beta
        return cls(Variant.SEQ, alpha, beta, theta=theta,
                   alpha_tilde=alpha_tilde, beta_tilde=beta_tilde)

    @classmethod
    def seq_delete(cls, alpha: float, beta: float, theta: float, eta: float,
                   alpha_tilde: Optional[float] = None,
                   beta_tilde: Optional[float] = None) -> "ModelParams":
        if alpha_tilde is None:
            alpha_tilde = alpha
        if beta_tilde is None:
            beta_tilde = beta
        return cls(Variant.SEQ_DELETE, alpha, beta, theta=theta, eta=eta,
                   alpha_tilde=alpha_tilde, beta_tilde=beta_tilde)


@dataclass
class SimOutput:
    """A simulated graph together with its hidden growth history."""

    graph: LabeledGraph
    true_forest: Forest
    true_ordering: Ordering
    true_roots: set[int]
    params: ModelParams

    def to_dict(self) -> dict:
        return {
            "n": self.graph.node_count,
            "edges": sorted(list(e) for e in self.graph.edges),
            "parent": [-1 if p is None else p for p in self.true_forest.parent],
            "ordering": list(self.true_ordering.position_to_node),
            "roots": sorted(self.true_roots),
            "variant": self.params.variant.value,
        }

    @classmethod
    def from_dict(cls, d: dict, params: ModelParams) -> "SimOutput":
        n = d["n"]
        graph = LabeledGraph(n, [tuple(e) for e in d["edges"]])
        parent = [None if p < 0 else p for p in d["parent"]]
        forest = Forest(parent, set(d["roots"]))
        return cls(graph, forest, Ordering(list(d["ordering"])), set(d["roots"]), params)


# -- tree / forest growth ----------------------------------------------------------


def _grow_single_tree(n: int, alpha: float, beta: float, rng) -> list[Optional[int]]:
    """Recursive tree by affine attachment; returns parent array (node 0 root).

    Weight of target w at arrival t is beta*deg(w) + alpha; sampling is O(1)
    per step by mixing a uniform-node draw with a uniform edge-endpoint draw.
    """
    parent: list[Optional[int]] = [None] * n
    if n == 1:
        return parent
    parent[1] = 0
    endpoints = [0, 1]
    for t in range(2, n):
        total = 2.0 * beta * (t - 1) + alpha * t
        r = rng.random() * total
        if r < alpha * t:
            w = int(rng.integers(t))
        else:
            w = endpoints[int(rng.integers(len(endpoints)))]
        parent[t] = w
        endpoints.append(t)
        endpoints.append(w)
    return parent


def _grow_forest_fixed_k(n: int, k: int, alpha: float, beta: float, rng) -> list[Optional[int]]:
    """Forest with roots 0..k-1, each root holding an imaginary self-loop."""
    parent: list[Optional[int]] = [None] * n
    endpoints: list[int] = []
    for t in range(k, n):
        total = (2.0 * beta + alpha) * t
        r = rng.random() * total
        if r < alpha * t:
            w = int(rng.integers(t))
        elif r < alpha * t + 2.0 * beta * k:
            w = int(rng.integers(k))
        else:
            w = endpoints[int(rng.integers(len(endpoints)))]
        parent[t] = w
        endpoints.append(t)
        endpoints.append(w)
    return parent


def _grow_forest_random_k(n: int, alpha0: float, alpha: float, beta: float,
                          rng) -> tuple[list[Optional[int]], list[int]]:
    parent: list[Optional[int]] = [None] * n
    roots = [0]
    endpoints: list[int] = []
    for t in range(1, n):
        c_total = (2.0 * beta + alpha) * t
        r = rng.random() * (c_total + alpha0)
        if r < alpha0:
            roots.append(t)
            continue
        r -= alpha0
        if r < alpha * t:
            w = int(rng.integers(t))
        elif r < alpha * t + 2.0 * beta * len(roots):
            w = roots[int(rng.integers(len(roots)))]
        else:
            w = endpoints[int(rng.integers(len(endpoints)))]
        parent[t] = w
        endpoints.append(t)
        endpoints.append(w)
    return parent, roots


def _sample_noise_pairs(n: int, count: int, forbidden: set[tuple[int, int]], rng) -> list[tuple[int, int]]:
    """Uniformly choose ``count`` distinct unordered pairs outside ``forbidden``."""
    total_pairs = n * (n - 1) // 2
    eligible = total_pairs - len(forbidden)
    if count < 0 or count > eligible:
        raise InvalidParamsError(
            f"cannot place {count} noise edges among {eligible} eligible pairs")
    if count == 0:
        return []
    if count <= eligible // 2:
        chosen: set[tuple[int, int]] = set()
        while len(chosen) < count:
            u = int(rng.integers(n))
            v = int(rng.integers(n))
            if u == v:
                continue
            e = (u, v) if u < v else (v, u)
            if e in forbidden or e in chosen:
                continue
            chosen.add(e)
        return list(chosen)
    # dense regime: materialise the eligible pairs and subsample
    iu, iv = np.triu_indices(n, k=1)
    mask = np.fromiter(
        ((int(a), int(b)) not in forbidden for a, b in zip(iu, iv)),
        dtype=bool, count=len(iu))
    pool = np.flatnonzero(mask)
    picks = rng.choice(pool, size=count, replace=False)
    return [(int(iu[i]), int(iv[i])) for i in picks]


def generate_tree(n: int, params: ModelParams, rng) -> SimOutput:
    """Pure recursive attachment tree (the noiseless single-root case)."""
    if n < 1:
        raise InvalidParamsError("n must be >= 1")
    if params.variant is not Variant.SINGLE_ROOT:
        raise InvalidParamsError("generate_tree requires the single-root variant")
    alpha, beta = params.attachment
    parent = _grow_single_tree(n, alpha, beta, rng)
    edges = [(t, p) for t, p in enumerate(parent) if p is not None]
    graph = LabeledGraph(n, edges)
    forest = Forest(list(parent), {0})
    return SimOutput(graph, forest, Ordering.identity(n), {0}, params)


def generate_single_root(n: int, m: int, params: ModelParams, rng) -> SimOutput:
    """Attachment tree plus ``m - (n-1)`` uniform non-tree noise edges."""
    if params.variant is not Variant.SINGLE_ROOT:
        raise InvalidParamsError("variant mismatch")
    sim = generate_tree(n, params, rng)
    tree_edges = sim.true_forest.edge_set()
    noise = _sample_noise_pairs(n, m - (n - 1), tree_edges, rng)
    graph = LabeledGraph(n, list(tree_edges) + noise)
    return replace(sim, graph=graph)


def generate_fixed_k(n: int, m: int, params: ModelParams, rng) -> SimOutput:
    if params.variant is not Variant.FIXED_K:
        raise InvalidParamsError("variant mismatch")
    k = params.k
    if k > n:
        raise InvalidParamsError("k cannot exceed n")
    alpha, beta = params.attachment
    parent = _grow_forest_fixed_k(n, k, alpha, beta, rng)
    forest = Forest(parent, set(range(k)))
    noise = _sample_noise_pairs(n, m - (n - k), forest.edge_set(), rng)
    graph = LabeledGraph(n, list(forest.edge_set()) + noise)
    return SimOutput(graph, forest, Ordering.identity(n), set(range(k)), params)


def generate_random_k(n: int, m: int, params: ModelParams, rng) -> SimOutput:
    if params.variant is not Variant.RANDOM_K:
        raise InvalidParamsError("variant mismatch")
    alpha, beta = params.attachment
    parent, roots = _grow_forest_random_k(n, params.alpha0, alpha, beta, rng)
    forest = Forest(parent, set(roots))
    noise = _sample_noise_pairs(n, m - (n - len(roots)), forest.edge_set(), rng)
    graph = LabeledGraph(n, list(forest.edge_set()) + noise)
    return SimOutput(graph, forest, Ordering.identity(n), set(roots), params)


def seq_noise_scale(t: int, alpha_tilde: float, beta_tilde: float) -> float:
    """Normalizer of the per-arrival noise probabilities at arrival time t (1-based)."""
    return 2.0 * beta_tilde * (t - 2) + alpha_tilde * (t - 1)


def generate_seq(n: int, params: ModelParams, rng) -> SimOutput:
    """Sequential-noise growth: per arrival, one tree edge plus Bernoulli noise.

    The noise probability toward existing node j at arrival t is
    theta * (beta~ * treedeg(j) + alpha~) / seq_noise_scale(t), capped at 1.
    The deletion variant afterwards removes each latent tree edge from the
    observed graph independently with probability eta; the latent tree in the
    returned truth is kept intact.
    """
    if not params.variant.sequential:
        raise InvalidParamsError("variant mismatch")
    if n < 1:
        raise InvalidParamsError("n must be >= 1")
    alpha, beta = params.attachment
    a_t, b_t = params.noise_attachment
    theta = params.theta
    parent: list[Optional[int]] = [None] * n
    deg = np.zeros(n, dtype=np.int64)
    edges: set[tuple[int, int]] = set()
    if n >= 2:
        parent[1] = 0
        edges.add((0, 1))
        deg[0] += 1
        deg[1] += 1
    endpoints = [0, 1] if n >= 2 else []
    for t in range(2, n):
        # tree stage (weights use the tree state before this arrival)
        total = 2.0 * beta * (t - 1) + alpha * t
        r = rng.random() * total
        if r < alpha * t:
            w = int(rng.integers(t))
        else:
            w = endpoints[int(rng.integers(len(endpoints)))]
        # noise stage, also based on the pre-arrival tree degrees
        scale = seq_noise_scale(t + 1, a_t, b_t)
        q = np.minimum(theta * (b_t * deg[:t] + a_t) / scale, 1.0)
        hits = np.flatnonzero(rng.random(t) < q)
        parent[t] = w
        endpoints.append(t)
        endpoints.append(w)
        deg[w] += 1
        deg[t] += 1
        edges.add((w, t) if w < t else (t, w))
        for j in hits:
            j = int(j)
            if j == w:
                continue  # collapses with the tree edge
            edges.add((j, t) if j < t else (t, j))
    forest = Forest(list(parent), {0})
    if params.variant is Variant.SEQ_DELETE and params.eta > 0:
        for e in forest.edge_set():
            if e in edges and rng.random() < params.eta:
                edges.remove(e)
    graph = LabeledGraph(n, list(edges))
    return SimOutput(graph, forest, Ordering.identity(n), {0}, params)


def relabel_randomly(sim: SimOutput, rng) -> SimOutput:
    """Apply one uniform node-label permutation consistently to the whole truth."""
    n = sim.graph.node_count
    perm = [int(x) for x in rng.permutation(n)]
    edges = [(perm[u], perm[v]) for u, v in sim.graph.edges]
    graph = LabeledGraph(n, edges)
    parent = [None] * n
    for u, p in enumerate(sim.true_forest.parent):
        if p is not None:
            parent[perm[u]] = perm[p]
    roots = {perm[r] for r in sim.true_roots}
    ordering = Ordering([perm[u] for u in sim.true_ordering.position_to_node])
    return SimOutput(graph, Forest(parent, roots), ordering, roots, sim.params)


# -- exact forest likelihoods ------------------------------------------------------


def _log_psi(degree: int, alpha: float, beta: float) -> float:
    """log prod_{j=1}^{deg-1} (beta*j + alpha): attachment factors of a non-root."""
    return sum(math.log(beta * j + alpha) for j in range(1, degree))


def _log_psi_root(degree: int, alpha: float, beta: float) -> float:
    """Root version; the imaginary self-loop shifts the factors to j=2..deg+1."""
    return sum(math.log(beta * j + alpha) for j in range(2, degree + 2))


def log_likelihood_forest(forest: Forest, params: ModelParams,
                          ordering: Optional[Ordering] = None) -> float:
    """Exact log-probability of a time-labeled forest under its growth model.

    Without an explicit ordering, node indices are taken as arrival order.
    Zero-probability configurations (invalid history for the variant) return
    -inf rather than raising.  Sequential variants score the latent tree
    component, which coincides with the single-root formula.
    """
    n = forest.node_count
    alpha, beta = params.attachment
    if ordering is None:
        ordering = Ordering.identity(n)
    if not ordering.is_history_of(forest):
        return -math.inf
    deg = forest.degrees()
    variant = params.variant
    if variant in (Variant.SINGLE_ROOT, Variant.SEQ, Variant.SEQ_DELETE):
        if len(forest.roots) != 1:
            return -math.inf
        if ordering.position_to_node[0] not in forest.roots:
            return -math.inf
        ll = sum(_log_psi(d, alpha, beta) for d in deg)
        ll -= sum(math.log(2.0 * beta * (t - 2) + alpha * (t - 1))
                  for t in range(3, n + 1))
        return ll
    if variant is Variant.FIXED_K:
        k = params.k
        if len(forest.roots) != k:
            return -math.inf
        if set(ordering.position_to_node[:k]) != forest.roots:
            return -math.inf
        ll = 0.0
        for u in range(n):
            if u in forest.roots:
                ll += _log_psi_root(deg[u], alpha, beta)
            else:
                ll += _log_psi(deg[u], alpha, beta)
        ll -= sum(math.log((2.0 * beta + alpha) * (t - 1))
                  for t in range(k + 1, n + 1))
        return ll
    if variant is Variant.RANDOM_K:
        # every root must be the earliest arrival within its own tree, which
        # is already implied by the parent/ordering consistency check above
        a0 = params.alpha0
        k = len(forest.roots)
        ll = (k - 1) * math.log(a0)
        for u in range(n):
            if u in forest.roots:
                ll += _log_psi_root(deg[u], alpha, beta)
            else:
                ll += _log_psi(deg[u], alpha, beta)
        ll -= sum(math.log((2.0 * beta + alpha) * (t - 1) + a0)
                  for t in range(2, n + 1))
        return ll
    raise InvalidParamsError(f"unsupported variant {variant}")
