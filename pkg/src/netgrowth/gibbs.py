"""Two-stage Gibbs samplers over (arrival ordering, latent spanning forest).

Stage A resamples the ordering exactly given the forest (Erdos-Renyi noise
variants) or advances it by Metropolis transpositions plus a root shuffle
(sequential-noise variants).  Stage B resamples every node's parent given the
ordering.  A collapsed alternative resamples only root sets and regrafts
whole subtrees.  Chains run in at least two independent replicas and stop
when the Hellinger distance between their running root distributions drops
below a variant-dependent threshold.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import seqnoise
from .graph import DisconnectedGraphError, Forest, LabeledGraph, Ordering, subtree_sizes, uniform_spanning_forest
from .history import (reroot_to_ordering, root_membership_probabilities,
                      root_probabilities, sample_history)
from .inference import hellinger
from .models import ModelParams, Variant


@dataclass
class ChainConfig:
    """Sampler schedule and convergence settings."""

    burn_in: int = 50
    max_sweeps: int = 10_000
    convergence_tol: Optional[float] = None  # default 0.1 single root, 0.01 multi root
    num_chains: int = 2
    collapsed: bool = False
    transpositions_per_sweep: Optional[int] = None  # seq: default n
    root_shuffle_len: int = 5
    sample_alpha0: bool = False
    seq_sample_params: bool = False
    check_every: int = 1
    debug_validate: bool = False

    def __post_init__(self):
        if self.burn_in >= self.max_sweeps:
            raise ValueError("burn_in must be smaller than max_sweeps")
        if self.convergence_tol is not None and self.convergence_tol < 0:
            raise ValueError("convergence_tol must be nonnegative (0 disables early stop)")
        if self.num_chains < 2:
            raise ValueError("at least two chains are required for the convergence check")

    def tol_for(self, params: ModelParams) -> float:
        if self.convergence_tol is not None:
            return self.convergence_tol
        return 0.01 if params.variant.multi_root else 0.1


@dataclass
class ChainState:
    """One chain's mutable state; never shared across chains."""

    graph: LabeledGraph
    params: ModelParams
    rng: np.random.Generator
    forest: Forest
    ordering: Optional[Ordering]
    sweep: int = 0
    forest_deg: list[int] = field(default_factory=list)
    seq_ctx: Optional[seqnoise.SeqContext] = None

    def validate(self) -> None:
        self.forest.validate()
        if self.ordering is not None:
            self.ordering.validate()
            if not self.ordering.is_history_of(self.forest):
                raise AssertionError("ordering is not a history of the forest")


def init_chain_state(graph: LabeledGraph, params: ModelParams,
                     rng: np.random.Generator, collapsed: bool = False) -> ChainState:
    """Overdispersed initialization: uniform spanning forest + uniform history."""
    n = graph.node_count
    variant = params.variant
    forest = uniform_spanning_forest(graph, rng)
    if len(forest.roots) > 1:
        if variant is Variant.SINGLE_ROOT or variant is Variant.FIXED_K or variant is Variant.SEQ:
            raise DisconnectedGraphError(
                f"{variant.value} variant requires a connected graph")
        if variant is Variant.SEQ_DELETE:
            # stitch components with latent non-graph edges (allowed when eta > 0)
            if params.eta == 0:
                raise DisconnectedGraphError("eta = 0 cannot explain a disconnected graph")
            anchor, *others = sorted(forest.roots)
            for r in others:
                forest.parent[r] = anchor
            forest.roots = {anchor}

    if variant is Variant.FIXED_K:
        single = ModelParams.single_root(*params.attachment)
        ordering = sample_history(forest, single, rng)
        reroot_to_ordering(forest, ordering)
        for u in ordering.position_to_node[1:params.k]:
            forest.parent[u] = None
            forest.roots.add(u)
    else:
        init_params = params
        if variant.sequential:
            init_params = ModelParams.single_root(*params.attachment)
        ordering = sample_history(forest, init_params, rng)
        reroot_to_ordering(forest, ordering)

    state = ChainState(graph, params, rng, forest, ordering)
    state.forest_deg = forest.degrees()
    if variant.sequential:
        model = seqnoise.SeqNoiseModel(params, n)
        tree_nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, p in enumerate(forest.parent):
            if p is not None:
                tree_nbrs[u].add(p)
                tree_nbrs[p].add(u)
        state.seq_ctx = seqnoise.SeqContext(
            graph, model, list(ordering.position_to_node),
            list(ordering.node_to_position), tree_nbrs, list(forest.parent))
    if collapsed:
        state.ordering = None
    return state


# -- stage B: forest sweeps conditioned on the ordering ------------------------------


def sweep_ordering(state: ChainState) -> None:
    """Stage A for ER-noise variants: exact redraw of the ordering given the forest."""
    ordering = sample_history(state.forest, state.params, state.rng)
    reroot_to_ordering(state.forest, ordering)
    state.ordering = ordering


def sweep_forest_single(state: ChainState) -> None:
    """Resample each node's parent among earlier graph neighbors (single root)."""
    alpha, beta = state.params.attachment
    perm = state.ordering.position_to_node
    pos = state.ordering.node_to_position
    parent = state.forest.parent
    deg = state.forest_deg
    adj = state.graph.adjacency
    rng = state.rng
    uniform = beta == 0.0
    for t in range(1, len(perm)):
        u = perm[t]
        old = parent[u]
        deg[old] -= 1
        deg[u] -= 1
        cands = [w for w in adj[u] if pos[w] < t]
        if len(cands) == 1:
            w = cands[0]
        elif uniform:
            w = cands[int(rng.integers(len(cands)))]
        else:
            weights = [beta * deg[w] + alpha for w in cands]
            r = rng.random() * math.fsum(weights)
            acc = 0.0
            w = cands[-1]
            for c, wt in zip(cands, weights):
                acc += wt
                if r < acc:
                    w = c
                    break
        parent[u] = w
        deg[w] += 1
        deg[u] += 1


def sweep_forest_fixed_k(state: ChainState) -> None:
    """Fixed-K parent resampling; roots (first K arrivals) carry a 2*beta bonus."""
    alpha, beta = state.params.attachment
    k = state.params.k
    perm = state.ordering.position_to_node
    pos = state.ordering.node_to_position
    parent = state.forest.parent
    deg = state.forest_deg
    adj = state.graph.adjacency
    rng = state.rng
    for t in range(k, len(perm)):
        u = perm[t]
        old = parent[u]
        deg[old] -= 1
        deg[u] -= 1
        cands = [w for w in adj[u] if pos[w] < t]
        weights = [beta * deg[w] + (2.0 * beta if pos[w] < k else 0.0) + alpha
                   for w in cands]
        r = rng.random() * math.fsum(weights)
        acc = 0.0
        w = cands[-1]
        for c, wt in zip(cands, weights):
            acc += wt
            if r < acc:
                w = c
                break
        parent[u] = w
        deg[w] += 1
        deg[u] += 1


def sweep_forest_random_k(state: ChainState) -> None:
    """Random-K parent resampling; nodes may become roots or stop being roots.

    The become-root weight is alpha0 times the exact binomial ratio from the
    Erdos-Renyi term (computed in integer arithmetic) times the ratio of root
    to non-root attachment factors for the node's own subsequent degree
    factors; the latter reduces to 1 under uniform attachment.
    """
    params = state.params
    alpha, beta = params.attachment
    alpha0 = params.alpha0
    n = state.graph.node_count
    m = state.graph.edge_count
    total_pairs = n * (n - 1) // 2
    perm = state.ordering.position_to_node
    pos = state.ordering.node_to_position
    parent = state.forest.parent
    roots = state.forest.roots
    deg = state.forest_deg
    adj = state.graph.adjacency
    rng = state.rng
    for t in range(1, n):
        u = perm[t]
        if u in roots:
            roots.discard(u)
        else:
            old = parent[u]
            deg[old] -= 1
            deg[u] -= 1
            parent[u] = None
        k_new = len(roots) + 1
        cands = [w for w in adj[u] if pos[w] < t]
        # attaching u leaves k_new - 1 trees; infeasible if that would
        # require a negative noise-edge count
        if not cands or m - n + k_new == 0:
            roots.add(u)
            continue
        w_empty = (alpha0
                   * ((m - n + k_new) / (total_pairs - n + k_new))
                   * ((beta * (deg[u] + 1) + alpha) / (beta + alpha)))
        weights = [beta * deg[w] + (2.0 * beta if w in roots else 0.0) + alpha
                   for w in cands]
        r = rng.random() * (w_empty + math.fsum(weights))
        if r < w_empty:
            roots.add(u)
            continue
        r -= w_empty
        acc = 0.0
        w = cands[-1]
        for c, wt in zip(cands, weights):
            acc += wt
            if r < acc:
                w = c
                break
        parent[u] = w
        deg[w] += 1
        deg[u] += 1


# -- collapsed sweeps ----------------------------------------------------------------


def _resample_roots_collapsed(state: ChainState) -> None:
    """Stage A of the collapsed sampler: redraw each tree's root and re-orient."""
    forest = state.forest
    params = state.params
    rng = state.rng
    from .history import _log_table, _root_log_weights, _tree_log_h, _tree_structures

    children, size = _tree_structures(forest)
    table = _log_table(forest.node_count)
    deg = forest.degrees()
    new_roots = []
    for r in sorted(forest.roots):
        log_h = _tree_log_h(forest, r, children, size, table)
        weights = _root_log_weights(log_h, deg, params)
        nodes = list(weights.keys())
        vals = np.array([weights[u] for u in nodes])
        vals -= vals.max()
        p = np.exp(vals)
        p /= p.sum()
        new_roots.append(nodes[int(rng.choice(len(nodes), p=p))])
    # re-orient each tree toward its new root
    for r_new in new_roots:
        path = []
        u = r_new
        while u is not None:
            path.append(u)
            u = forest.parent[u]
        for child, par in zip(reversed(path[:-1]), reversed(path[1:])):
            forest.parent[par] = child
        forest.parent[r_new] = None
    forest.roots = set(new_roots)


def _collect_subtree(children: list[list[int]], u: int) -> set[int]:
    out = {u}
    stack = [u]
    while stack:
        x = stack.pop()
        for c in children[x]:
            out.add(c)
            stack.append(c)
    return out


def collapsed_sweep(state: ChainState) -> None:
    """Root redraw plus subtree regrafting, marginalizing full orderings.

    Each non-root node's subtree is grafted onto a graph neighbor outside the
    subtree with weight prod_{ancestors v} |t_v|/(|t_v|+|t_u|) times the
    attachment factor; in the random-K variant a node may instead become (or
    stay) a root with the same become-root weight as the full sampler.
    """
    _resample_roots_collapsed(state)
    forest = state.forest
    params = state.params
    variant = params.variant
    alpha, beta = params.attachment
    rng = state.rng
    n = forest.node_count
    m = state.graph.edge_count
    total_pairs = n * (n - 1) // 2
    random_k = variant is Variant.RANDOM_K
    size = subtree_sizes(forest)
    deg = forest.degrees()
    children = forest.children_lists()

    for u in range(n):
        if u in forest.roots:
            if not random_k:
                continue
            if len(forest.roots) == 1:
                continue
            forest.roots.discard(u)
        else:
            old = forest.parent[u]
            children[old].remove(u)
            deg[old] -= 1
            deg[u] -= 1
            forest.parent[u] = None
            s_u = size[u]
            v = old
            while v is not None:
                size[v] -= s_u
                v = forest.parent[v]
        s_u = size[u]
        blocked = _collect_subtree(children, u)
        cands = [w for w in state.graph.adjacency[u] if w not in blocked]
        weights = []
        root_bonus = 2.0 * beta if variant.multi_root else 0.0
        for w in cands:
            if w in forest.roots and not variant.multi_root and deg[w] == 0:
                base = 1.0  # psi(1)/psi(0): a bare root is a unit-weight target
            else:
                base = beta * deg[w] + (root_bonus if w in forest.roots else 0.0) + alpha
            lw = math.log(base)
            v = w
            while v is not None:
                if random_k or v not in forest.roots:
                    lw += math.log(size[v]) - math.log(size[v] + s_u)
                v = forest.parent[v]
            weights.append(lw)
        if random_k:
            k_new = len(forest.roots) + 1
            if not cands or m - n + k_new == 0:
                weights, cands = [0.0], [None]  # attaching is infeasible
            else:
                w_empty = (math.log(params.alpha0)
                           + math.log(m - n + k_new) - math.log(total_pairs - n + k_new)
                           + math.log(beta * (deg[u] + 1) + alpha) - math.log(beta + alpha))
                weights.append(w_empty)
                cands.append(None)
        arr = np.array(weights)
        arr -= arr.max()
        p = np.exp(arr)
        p /= p.sum()
        w = cands[int(rng.choice(len(cands), p=p))]
        if w is None:
            forest.roots.add(u)
            continue
        forest.parent[u] = w
        children[w].append(u)
        deg[w] += 1
        deg[u] += 1
        v = w
        while v is not None:
            size[v] += s_u
            v = forest.parent[v]


# -- sequential-noise sweeps ---------------------------------------------------------


def seq_transposition_update(state: ChainState) -> bool:
    """One Metropolis transposition of two arrival slots (never slot 1)."""
    ctx = state.seq_ctx
    n = ctx.n
    if n < 4:
        return False
    rng = state.rng
    j = int(rng.integers(2, n + 1))
    k = int(rng.integers(2, n + 1))
    if j == k:
        return False
    if j > k:
        j, k = k, j
    if not seqnoise.swap_is_valid(ctx, j, k):
        return False
    log_ratio = seqnoise.swap_log_ratio(ctx, j, k)
    if log_ratio >= 0 or rng.random() < math.exp(log_ratio):
        seqnoise.apply_swap(ctx, j, k)
        return True
    return False


def seq_root_shuffle_update(state: ChainState, k0: Optional[int] = None) -> bool:
    """Metropolis shuffle of the first k0 arrival slots (may move the root)."""
    ctx = state.seq_ctx
    rng = state.rng
    if k0 is None:
        k0 = 5
    k0 = min(k0, ctx.n)
    if k0 < 2:
        return False
    cur = ctx.perm[:k0]
    new_prefix = [cur[int(i)] for i in rng.permutation(k0)]
    log_ratio = seqnoise.shuffle_log_ratio(ctx, new_prefix)
    if log_ratio == seqnoise.NEG_INF:
        return False
    if log_ratio >= 0 or rng.random() < math.exp(log_ratio):
        seqnoise.apply_shuffle(ctx, new_prefix)
        return True
    return False


def seq_sweep_tree(state: ChainState) -> None:
    alpha, beta = state.params.attachment
    seqnoise.tree_sweep(state.seq_ctx, alpha, beta, state.rng)


def _sync_seq_views(state: ChainState) -> None:
    ctx = state.seq_ctx
    state.ordering = Ordering(list(ctx.perm), list(ctx.pos))
    state.forest = Forest(list(ctx.parent), {ctx.perm[0]})


# -- chain orchestration ---------------------------------------------------------------


def sweep(state: ChainState, config: ChainConfig) -> None:
    """One full Gibbs sweep (stage A then stage B) in the configured mode."""
    params = state.params
    if params.variant.sequential:
        ctx = state.seq_ctx
        n_moves = config.transpositions_per_sweep or ctx.n
        for _ in range(n_moves):
            seq_transposition_update(state)
        seq_root_shuffle_update(state, config.root_shuffle_len)
        seq_sweep_tree(state)
        if config.seq_sample_params:
            from .estimation import seq_param_update
            seq_param_update(state)
        _sync_seq_views(state)
    elif config.collapsed:
        collapsed_sweep(state)
    else:
        sweep_ordering(state)
        if params.variant is Variant.SINGLE_ROOT:
            sweep_forest_single(state)
        elif params.variant is Variant.FIXED_K:
            sweep_forest_fixed_k(state)
        else:
            sweep_forest_random_k(state)
        if params.variant is Variant.RANDOM_K and config.sample_alpha0:
            from .estimation import sample_alpha0
            new_a0 = sample_alpha0(params.alpha0, len(state.forest.roots),
                                   state.graph.node_count, params, state.rng)
            state.params = replace(params, alpha0=new_a0)
    state.sweep += 1
    if config.debug_validate:
        state.validate()


def chain_root_distribution(state: ChainState) -> np.ndarray:
    """Per-sweep analytic root probabilities, the unit of posterior averaging."""
    if state.params.variant.multi_root:
        return root_membership_probabilities(state.forest, state.params)
    return root_probabilities(state.forest, state.params)


@dataclass
class RunDiagnostics:
    converged: bool
    sweeps: int
    final_distance: float
    wall_time_s: float
    num_chains: int
    samples_per_chain: int


@dataclass
class RunResult:
    root_distribution: np.ndarray
    diagnostics: RunDiagnostics
    states: list[ChainState]
    alpha0_mean: Optional[float] = None


def run_chains(graph: LabeledGraph, params: ModelParams,
               config: Optional[ChainConfig] = None, seed: int = 0,
               collector: Optional[Callable[[int, int, ChainState], None]] = None
               ) -> RunResult:
    """Run replicated chains to convergence and average the root distributions.

    ``collector(chain_index, sweep_index, state)`` is invoked after every
    post-burn-in sweep; the state is live and must be copied if retained.
    """
    if config is None:
        config = ChainConfig()
    tol = config.tol_for(params)
    t0 = time.perf_counter()
    seeds = np.random.SeedSequence(seed).spawn(config.num_chains)
    states = [init_chain_state(graph, params, np.random.default_rng(s),
                               collapsed=config.collapsed)
              for s in seeds]
    n = graph.node_count
    sums = [np.zeros(n) for _ in states]
    count = 0
    dist = math.inf
    converged = False
    alpha0_sum = 0.0
    for sweep_idx in range(1, config.max_sweeps + 1):
        for ci, st in enumerate(states):
            sweep(st, config)
            if sweep_idx > config.burn_in:
                sums[ci] += chain_root_distribution(st)
                if collector is not None:
                    collector(ci, sweep_idx, st)
        if sweep_idx > config.burn_in:
            count += 1
            if config.sample_alpha0 and params.variant is Variant.RANDOM_K:
                alpha0_sum += sum(st.params.alpha0 for st in states) / len(states)
            if count % config.check_every == 0:
                p = sums[0] / sums[0].sum()
                q = sums[1] / sums[1].sum()
                dist = hellinger(p, q)
                if dist < tol:
                    converged = True
                    break
    mean = np.zeros(n)
    if count:
        for s in sums:
            mean += s / count
        mean /= len(states)
    diag = RunDiagnostics(converged, sweep_idx, dist,
                          time.perf_counter() - t0, len(states), count)
    alpha0_mean = alpha0_sum / count if (count and config.sample_alpha0) else None
    return RunResult(mean, diag, states, alpha0_mean)
