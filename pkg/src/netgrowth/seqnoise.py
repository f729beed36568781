"""Fast likelihood machinery for the sequential-noise growth models.

Under sequential noise the joint likelihood of the observed graph given an
arrival ordering and a latent spanning tree factorizes over node pairs: each
pair contributes a Bernoulli factor at the later endpoint's arrival time,
with success probability theta*(beta~*treedeg + alpha~)/scale, capped at one.
Tree pairs contribute no noise factor (a coincident noise edge collapses into
the tree edge; under the deletion variant a deleted tree edge is likewise
uninformative about noise), and in the deletion variant each tree pair adds
an eta / (1-eta) observation factor.

The samplers never need the full product, only ratios in which almost all
pair factors cancel.  Runs of "no edge" factors over time intervals with
constant tree degree collapse into Gamma-function closed forms, which is what
makes the per-move cost proportional to degrees rather than to n.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .graph import LabeledGraph
from .models import ModelParams

NEG_INF = float("-inf")

STATUS_TREE = 0
STATUS_NOISE = 1
STATUS_ABSENT = 2


def ldiff(new: float, old: float) -> float:
    """new - old with infinities resolved in favor of rejecting bad states."""
    if new == NEG_INF:
        return NEG_INF
    if old == NEG_INF:
        return math.inf
    return new - old


class SeqNoiseModel:
    """Per-instance precomputation for the noise factors at each arrival time."""

    def __init__(self, params: ModelParams, n: int):
        a, b = params.noise_attachment
        self.alpha_t = a
        self.beta_t = b
        self.theta = params.theta
        self.eta = params.eta
        self.n = n
        self.slope = 2.0 * b + a
        self.shift = 4.0 * b + a  # scale(p) = slope*p - shift for p >= 3
        self.log_scale = np.full(n + 1, NEG_INF)
        if n >= 3:
            p = np.arange(3, n + 1)
            self.log_scale[3:] = np.log(2.0 * b * (p - 2) + a * (p - 1))
        self.cum_log_scale = np.zeros(n + 2)
        np.cumsum(np.where(np.isfinite(self.log_scale), self.log_scale, 0.0),
                  out=self.cum_log_scale[1:])

    def numer(self, d: int) -> float:
        return self.theta * (self.beta_t * d + self.alpha_t)

    def log_q(self, d: int, p: int) -> float:
        """Log noise-edge probability toward a degree-d node at time p."""
        if p <= 2:
            return NEG_INF  # there is no noise stage before the third arrival
        c = self.numer(d)
        if c <= 0.0:
            return NEG_INF
        return min(math.log(c) - self.log_scale[p], 0.0)

    def log_1mq(self, d: int, p: int) -> float:
        if p <= 2:
            return 0.0
        rem = (self.slope * p - self.shift) - self.numer(d)
        if rem <= 0.0:
            return NEG_INF
        return math.log(rem) - self.log_scale[p]

    def log_1mq_interval(self, d: int, lo: int, hi: int) -> float:
        """Sum of log(1-q) over times lo..hi at constant tree degree d."""
        lo = max(lo, 3)
        if hi < lo:
            return 0.0
        c = self.numer(d)
        if c == 0.0:
            return 0.0
        r = (self.shift + c) / self.slope
        if lo <= r:
            return NEG_INF  # the cap q=1 binds somewhere: a missing edge there has probability 0
        cnt = hi - lo + 1
        return (cnt * math.log(self.slope)
                + math.lgamma(hi + 1 - r) - math.lgamma(lo - r)
                - (self.cum_log_scale[hi + 1] - self.cum_log_scale[lo]))


@dataclass
class SeqContext:
    """Mutable sampler state for sequential-noise chains.

    Positions are 0-based; model times are positions + 1.  ``parent`` holds
    the orientation induced by the ordering (the unique earlier tree
    neighbor).  The latent tree may use non-graph edges only in the deletion
    variant.
    """

    graph: LabeledGraph
    model: SeqNoiseModel
    perm: list[int]
    pos: list[int]
    tree_nbrs: list[set[int]]
    parent: list[Optional[int]]

    @property
    def n(self) -> int:
        return len(self.perm)

    def time(self, u: int) -> int:
        return self.pos[u] + 1

    def node_at(self, p: int) -> int:
        return self.perm[p - 1]

    def deg_at(self, x: int, p: int) -> int:
        """Tree degree of x just before time p (neighbors arrived by p-1)."""
        t_limit = p - 1
        return sum(1 for z in self.tree_nbrs[x] if self.pos[z] + 1 <= t_limit)

    def status(self, x: int, y: int) -> int:
        if y in self.tree_nbrs[x]:
            return STATUS_TREE
        if self.graph.has_edge(x, y):
            return STATUS_NOISE
        return STATUS_ABSENT

    def pair_log_factor(self, x: int, y: int, p: int, d: int) -> float:
        """Noise factor of pair (x, y) with later time p and earlier degree d."""
        s = self.status(x, y)
        if s == STATUS_TREE:
            return 0.0
        if s == STATUS_NOISE:
            return self.model.log_q(d, p)
        return self.model.log_1mq(d, p)

    def rebuild_parents(self) -> None:
        """Re-orient the tree so each node's parent is its earlier tree neighbor."""
        pos = self.pos
        for u in range(self.n):
            best = None
            for z in self.tree_nbrs[u]:
                if pos[z] < pos[u] and (best is None or pos[z] < pos[best]):
                    best = z
            self.parent[u] = best


def _node_range_scan(ctx: SeqContext, x: int, lo: int, hi: int,
                     exclude: tuple[int, ...]):
    """Shared scan over times lo..hi of node x's pair factors.

    Yields blanket sub-intervals (d, seg_lo, seg_hi) of constant degree on
    positions holding no graph- or tree-neighbor of x, and special entries
    (d, p, status) at neighbor positions.  ``exclude`` drops nodes both as
    partners and from x's degree timeline.
    """
    d0 = 0
    bumps: list[int] = []
    for z in ctx.tree_nbrs[x]:
        if z in exclude:
            continue
        pe = ctx.pos[z] + 2  # first time at which z counts toward x's degree
        if pe <= lo:
            d0 += 1
        elif pe <= hi:
            bumps.append(pe)
    bumps.sort()
    specials: list[tuple[int, int]] = []
    for y in ctx.graph.adjacency[x]:
        p = ctx.pos[y] + 1
        if lo <= p <= hi and y not in exclude:
            s = STATUS_TREE if y in ctx.tree_nbrs[x] else STATUS_NOISE
            specials.append((p, s))
    for z in ctx.tree_nbrs[x]:
        p = ctx.pos[z] + 1
        if lo <= p <= hi and z not in exclude and not ctx.graph.has_edge(x, z):
            specials.append((p, STATUS_TREE))
    specials.sort()
    segments = []
    special_out = []
    cur = lo
    bi = 0
    for p, s in specials + [(hi + 1, -1)]:
        while cur < p:
            nxt_bump = bumps[bi] if bi < len(bumps) else hi + 1
            if nxt_bump <= cur:
                bi += 1
                continue
            seg_hi = min(nxt_bump - 1, p - 1, hi)
            if seg_hi >= cur:
                segments.append((d0 + bi, cur, seg_hi))
            cur = seg_hi + 1
        if p > hi:
            break
        while bi < len(bumps) and bumps[bi] <= p:
            bi += 1
        special_out.append((d0 + bi, p, s))
        cur = p + 1
    return segments, special_out


def node_range_logsum(ctx: SeqContext, x: int, lo: int, hi: int,
                      delta: int = 0, exclude: tuple[int, ...] = ()) -> float:
    """Sum of pair log factors of node x as the earlier endpoint over lo..hi.

    ``delta`` shifts x's tree-degree timeline uniformly, as candidate trees
    add or drop one child of x for the whole range.
    """
    if hi < lo:
        return 0.0
    model = ctx.model
    segments, specials = _node_range_scan(ctx, x, lo, hi, exclude)
    total = 0.0
    for d, a, b in segments:
        total += model.log_1mq_interval(d + delta, a, b)
        if total == NEG_INF:
            return NEG_INF
    for d, p, s in specials:
        if s == STATUS_NOISE:
            total += model.log_q(d + delta, p)
        # tree pairs contribute no noise factor
        if total == NEG_INF:
            return NEG_INF
    return total


def node_range_logsum_pair(ctx: SeqContext, x: int, lo: int, hi: int,
                           exclude: tuple[int, ...] = ()) -> tuple[float, float]:
    """(sum at base degrees, sum at base+1) over lo..hi, sharing one scan."""
    if hi < lo:
        return 0.0, 0.0
    model = ctx.model
    segments, specials = _node_range_scan(ctx, x, lo, hi, exclude)
    t0 = 0.0
    t1 = 0.0
    for d, a, b in segments:
        if t0 != NEG_INF:
            t0 += model.log_1mq_interval(d, a, b)
        if t1 != NEG_INF:
            t1 += model.log_1mq_interval(d + 1, a, b)
    for d, p, s in specials:
        if s == STATUS_NOISE:
            if t0 != NEG_INF:
                t0 += model.log_q(d, p)
            if t1 != NEG_INF:
                t1 += model.log_q(d + 1, p)
    return t0, t1


def noise_log_likelihood(ctx: SeqContext) -> float:
    """Full log P(noise pattern | ordering, tree), excluding deletion factors."""
    total = 0.0
    for x in range(ctx.n):
        total += node_range_logsum(ctx, x, ctx.pos[x] + 2, ctx.n)
        if total == NEG_INF:
            return NEG_INF
    return total


def deletion_log_likelihood(ctx: SeqContext) -> float:
    eta = ctx.model.eta
    if eta == 0.0:
        return 0.0
    total = 0.0
    for u in range(ctx.n):
        p = ctx.parent[u]
        if p is not None:
            total += math.log(1.0 - eta) if ctx.graph.has_edge(u, p) else math.log(eta)
    return total


# -- transposition moves ------------------------------------------------------------


def swap_is_valid(ctx: SeqContext, j: int, k: int) -> bool:
    """Whether exchanging the occupants of times j < k keeps a valid history.

    Valid iff no tree neighbor of the earlier node sits in (j, k] and no tree
    neighbor of the later node sits in [j, k).
    """
    u = ctx.node_at(j)
    v = ctx.node_at(k)
    pos = ctx.pos
    for z in ctx.tree_nbrs[u]:
        if j < pos[z] + 1 <= k:
            return False
    for z in ctx.tree_nbrs[v]:
        if j <= pos[z] + 1 < k:
            return False
    return True


def swap_log_ratio(ctx: SeqContext, j: int, k: int) -> float:
    """Log likelihood ratio of swapping the occupants of times j < k (both >= 2).

    Only pairs touching the two swapped nodes and their parents change; the
    blanket "no edge" factors of uninvolved earlier nodes cancel between the
    two swapped positions, leaving O(degree) work plus interval products for
    the parents' degree shift across (j, k].
    """
    u = ctx.node_at(j)
    v = ctx.node_at(k)
    a = ctx.parent[u]
    b = ctx.parent[v]
    pos = ctx.pos
    model = ctx.model
    lr_new = 0.0
    lr_old = 0.0

    special = {u, v, a, b}
    seen: set[int] = set()
    for y in list(ctx.graph.adjacency[u]) + list(ctx.graph.adjacency[v]):
        if y in special or y in seen:
            continue
        seen.add(y)
        p = pos[y] + 1
        if p >= k:
            continue
        su_noise = ctx.graph.has_edge(u, y)
        sv_noise = ctx.graph.has_edge(v, y)
        if p < j:
            dy_j = ctx.deg_at(y, j)
            dy_k = ctx.deg_at(y, k)
            if su_noise:
                lr_new += model.log_q(dy_k, k)
                lr_old += model.log_q(dy_j, j)
            else:
                lr_new += model.log_1mq(dy_k, k)
                lr_old += model.log_1mq(dy_j, j)
            if sv_noise:
                lr_new += model.log_q(dy_j, j)
                lr_old += model.log_q(dy_k, k)
            else:
                lr_new += model.log_1mq(dy_j, j)
                lr_old += model.log_1mq(dy_k, k)
        else:  # j < p < k
            dy_k = ctx.deg_at(y, k)
            if su_noise:
                lr_new += model.log_q(dy_k, k)
                lr_old += model.log_q(1, p)
            else:
                lr_new += model.log_1mq(dy_k, k)
                lr_old += model.log_1mq(1, p)
            if sv_noise:
                lr_new += model.log_q(1, p)
                lr_old += model.log_q(dy_k, k)
            else:
                lr_new += model.log_1mq(1, p)
                lr_old += model.log_1mq(dy_k, k)

    if a != b:
        # the earlier node's parent loses that child over (j, k]; the later
        # node's parent gains one
        a0, a1 = node_range_logsum_pair(ctx, a, j + 1, k - 1, exclude=(u, v))
        lr_new += a0
        lr_old += a1
        b0, b1 = node_range_logsum_pair(ctx, b, j + 1, k - 1, exclude=(u, v))
        lr_new += b1
        lr_old += b0
        s_av = ctx.status(a, v)
        if s_av != STATUS_TREE:
            f = model.log_q if s_av == STATUS_NOISE else model.log_1mq
            lr_new += f(ctx.deg_at(a, j), j)      # pair (a, v) moves to time j
            lr_old += f(ctx.deg_at(a, k), k)
        s_bu = ctx.status(b, u)
        if s_bu != STATUS_TREE:
            f = model.log_q if s_bu == STATUS_NOISE else model.log_1mq
            lr_new += f(ctx.deg_at(b, k) + 1, k)  # pair (b, u) moves to time k
            lr_old += f(ctx.deg_at(b, j), j)
    return ldiff(lr_new, lr_old)


def apply_swap(ctx: SeqContext, j: int, k: int) -> None:
    u = ctx.node_at(j)
    v = ctx.node_at(k)
    ctx.perm[j - 1], ctx.perm[k - 1] = v, u
    ctx.pos[u], ctx.pos[v] = k - 1, j - 1


# -- root-shuffle move --------------------------------------------------------------


def _prefix_log_likelihood(ctx: SeqContext, prefix_nodes: list[int],
                           pos_of: dict[int, int]) -> float:
    """Noise factors of all pairs whose later endpoint falls in the prefix.

    ``pos_of`` gives candidate 0-based positions for the prefix nodes; other
    nodes keep their current positions.  Returns -inf for invalid histories.
    """
    total = 0.0
    by_pos = sorted(prefix_nodes, key=lambda u: pos_of[u])
    for i, y in enumerate(by_pos):
        p = pos_of[y] + 1
        earlier = 0
        for z in ctx.tree_nbrs[y]:
            zp = pos_of.get(z, ctx.pos[z]) + 1
            if zp < p:
                earlier += 1
        if p == 1:
            if earlier:
                return NEG_INF
            continue
        if earlier != 1:
            return NEG_INF
        for x in by_pos[:i]:
            d = 0
            for z in ctx.tree_nbrs[x]:
                zp = pos_of.get(z, ctx.pos[z]) + 1
                if zp <= p - 1:
                    d += 1
            total += ctx.pair_log_factor(x, y, p, d)
    return total


def shuffle_log_ratio(ctx: SeqContext, new_prefix: list[int]) -> float:
    """Log ratio for re-shuffling the first len(new_prefix) arrival slots."""
    k0 = len(new_prefix)
    cur_prefix = ctx.perm[:k0]
    cur_pos = {u: ctx.pos[u] for u in cur_prefix}
    new_pos = {u: i for i, u in enumerate(new_prefix)}
    new_ll = _prefix_log_likelihood(ctx, new_prefix, new_pos)
    if new_ll == NEG_INF:
        return NEG_INF
    cur_ll = _prefix_log_likelihood(ctx, cur_prefix, cur_pos)
    return ldiff(new_ll, cur_ll)


def apply_shuffle(ctx: SeqContext, new_prefix: list[int]) -> None:
    for i, u in enumerate(new_prefix):
        ctx.perm[i] = u
        ctx.pos[u] = i
    # orientation within the prefix may flip
    for u in new_prefix:
        best = None
        for z in ctx.tree_nbrs[u]:
            if ctx.pos[z] < ctx.pos[u] and (best is None or ctx.pos[z] < ctx.pos[best]):
                best = z
        ctx.parent[u] = best


# -- tree resampling ----------------------------------------------------------------


def parent_log_weights(ctx: SeqContext, t: int, alpha: float, beta: float
                       ) -> tuple[list[int], list[float]]:
    """Unnormalized log weights for regrafting the node arriving at time t.

    Candidates are the earlier graph neighbors, or every earlier node when
    tree-edge deletion is possible.  Each weight combines the attachment
    prior, the candidate's changed noise factors, and, under deletion, the
    eta-observation factor for the proposed tree pair.
    """
    x = ctx.node_at(t)
    old_parent = ctx.parent[x]
    model = ctx.model
    n = ctx.n
    with_deletion = model.eta > 0.0
    if with_deletion:
        candidates = list(ctx.perm[:t - 1])
    else:
        candidates = [w for w in ctx.graph.adjacency[x] if ctx.pos[w] + 1 < t]
    log_w: list[float] = []
    for w in candidates:
        dbase = ctx.deg_at(w, t)
        full_deg = len(ctx.tree_nbrs[w]) - (1 if w == old_parent else 0)
        lw = math.log(beta * full_deg + alpha) if beta * full_deg + alpha > 0 else NEG_INF
        # pair (w, x) at time t is a tree edge under this candidate; under
        # any other candidate it is a noise edge or an absent pair
        if ctx.graph.has_edge(w, x):
            lw -= model.log_q(dbase, t)
            if with_deletion:
                lw += math.log(1.0 - model.eta)
        else:
            rel = model.log_1mq(dbase, t)
            lw = lw - rel if rel != NEG_INF else math.inf
            lw += math.log(model.eta)  # only reachable when deletion is on
        # later pairs of w see its degree raised by one
        s0, s1 = node_range_logsum_pair(ctx, w, t + 1, n, exclude=(x,))
        lw += ldiff(s1, s0)
        log_w.append(lw)
    return candidates, log_w


def resample_parent(ctx: SeqContext, t: int, alpha: float, beta: float, rng) -> None:
    x = ctx.node_at(t)
    candidates, log_w = parent_log_weights(ctx, t, alpha, beta)
    arr = np.array(log_w)
    finite = np.isfinite(arr)
    if not finite.any():
        return
    arr = arr - arr[finite].max()
    w = np.where(finite, np.exp(np.where(finite, arr, 0.0)), 0.0)
    w /= w.sum()
    choice = candidates[int(rng.choice(len(candidates), p=w))]
    old = ctx.parent[x]
    if choice == old:
        return
    ctx.tree_nbrs[x].discard(old)
    ctx.tree_nbrs[old].discard(x)
    ctx.tree_nbrs[x].add(choice)
    ctx.tree_nbrs[choice].add(x)
    ctx.parent[x] = choice


def tree_sweep(ctx: SeqContext, alpha: float, beta: float, rng) -> None:
    """Resample every node's parent in arrival order (times 3..n)."""
    for t in range(3, ctx.n + 1):
        resample_parent(ctx, t, alpha, beta, rng)
