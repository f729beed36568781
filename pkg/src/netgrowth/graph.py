"""Graph, forest, and ordering structures shared by all samplers.

Node labels are arbitrary strings at I/O boundaries; everything on the hot
path works with dense integer indices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence


class EdgeListParseError(ValueError):
    """Raised when an edge-list line cannot be parsed."""

    def __init__(self, line_number: int, line: str, reason: str):
        self.line_number = line_number
        super().__init__(f"line {line_number}: {reason}: {line!r}")


class DisconnectedGraphError(ValueError):
    """Raised when a variant requires a connected input graph."""


def _canon(u: int, v: int) -> tuple[int, int]:
    return (u, v) if u < v else (v, u)


class LabeledGraph:
    """Undirected simple graph over dense node indices with external labels.

    Immutable after construction; safe to share across concurrent chains.
    """

    __slots__ = (
        "node_count",
        "edges",
        "adjacency",
        "labels",
        "label_to_index",
        "self_loops_dropped",
        "duplicates_collapsed",
    )

    def __init__(
        self,
        node_count: int,
        edges: Iterable[tuple[int, int]],
        labels: Optional[Sequence[str]] = None,
        self_loops_dropped: int = 0,
        duplicates_collapsed: int = 0,
    ):
        self.node_count = node_count
        edge_set: set[tuple[int, int]] = set()
        adjacency: list[list[int]] = [[] for _ in range(node_count)]
        for u, v in edges:
            if u == v:
                self_loops_dropped += 1
                continue
            e = _canon(u, v)
            if e in edge_set:
                duplicates_collapsed += 1
                continue
            edge_set.add(e)
            adjacency[e[0]].append(e[1])
            adjacency[e[1]].append(e[0])
        self.edges = frozenset(edge_set)
        self.adjacency = adjacency
        if labels is None:
            labels = [str(i) for i in range(node_count)]
        if len(labels) != node_count:
            raise ValueError("labels must have one entry per node")
        self.labels = list(labels)
        self.label_to_index = {lab: i for i, lab in enumerate(self.labels)}
        if len(self.label_to_index) != node_count:
            raise ValueError("labels must be unique")
        self.self_loops_dropped = self_loops_dropped
        self.duplicates_collapsed = duplicates_collapsed

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def degree(self, u: int) -> int:
        return len(self.adjacency[u])

    def neighbors(self, u: int) -> list[int]:
        return self.adjacency[u]

    def has_edge(self, u: int, v: int) -> bool:
        return _canon(u, v) in self.edges

    def connected_components(self) -> list[list[int]]:
        seen = [False] * self.node_count
        comps = []
        for s in range(self.node_count):
            if seen[s]:
                continue
            comp = [s]
            seen[s] = True
            stack = [s]
            while stack:
                u = stack.pop()
                for w in self.adjacency[u]:
                    if not seen[w]:
                        seen[w] = True
                        comp.append(w)
                        stack.append(w)
            comps.append(comp)
        return comps

    def is_connected(self) -> bool:
        return self.node_count <= 1 or len(self.connected_components()) == 1

    def __repr__(self) -> str:
        return f"LabeledGraph(n={self.node_count}, m={self.edge_count})"


def load_edge_list(text: str) -> LabeledGraph:
    """Parse whitespace-separated label pairs, one edge per line.

    Blank lines and lines starting with '#' are ignored.  Self-loops are
    dropped and duplicate edges collapsed; both are counted on the returned
    graph rather than raised.
    """
    labels: list[str] = []
    index: dict[str, int] = {}
    raw_edges: list[tuple[int, int]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        tokens = stripped.split()
        if len(tokens) != 2:
            raise EdgeListParseError(lineno, line, "expected exactly two tokens")
        pair = []
        for tok in tokens:
            if tok not in index:
                index[tok] = len(labels)
                labels.append(tok)
            pair.append(index[tok])
        raw_edges.append((pair[0], pair[1]))
    return LabeledGraph(len(labels), raw_edges, labels=labels)


def load_edge_list_file(path) -> LabeledGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return load_edge_list(fh.read())


def dump_edge_list(graph: LabeledGraph) -> str:
    lines = [f"{graph.labels[u]} {graph.labels[v]}" for u, v in sorted(graph.edges)]
    return "\n".join(lines) + ("\n" if lines else "")


@dataclass
class Forest:
    """Spanning forest stored as parent assignments plus an explicit root set.

    ``parent[u] is None`` exactly when ``u`` is a root.  Mutable, single-owner
    state of a Gibbs chain.
    """

    parent: list[Optional[int]]
    roots: set[int]

    @property
    def node_count(self) -> int:
        return len(self.parent)

    def copy(self) -> "Forest":
        return Forest(list(self.parent), set(self.roots))

    def children_lists(self) -> list[list[int]]:
        ch: list[list[int]] = [[] for _ in self.parent]
        for u, p in enumerate(self.parent):
            if p is not None:
                ch[p].append(u)
        return ch

    def tree_ids(self) -> list[int]:
        """Component id per node; ids index the sorted root list."""
        ids = [-1] * self.node_count
        for k, r in enumerate(sorted(self.roots)):
            ids[r] = k
        order = topological_order(self)
        for u in order:
            p = self.parent[u]
            if p is not None:
                ids[u] = ids[p]
        return ids

    def tree_members(self) -> list[list[int]]:
        ids = self.tree_ids()
        trees: list[list[int]] = [[] for _ in range(len(self.roots))]
        for u, k in enumerate(ids):
            trees[k].append(u)
        return trees

    def edge_set(self) -> set[tuple[int, int]]:
        return {
            _canon(u, p) for u, p in enumerate(self.parent) if p is not None
        }

    def degrees(self) -> list[int]:
        deg = [0] * self.node_count
        for u, p in enumerate(self.parent):
            if p is not None:
                deg[u] += 1
                deg[p] += 1
        return deg

    def validate(self) -> None:
        """Assert the structural invariants; used after sweeps in debug runs."""
        n = self.node_count
        n_edges = 0
        for u, p in enumerate(self.parent):
            if (p is None) != (u in self.roots):
                raise AssertionError(f"node {u}: parent/root mismatch")
            if p is not None:
                n_edges += 1
        if n_edges != n - len(self.roots):
            raise AssertionError("edge count != n - #roots")
        # parent-following must terminate at a root (no cycles)
        state = [0] * n  # 0 unvisited, 1 in progress, 2 done
        for s in range(n):
            if state[s]:
                continue
            path = []
            u: Optional[int] = s
            while u is not None and state[u] == 0:
                state[u] = 1
                path.append(u)
                u = self.parent[u]
            if u is not None and state[u] == 1:
                raise AssertionError("cycle in parent assignments")
            for w in path:
                state[w] = 2


def topological_order(forest: Forest) -> list[int]:
    """Nodes ordered so every parent appears before its children."""
    children = forest.children_lists()
    order: list[int] = []
    stack = sorted(forest.roots)
    while stack:
        u = stack.pop()
        order.append(u)
        stack.extend(children[u])
    if len(order) != forest.node_count:
        raise AssertionError("forest does not span all nodes")
    return order


def subtree_sizes(forest: Forest) -> list[int]:
    """Size of the subtree hanging below each node, given the current roots."""
    size = [1] * forest.node_count
    order = topological_order(forest)
    for u in reversed(order):
        p = forest.parent[u]
        if p is not None:
            size[p] += size[u]
    return size


@dataclass
class Ordering:
    """Bijection between arrival positions 0..n-1 and node indices."""

    position_to_node: list[int]
    node_to_position: list[int] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.node_to_position is None:
            inv = [0] * len(self.position_to_node)
            for pos, u in enumerate(self.position_to_node):
                inv[u] = pos
            self.node_to_position = inv

    @classmethod
    def identity(cls, n: int) -> "Ordering":
        return cls(list(range(n)), list(range(n)))

    @property
    def node_count(self) -> int:
        return len(self.position_to_node)

    def copy(self) -> "Ordering":
        return Ordering(list(self.position_to_node), list(self.node_to_position))

    def swap_positions(self, i: int, j: int) -> None:
        p2n, n2p = self.position_to_node, self.node_to_position
        u, v = p2n[i], p2n[j]
        p2n[i], p2n[j] = v, u
        n2p[u], n2p[v] = j, i

    def validate(self) -> None:
        for pos, u in enumerate(self.position_to_node):
            if self.node_to_position[u] != pos:
                raise AssertionError("ordering arrays are not mutually inverse")

    def is_history_of(self, forest: Forest) -> bool:
        """Connected-prefix property: every parent precedes its child."""
        n2p = self.node_to_position
        for u, p in enumerate(forest.parent):
            if p is not None and n2p[p] >= n2p[u]:
                return False
        return True


def uniform_spanning_forest(graph: LabeledGraph, rng) -> Forest:
    """Wilson's loop-erased random walk, run per connected component.

    Within each component the tree is uniform over that component's spanning
    trees; the component root is chosen uniformly among its nodes.
    """
    if graph.node_count == 0:
        raise ValueError("graph is empty")
    n = graph.node_count
    parent: list[Optional[int]] = [None] * n
    roots: set[int] = set()
    in_tree = [False] * n
    nxt: list[int] = [0] * n
    adj = graph.adjacency
    for comp in graph.connected_components():
        root = comp[int(rng.integers(len(comp)))]
        roots.add(root)
        in_tree[root] = True
        for start in comp:
            u = start
            while not in_tree[u]:
                nbrs = adj[u]
                nxt[u] = nbrs[int(rng.integers(len(nbrs)))]
                u = nxt[u]
            u = start
            while not in_tree[u]:
                in_tree[u] = True
                parent[u] = nxt[u]
                u = nxt[u]
    return Forest(parent, roots)
