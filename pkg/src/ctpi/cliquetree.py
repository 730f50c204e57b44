"""Moral graphs, triangulation and clique trees.

Graphs are built over the original network variables only; deputies never
become vertices. In ``ici`` mode the parents of a node that carries
contributing factors are left unmarried, so such a node only needs a clique
per (node, parent) pair rather than one holding its whole family.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from ctpi.network import BayesNet


class GraphMode(enum.Enum):
    STANDARD = "standard"
    ICI = "ici"


class CliqueTreeError(ValueError):
    pass


@dataclass
class UndirectedGraph:
    vertices: tuple[int, ...]
    adj: dict[int, set[int]] = field(default_factory=dict)

    def __post_init__(self):
        for v in self.vertices:
            self.adj.setdefault(v, set())

    def add_edge(self, a: int, b: int) -> None:
        if a == b:
            return
        self.adj[a].add(b)
        self.adj[b].add(a)

    def has_edge(self, a: int, b: int) -> bool:
        return b in self.adj[a]

    def edges(self) -> set[tuple[int, int]]:
        return {(a, b) for a in self.adj for b in self.adj[a] if a < b}

    def copy(self) -> "UndirectedGraph":
        return UndirectedGraph(self.vertices, {v: set(n) for v, n in self.adj.items()})


def build_moral_graph(net: BayesNet, mode: GraphMode | str = GraphMode.ICI) -> UndirectedGraph:
    mode = GraphMode(mode)
    g = UndirectedGraph(tuple(range(len(net))))
    for node in net.nodes:
        for p in node.parents:
            g.add_edge(node.var, p)
        if mode is GraphMode.STANDARD or not node.is_contrib:
            ps = node.parents
            for i, a in enumerate(ps):
                for b in ps[i + 1:]:
                    g.add_edge(a, b)
    return g


def _fill_in(adj: dict[int, set[int]], v: int) -> int:
    nbrs = sorted(adj[v])
    return sum(1 for i, a in enumerate(nbrs) for b in nbrs[i + 1:] if b not in adj[a])


def triangulate(g: UndirectedGraph) -> tuple[UndirectedGraph, list[int]]:
    """Greedy min-fill elimination.

    Ties go to the vertex whose elimination clique is smaller, then to the
    lower id. Returns the chordal supergraph and the elimination order.
    """
    chordal = g.copy()
    work = {v: set(n) for v, n in g.adj.items()}
    order: list[int] = []
    while work:
        v = min(work, key=lambda u: (_fill_in(work, u), len(work[u]) + 1, u))
        nbrs = sorted(work[v])
        for i, a in enumerate(nbrs):
            for b in nbrs[i + 1:]:
                if b not in work[a]:
                    work[a].add(b)
                    work[b].add(a)
                    chordal.add_edge(a, b)
        for u in nbrs:
            work[u].discard(v)
        del work[v]
        order.append(v)
    return chordal, order


@dataclass(frozen=True)
class CliqueTree:
    cliques: tuple[frozenset[int], ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        object.__setattr__(self, "cliques", tuple(frozenset(c) for c in self.cliques))
        object.__setattr__(self, "edges", tuple(tuple(sorted(e)) for e in self.edges))
        n = len(self.cliques)
        if n and len(self.edges) != n - 1:
            raise CliqueTreeError(f"{n} cliques need {n - 1} tree edges, got {len(self.edges)}")
        if n and len(self._reachable(0)) != n:
            raise CliqueTreeError("clique tree is not connected")

    def _reachable(self, start: int) -> set[int]:
        nbrs = self.neighbor_lists()
        seen, stack = {start}, [start]
        while stack:
            u = stack.pop()
            for w in nbrs[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen

    def neighbor_lists(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.cliques]
        for a, b in self.edges:
            out[a].append(b)
            out[b].append(a)
        return [sorted(x) for x in out]

    def separator(self, a: int, b: int) -> frozenset[int]:
        return self.cliques[a] & self.cliques[b]

    def path(self, a: int, b: int) -> list[int]:
        nbrs = self.neighbor_lists()
        prev = {a: None}
        stack = [a]
        while stack:
            u = stack.pop()
            for w in nbrs[u]:
                if w not in prev:
                    prev[w] = u
                    stack.append(w)
        out = [b]
        while out[-1] != a:
            out.append(prev[out[-1]])
        return out[::-1]

    def running_intersection_violations(self) -> list[tuple[int, int, int]]:
        """(variable, clique a, clique b) triples breaking running intersection."""
        bad = []
        n = len(self.cliques)
        for a in range(n):
            for b in range(a + 1, n):
                shared = self.cliques[a] & self.cliques[b]
                if not shared:
                    continue
                for c in self.path(a, b)[1:-1]:
                    for v in sorted(shared - self.cliques[c]):
                        bad.append((v, a, b))
        return bad

    def cliques_containing(self, vars_: Iterable[int]) -> list[int]:
        want = set(vars_)
        return [i for i, c in enumerate(self.cliques) if want <= c]

    def state_space(self, cards: Sequence[int]) -> int:
        total = 0
        for c in self.cliques:
            size = 1
            for v in c:
                size *= cards[v]
            total += size
        return total

    def dump(self, names: Sequence[str] | None = None) -> str:
        def fmt(vs):
            vs = sorted(vs)
            return ",".join(names[v] if names else str(v) for v in vs)

        lines = [f"clique {i}: {{{fmt(c)}}}" for i, c in enumerate(self.cliques)]
        for a, b in self.edges:
            lines.append(f"edge {a} - {b}: {{{fmt(self.separator(a, b))}}}")
        return "\n".join(lines)


def _is_clique(adj: dict[int, set[int]], vs: Sequence[int]) -> bool:
    return all(b in adj[a] for i, a in enumerate(vs) for b in vs[i + 1:])


def maximal_cliques(chordal: UndirectedGraph, order: Sequence[int]) -> list[frozenset[int]]:
    """Maximal cliques read off a perfect elimination order.

    Each vertex together with its later-eliminated neighbours is a clique;
    those contained in another candidate are dropped.
    """
    pos = {v: i for i, v in enumerate(order)}
    if set(pos) != set(chordal.vertices):
        raise CliqueTreeError("elimination order does not cover the graph")
    candidates = []
    for v in order:
        higher = sorted(u for u in chordal.adj[v] if pos[u] > pos[v])
        if not _is_clique(chordal.adj, higher):
            raise CliqueTreeError(f"graph is not chordal along this order (at vertex {v})")
        candidates.append(frozenset([v, *higher]))
    out = []
    for i, c in enumerate(candidates):
        if any(c < d or (c == d and j < i) for j, d in enumerate(candidates) if j != i):
            continue
        out.append(c)
    return out


def build_clique_tree(chordal: UndirectedGraph, order: Sequence[int] | None = None) -> CliqueTree:
    """Clique tree of a chordal graph.

    The tree is a maximum-weight spanning tree over clique pairs weighted by
    separator size (Kruskal; ties go to the lower clique indices). Pairs with
    empty separators join disconnected components.
    """
    if order is None:
        _, order = triangulate(chordal)
    cliques = maximal_cliques(chordal, order)
    n = len(cliques)
    pairs = sorted(
        ((len(cliques[a] & cliques[b]), a, b) for a in range(n) for b in range(a + 1, n)),
        key=lambda t: (-t[0], t[1], t[2]),
    )
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    edges = []
    for _, a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            edges.append((a, b))
            if len(edges) == n - 1:
                break
    tree = CliqueTree(tuple(cliques), tuple(edges))
    return tree


def clique_tree_for(net: BayesNet, mode: GraphMode | str = GraphMode.ICI,
                    keep_cheaper: bool = True) -> CliqueTree:
    """Moral graph, min-fill triangulation and clique tree in one step.

    The standard-mode chordal graph also triangulates the ici-mode moral
    graph (it is a supergraph). With ``keep_cheaper`` an ici-mode build
    returns whichever of the two trees has the smaller total state space,
    since min-fill alone occasionally does worse on the sparser graph.
    """
    mode = GraphMode(mode)
    chordal, order = triangulate(build_moral_graph(net, mode))
    tree = build_clique_tree(chordal, order)
    if mode is GraphMode.ICI and keep_cheaper:
        cards = [v.card for v in net.variables]
        std = clique_tree_for(net, GraphMode.STANDARD)
        if std.state_space(cards) < tree.state_space(cards):
            return std
    return tree


def verify_ici_properties(net: BayesNet, tree: CliqueTree,
                          mode: GraphMode | str = GraphMode.ICI) -> list[str]:
    """Check the structural requirements of initialization.

    (1) every node without contributing factors shares a clique with all its
    parents; (2) every contributing-factor node shares a clique with each
    parent. In standard mode (1) is required of every node.
    """
    mode = GraphMode(mode)
    names = [v.name for v in net.variables]
    report = []
    for node in net.nodes:
        family = {node.var, *node.parents}
        if mode is GraphMode.STANDARD or not node.is_contrib:
            if not tree.cliques_containing(family):
                report.append(f"property 1: no clique holds {names[node.var]} and all its parents")
        else:
            for p in node.parents:
                if not tree.cliques_containing((node.var, p)):
                    report.append(f"property 2: no clique holds {names[node.var]} and {names[p]}")
    covered = set().union(*tree.cliques) if tree.cliques else set()
    for v in range(len(net)):
        if v not in covered:
            report.append(f"variable {names[v]} is in no clique")
    return report
