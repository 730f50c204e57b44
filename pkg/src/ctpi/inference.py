"""Clique tree propagation with factorized conditional tables.

Two engines share the tree machinery:

* ``CTPI`` keeps the contributing factors of convergent nodes apart (written
  over deputies) and passes messages that are *lists* of factors. Variables
  are removed from a list with ``sumout_c``.
* ``CTP`` is the textbook baseline: every conditional table is expanded,
  each clique holds one potential, and messages are single factors.
  Incoming messages are only combined when a posterior is requested.

``ve_query`` runs variable elimination over the deputized factor list and
serves as a third, tree-free route to the same posteriors.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from ctpi import instrument
from ctpi.cliquetree import CliqueTree, GraphMode, clique_tree_for, verify_ici_properties
from ctpi.factors import (
    Factor,
    Role,
    Variable,
    VarTable,
    combine_all,
    eliminate_deputy,
    indicator,
    multiply,
    multiply_all,
    reduce_list,
    rename,
    sum_out,
    sum_out_many,
)
from ctpi.network import BayesNet, FullCPT, depute, deputy_variables, expand_cpt


class EngineKind(enum.Enum):
    CTPI = "ctpi"
    CTP = "ctp"


class InferenceError(RuntimeError):
    pass


class ZeroEvidenceError(InferenceError):
    """The evidence has probability zero, so no posterior exists."""


def _entries(factors: Iterable[Factor]) -> int:
    return sum(f.size for f in factors)


def sumout_c(factors: Sequence[Factor], x: int, variables: VarTable) -> list[Factor]:
    """Remove variable ``x`` from a ⊗-homogeneous factor list.

    If ``x`` has been deputed, the factors over its deputy are first
    combined and the deputy substituted by ``x``. Then the factors over
    ``x`` are combined and ``x`` is summed out. A variable that appears in
    no factor leaves the list unchanged.
    """
    var = variables[x]
    if var.role is Role.DEPUTY:
        raise InferenceError(f"cannot sum out deputy {var.name} directly")
    fs = list(factors)
    dep = var.partner
    if dep is not None:
        hit = [f for f in fs if dep in f.scope]
        if hit:
            fs = [f for f in fs if dep not in f.scope]
            fs.append(eliminate_deputy(combine_all(hit, variables), dep, x))
    hit = [f for f in fs if x in f.scope]
    if not hit:
        return fs
    fs = [f for f in fs if x not in f.scope]
    fs.append(sum_out(combine_all(hit, variables), x))
    return fs


def _original(v: int, variables: VarTable) -> int:
    var = variables[v]
    return var.partner if var.role is Role.DEPUTY else v


def original_scope(f: Factor, variables: VarTable) -> set[int]:
    """Scope with deputies replaced by their originals."""
    return {_original(v, variables) for v in f.scope}


@dataclass
class InitializedTree:
    net: BayesNet
    tree: CliqueTree
    kind: EngineKind
    lists: tuple[tuple[Factor, ...], ...]
    variables: tuple[Variable, ...]
    evidence: dict[int, int] = field(default_factory=dict)

    @property
    def deputed(self) -> dict[int, int]:
        """original id -> deputy id, for nodes whose factors stay split."""
        return {v.id: v.partner for v in self.variables
                if v.role is not Role.DEPUTY and v.partner is not None}

    def attached_entries(self) -> int:
        return sum(_entries(fs) for fs in self.lists)


def _lowest_clique(tree: CliqueTree, vars_: Iterable[int]) -> int | None:
    hits = tree.cliques_containing(vars_)
    return hits[0] if hits else None


def initialize(net: BayesNet, tree: CliqueTree, kind: EngineKind | str = EngineKind.CTPI) -> InitializedTree:
    kind = EngineKind(kind)
    mode = GraphMode.ICI if kind is EngineKind.CTPI else GraphMode.STANDARD
    report = verify_ici_properties(net, tree, mode)
    if report:
        raise InferenceError("clique tree unusable for this engine: " + "; ".join(report))
    variables, deputy_map = deputy_variables(net)
    variables = list(variables)
    lists: list[list[Factor]] = [[] for _ in tree.cliques]
    for node in net.nodes:
        family = (node.var, *node.parents)
        home = _lowest_clique(tree, family)
        if isinstance(node.payload, FullCPT):
            lists[home].append(node.payload.factor)
        elif home is not None:
            # the clique would combine all pieces at once anyway
            lists[home].append(expand_cpt(net, node.var))
            instrument.observe_live(_entries(f for fs in lists for f in fs))
        else:
            d = deputy_map[node.var]
            for p, f in zip(node.parents, node.payload.factors):
                lists[_lowest_clique(tree, (node.var, p))].append(rename(f, node.var, d))
    for v in net.contrib_nodes():
        if kind is EngineKind.CTP or _lowest_clique(tree, (v, *net.nodes[v].parents)) is not None:
            variables[v] = replace(variables[v], partner=None)
    if kind is EngineKind.CTPI:
        out = [tuple(reduce_list(fs, variables)) for fs in lists]
    else:
        out = []
        for fs in lists:
            out.append((multiply_all(fs),) if fs else ())
            instrument.observe_live(_entries(f for fs_ in out for f in fs_))
    it = InitializedTree(net, tree, kind, tuple(out), tuple(variables))
    instrument.observe_live(it.attached_entries())
    return it


def absorb_evidence(it: InitializedTree, x: int, alpha: int, all_factors: bool = True) -> InitializedTree:
    """Multiply the indicator of ``x = alpha`` into the factors over ``x``.

    With ``all_factors=False`` only the first such factor is masked, which
    is enough for correctness. When no attached factor mentions ``x`` (a
    deputed node without children) the indicator is attached on its own to
    the lowest clique holding ``x``.
    """
    if x in it.evidence:
        raise InferenceError(f"{it.net.variables[x].name} is already observed")
    if not 0 <= x < len(it.net):
        raise InferenceError(f"no network variable with id {x}")
    chi = indicator(x, alpha, it.net.card(x))
    lists = [list(fs) for fs in it.lists]
    hit = False
    for fs in lists:
        for i, f in enumerate(fs):
            if x in f.scope and (all_factors or not hit):
                fs[i] = multiply(f, chi)
                hit = True
    if not hit:
        lists[_lowest_clique(it.tree, (x,))].append(chi)
    evidence = dict(it.evidence)
    evidence[x] = alpha
    return replace(it, lists=tuple(tuple(fs) for fs in lists), evidence=evidence)


def absorb_all(it: InitializedTree, evidence: Mapping[int, int], all_factors: bool = True) -> InitializedTree:
    for x, a in sorted(evidence.items()):
        it = absorb_evidence(it, x, a, all_factors)
    return it


@dataclass(frozen=True)
class Message:
    src: int
    dst: int
    factors: tuple[Factor, ...]


def default_pivot(tree: CliqueTree) -> int:
    return min(range(len(tree.cliques)), key=lambda i: (-len(tree.cliques[i]), i))


def send_message(it: InitializedTree, src: int, dst: int, inbox: Sequence[Message],
                 stored: int = 0) -> Message:
    """Message from clique ``src`` to neighbour ``dst``.

    ``inbox`` holds the messages ``src`` received from its other
    neighbours; ``stored`` is the number of table entries already held
    elsewhere, used only for peak-memory accounting.
    """
    fs = list(it.lists[src])
    for m in inbox:
        fs.extend(m.factors)
    drop = sorted(it.tree.cliques[src] - it.tree.cliques[dst])
    instrument.observe_live(stored + _entries(fs))
    if it.kind is EngineKind.CTP:
        if not fs:
            return Message(src, dst, ())
        f = multiply_all(fs)
        instrument.observe_live(stored + _entries(fs) + f.size)
        out = (sum_out_many(f, drop),)
    else:
        for x in drop:
            fs = sumout_c(fs, x, it.variables)
            instrument.observe_live(stored + _entries(fs))
        out = tuple(reduce_list(fs, it.variables))
    instrument.count_message()
    return Message(src, dst, out)


@dataclass
class PropagatedState:
    it: InitializedTree
    pivot: int
    messages: dict[tuple[int, int], Message]
    schedule: list[tuple[int, int]]

    def incoming(self, c: int) -> list[Message]:
        return [self.messages[(n, c)] for n in self.it.tree.neighbor_lists()[c]]

    def local_factors(self, c: int) -> list[Factor]:
        fs = list(self.it.lists[c])
        for m in self.incoming(c):
            fs.extend(m.factors)
        return fs


def schedule(tree: CliqueTree, pivot: int) -> list[tuple[int, int]]:
    """Inward sweep toward the pivot followed by the outward sweep."""
    nbrs = tree.neighbor_lists()
    parent = {pivot: None}
    preorder = []
    stack = [pivot]
    while stack:
        u = stack.pop()
        preorder.append(u)
        for w in reversed(nbrs[u]):
            if w not in parent:
                parent[w] = u
                stack.append(w)
    inward = [(u, parent[u]) for u in reversed(preorder) if parent[u] is not None]
    outward = [(parent[u], u) for u in preorder if parent[u] is not None]
    return inward + outward


def propagate(it: InitializedTree, pivot: int | None = None) -> PropagatedState:
    tree = it.tree
    if pivot is None:
        pivot = default_pivot(tree)
    if not 0 <= pivot < len(tree.cliques):
        raise InferenceError(f"pivot {pivot} is not a clique index")
    nbrs = tree.neighbor_lists()
    messages: dict[tuple[int, int], Message] = {}
    order = schedule(tree, pivot)
    stored = it.attached_entries()
    for src, dst in order:
        inbox = [messages[(n, src)] for n in nbrs[src] if n != dst]
        m = send_message(it, src, dst, inbox, stored)
        messages[(src, dst)] = m
        stored += _entries(m.factors)
        instrument.observe_live(stored)
    return PropagatedState(it, pivot, messages, order)


@dataclass(frozen=True)
class QueryResult:
    var: int
    posterior: np.ndarray
    normalizer: float


def _query_clique(tree: CliqueTree, x: int, cards: Sequence[int]) -> int:
    hits = tree.cliques_containing((x,))
    if not hits:
        raise InferenceError(f"variable {x} is in no clique")

    def size(i):
        n = 1
        for v in tree.cliques[i]:
            n *= cards[v]
        return n

    return min(hits, key=lambda i: (size(i), i))


def get_prob(state: PropagatedState, x: int) -> QueryResult:
    """Posterior of ``x`` given the absorbed evidence.

    Observed variables return their point mass (normalizer still equals the
    probability of the evidence).
    """
    it = state.it
    net = it.net
    cards = [v.card for v in net.variables]
    c = _query_clique(it.tree, x, cards)
    fs = state.local_factors(c)
    stored = it.attached_entries() + sum(_entries(m.factors) for m in state.messages.values())
    others = sorted(it.tree.cliques[c] - {x})
    if it.kind is EngineKind.CTP:
        f = multiply_all(fs) if fs else None
        if f is not None:
            instrument.observe_live(stored + f.size)
            f = sum_out_many(f, others)
    else:
        for y in others:
            fs = sumout_c(fs, y, it.variables)
            instrument.observe_live(stored + _entries(fs))
        f = combine_all(fs, it.variables) if fs else None
        dep = it.variables[x].partner
        if f is not None and dep is not None and dep in f.scope:
            f = eliminate_deputy(f, dep, x)
    table = np.ones(net.card(x)) if f is None or x not in f.scope else f.table
    if f is not None and x not in f.scope:
        table = table * float(f.table.sum())
    return _finish(x, table, it.evidence, net.card(x))


def _finish(x: int, table: np.ndarray, evidence: Mapping[int, int], card: int) -> QueryResult:
    z = float(table.sum())
    if z <= 0.0:
        raise ZeroEvidenceError("the evidence has probability zero")
    if x in evidence:
        post = np.zeros(card)
        post[evidence[x]] = 1.0
        return QueryResult(x, post, z)
    return QueryResult(x, table / z, z)


def clique_joint(state: PropagatedState, c: int) -> Factor:
    """Combine everything known at clique ``c`` into one potential.

    Deputies are substituted by their originals and observed variables are
    summed out, giving the joint of the clique's unobserved variables with
    the evidence.
    """
    it = state.it
    fs = state.local_factors(c)
    if it.kind is EngineKind.CTP:
        f = multiply_all(fs)
    else:
        f = combine_all(fs, it.variables)
        for v in sorted(f.scope):
            var = it.variables[v]
            if var.role is Role.DEPUTY:
                f = eliminate_deputy(f, v, var.partner)
    obs = [v for v in f.scope if v in it.evidence]
    return sum_out_many(f, obs)


def ve_query(net: BayesNet, x: int, evidence: Mapping[int, int] | None = None) -> QueryResult:
    """Variable elimination over the deputized factor list.

    Variables are removed greedily by minimum degree in the interaction
    graph of the current list (deputies counted as their originals), ties
    to the lower id.
    """
    evidence = dict(evidence or {})
    df = depute(net)
    variables = df.variables
    fs = list(df.factors)
    for y, a in sorted(evidence.items()):
        chi = indicator(y, a, net.card(y))
        hit = [i for i, f in enumerate(fs) if y in f.scope]
        for i in hit:
            fs[i] = multiply(fs[i], chi)
        if not hit:
            fs.append(chi)
    remaining = set(range(len(net))) - {x}
    while remaining:
        nbrs = {v: set() for v in remaining}
        for f in fs:
            sc = original_scope(f, variables)
            for v in sc & remaining:
                nbrs[v] |= sc - {v}
        y = min(remaining, key=lambda v: (len(nbrs[v]), v))
        fs = sumout_c(fs, y, variables)
        remaining.discard(y)
    f = combine_all(fs, variables)
    dep = df.deputy_map.get(x)
    if dep is not None and dep in f.scope:
        f = eliminate_deputy(f, dep, x)
    table = f.table if x in f.scope else np.full(net.card(x), float(f.table.sum()))
    return _finish(x, table, evidence, net.card(x))


class Engine:
    """A clique tree engine compiled once for a network.

    ``query`` runs evidence absorption, propagation and posterior
    extraction for one case.
    """

    def __init__(self, net: BayesNet, kind: EngineKind | str = EngineKind.CTPI,
                 mode: GraphMode | str | None = None, tree: CliqueTree | None = None):
        self.net = net
        self.kind = EngineKind(kind)
        if mode is None:
            mode = GraphMode.ICI if self.kind is EngineKind.CTPI else GraphMode.STANDARD
        self.mode = GraphMode(mode)
        self.tree = tree if tree is not None else clique_tree_for(net, self.mode)
        self.initialized = initialize(net, self.tree, self.kind)

    def propagate(self, evidence: Mapping[int, int] | None = None,
                  pivot: int | None = None) -> PropagatedState:
        it = absorb_all(self.initialized, evidence or {})
        return propagate(it, pivot)

    def query(self, evidence: Mapping[int, int] | None = None,
              targets: Sequence[int] | None = None, pivot: int | None = None) -> dict[int, QueryResult]:
        state = self.propagate(evidence, pivot)
        if targets is None:
            targets = [v for v in range(len(self.net)) if v not in (evidence or {})]
        return {x: get_prob(state, x) for x in targets}
