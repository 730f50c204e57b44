"""Bayesian networks with causal-independence annotations.

A node either carries a full conditional table (``FullCPT``) or, when it is
convergent, one contributing factor per parent (``ContribList``). Column
``c`` of the contributing factor of parent ``c_i`` is the distribution of
that parent's contribution to the child given ``c_i = c``.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ctpi.factors import (
    CombinationOperator,
    Factor,
    FactorError,
    Frame,
    Role,
    Variable,
    combine_all,
    eliminate_deputies,
    eliminate_deputy,
    indicator,
    multiply,
    rename,
    validate_operator,
)

DEFAULT_ORACLE_CAP = 2**24
NORMALIZATION_TOL = 1e-9


class NetworkError(ValueError):
    pass


@dataclass(frozen=True)
class FullCPT:
    factor: Factor


@dataclass(frozen=True)
class ContribList:
    # aligned with NodeSpec.parents
    factors: tuple[Factor, ...]


@dataclass(frozen=True)
class NodeSpec:
    var: int
    parents: tuple[int, ...]
    payload: FullCPT | ContribList

    @property
    def is_contrib(self) -> bool:
        return isinstance(self.payload, ContribList)


@dataclass(frozen=True)
class BayesNet:
    variables: tuple[Variable, ...]
    nodes: tuple[NodeSpec, ...]
    name: str = "net"

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        for i, v in enumerate(self.variables):
            if v.id != i:
                raise NetworkError(f"variable {v.name} has id {v.id}, expected {i}")
        if len(self.nodes) != len(self.variables):
            raise NetworkError("every variable needs exactly one node spec")
        for i, n in enumerate(self.nodes):
            if n.var != i:
                raise NetworkError(f"node spec {i} describes variable {n.var}")

    def __len__(self):
        return len(self.variables)

    def card(self, v: int) -> int:
        return self.variables[v].card

    def id_of(self, name: str) -> int:
        for v in self.variables:
            if v.name == name:
                return v.id
        raise KeyError(name)

    def children(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.variables]
        for n in self.nodes:
            for p in n.parents:
                out[p].append(n.var)
        return out

    def topological_order(self) -> list[int]:
        """Kahn's algorithm, smallest id first; raises on a cycle."""
        indeg = [len(set(n.parents)) for n in self.nodes]
        kids = self.children()
        ready = sorted(i for i, d in enumerate(indeg) if d == 0)
        order = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            for c in sorted(set(kids[v])):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
            ready.sort()
        if len(order) != len(self.nodes):
            raise NetworkError("parent lists contain a cycle")
        return order

    def contrib_nodes(self) -> list[int]:
        return [n.var for n in self.nodes if n.is_contrib]


def pair_factor(e: int, c: int, columns, card_e: int | None = None) -> Factor:
    """Contributing factor over {e, c} from per-parent-value columns.

    ``columns[j]`` is the distribution over e's frame when the parent takes
    value j.
    """
    t = np.asarray(columns, dtype=np.float64)  # [c, e]
    if card_e is not None and t.shape[1] != card_e:
        raise NetworkError(f"contributing columns have {t.shape[1]} entries, frame has {card_e}")
    return Factor((c, e), t) if c < e else Factor((e, c), t.T)


def cpt_factor(x: int, parents: Sequence[int], rows, cards: Mapping[int, int] | Sequence[int]) -> Factor:
    """Build a CPT factor from rows in lexicographic parent order.

    Rows are indexed by parent configurations with the first parent varying
    slowest; each row is a distribution over x's frame.
    """
    parents = list(parents)
    t = np.asarray(rows, dtype=np.float64)
    shape = [cards[p] for p in parents] + [cards[x]]
    t = t.reshape(shape)
    labels = parents + [x]
    scope = tuple(sorted(labels))
    return Factor(scope, np.transpose(t, [labels.index(v) for v in scope]))


def cpt_rows(f: Factor, x: int, parents: Sequence[int]) -> np.ndarray:
    """Inverse of ``cpt_factor``: a (configs x |x|) array of rows."""
    labels = list(parents) + [x]
    t = np.transpose(f.table, [f.scope.index(v) for v in labels])
    return t.reshape(-1, t.shape[-1])


def make_noisy_or(e: int, parents: Sequence[int], inhibitors: Sequence[float],
                  variables: Sequence[Variable]) -> NodeSpec:
    """Noisy-OR node: parent i, when on, fails to turn e on with prob ``q_i``."""
    if len(inhibitors) != len(parents):
        raise NetworkError("one inhibitor probability per parent")
    for v in [e, *parents]:
        if variables[v].card != 2:
            raise NetworkError(f"noisy-OR needs binary variables, {variables[v].name} is not")
    factors = []
    for p, q in zip(parents, inhibitors):
        if not 0.0 <= q <= 1.0:
            raise NetworkError(f"inhibitor probability {q} outside [0, 1]")
        factors.append(pair_factor(e, p, [[1.0, 0.0], [q, 1.0 - q]]))
    return NodeSpec(e, tuple(parents), ContribList(tuple(factors)))


def validate_network(net: BayesNet) -> list[str]:
    """Every well-formedness violation found; empty when the net is valid."""
    report: list[str] = []
    names = [v.name for v in net.variables]
    if len(set(names)) != len(names):
        report.append("duplicate variable names")
    try:
        net.topological_order()
    except NetworkError as exc:
        report.append(f"acyclicity: {exc}")
    for v in net.variables:
        if v.op is not None:
            try:
                bad = validate_operator(v.op, v.frame)
            except FactorError as exc:
                report.append(f"{v.name}: operator: {exc}")
            else:
                if bad is not None:
                    report.append(f"{v.name}: operator {bad}")
    for node in net.nodes:
        x = node.var
        name = names[x]
        if len(set(node.parents)) != len(node.parents):
            report.append(f"{name}: repeated parent")
        if x in node.parents:
            report.append(f"{name}: is its own parent")
        if isinstance(node.payload, FullCPT):
            f = node.payload.factor
            want = tuple(sorted({x, *node.parents}))
            if f.scope != want:
                report.append(f"{name}: CPT scope {f.scope}, expected {want}")
                continue
            if any(f.cards[v] != net.card(v) for v in f.scope):
                report.append(f"{name}: CPT shape does not match frames")
                continue
            sums = np.atleast_1d(f.table.sum(axis=f.scope.index(x)))
            for cfg in np.argwhere(np.abs(sums - 1.0) > NORMALIZATION_TOL):
                cfg = tuple(int(i) for i in cfg) if f.table.ndim > 1 else ()
                report.append(f"{name}: CPT column {cfg} sums to {float(sums[cfg or 0]):.12g}")
        else:
            if net.variables[x].role is not Role.CONVERGENT:
                report.append(f"{name}: contributing factors on a non-convergent variable")
            if not node.parents:
                report.append(f"{name}: a root cannot carry contributing factors")
            if len(node.payload.factors) != len(node.parents):
                report.append(f"{name}: {len(node.payload.factors)} contributing factors "
                              f"for {len(node.parents)} parents")
                continue
            for p, f in zip(node.parents, node.payload.factors):
                if f.scope != tuple(sorted((x, p))):
                    report.append(f"{name}: contributing factor of {names[p]} has scope {f.scope}")
                    continue
                if f.cards[x] != net.card(x) or f.cards[p] != net.card(p):
                    report.append(f"{name}: contributing factor of {names[p]} has wrong shape")
                    continue
                sums = f.table.sum(axis=f.scope.index(x))
                for j in np.nonzero(np.abs(sums - 1.0) > NORMALIZATION_TOL)[0]:
                    report.append(f"{name}: contributing factor of {names[p]}, "
                                  f"column {names[p]}={int(j)} sums to {sums[j]:.12g}")
    return report


def check_network(net: BayesNet) -> BayesNet:
    report = validate_network(net)
    if report:
        raise NetworkError("; ".join(report))
    return net


@dataclass(frozen=True)
class DeputizedFactorization:
    factors: tuple[Factor, ...]
    deputy_map: dict[int, int]
    variables: tuple[Variable, ...]

    @property
    def deputy_pairs(self) -> dict[int, int]:
        """deputy id -> original id."""
        return {d: e for e, d in self.deputy_map.items()}


def deputy_variables(net: BayesNet) -> tuple[tuple[Variable, ...], dict[int, int]]:
    """Extended variable table with a deputy for every ContribList node.

    Deputies take ids ``n, n+1, ...`` in ascending order of their originals.
    Originals of every kind become regular.
    """
    n = len(net)
    deputy_map = {e: n + i for i, e in enumerate(net.contrib_nodes())}
    table = []
    for v in net.variables:
        table.append(Variable(v.id, v.name, v.frame, Role.REGULAR, v.op, deputy_map.get(v.id)))
    for e, d in deputy_map.items():
        v = net.variables[e]
        table.append(Variable(d, v.name + "'", v.frame, Role.DEPUTY, v.op, e))
    return tuple(table), deputy_map


def depute(net: BayesNet) -> DeputizedFactorization:
    variables, deputy_map = deputy_variables(net)
    factors = []
    for node in net.nodes:
        if isinstance(node.payload, FullCPT):
            factors.append(node.payload.factor)
        else:
            d = deputy_map[node.var]
            factors.extend(rename(f, node.var, d) for f in node.payload.factors)
    return DeputizedFactorization(tuple(factors), deputy_map, variables)


def expand_cpt(net: BayesNet, e: int) -> Factor:
    """Full conditional table of a convergent node from its contributing factors."""
    node = net.nodes[e]
    if not node.is_contrib:
        raise NetworkError(f"{net.variables[e].name} has no contributing factors")
    var = net.variables[e]
    d = len(net)
    roles = {v.id: v for v in net.variables}
    roles[d] = Variable(d, var.name + "'", var.frame, Role.DEPUTY, var.op, e)
    rewritten = [rename(f, e, d) for f in node.payload.factors]
    return eliminate_deputy(combine_all(rewritten, roles), d, e)


def cpt_by_enumeration(net: BayesNet, e: int) -> Factor:
    """Conditional table of a contributing-factor node by direct enumeration.

    For each parent configuration the contribution distributions are folded
    one parent at a time with the base operator. Shares no code with
    ``combine`` so it can serve as an oracle.
    """
    node = net.nodes[e]
    var = net.variables[e]
    if not node.is_contrib:
        return node.payload.factor
    k = var.card
    op = var.op.as_table(k)
    parents = list(node.parents)
    cols = []
    for p, f in zip(parents, node.payload.factors):
        t = f.table if f.scope[0] == p else f.table.T  # [p, e]
        cols.append(t)
    rows = []
    for cfg in itertools.product(*(range(net.card(p)) for p in parents)):
        dist = cols[0][cfg[0]].copy()
        for t, j in zip(cols[1:], cfg[1:]):
            nxt = np.zeros(k)
            for a in range(k):
                for b in range(k):
                    nxt[op[a, b]] += dist[a] * t[j][b]
            dist = nxt
        rows.append(dist)
    return cpt_factor(e, parents, rows, [v.card for v in net.variables])


def full_cpts(net: BayesNet) -> list[Factor]:
    return [cpt_by_enumeration(net, n.var) for n in net.nodes]


def oracle_cap() -> int:
    return int(os.environ.get("ICI_ORACLE_CAP", DEFAULT_ORACLE_CAP))


def joint_brute_force(net: BayesNet, evidence: Mapping[int, int] | None = None,
                      cap: int | None = None) -> Factor:
    """Unnormalized joint over the unobserved variables, by the chain rule.

    Every conditional table is materialized (contributing factors by
    enumeration), all tables are multiplied into one array over every
    variable, the evidence slices are selected and the observed variables
    dropped.
    """
    evidence = dict(evidence or {})
    cap = oracle_cap() if cap is None else cap
    n = len(net)
    total = int(np.prod([v.card for v in net.variables], dtype=object))
    if total > cap:
        raise NetworkError(f"joint has {total} entries, over the oracle cap {cap}")
    if n > 52:
        raise NetworkError("brute force supports at most 52 variables")
    operands = []
    for f in full_cpts(net):
        operands += [f.table, list(f.scope)]
    joint = np.einsum(*operands, list(range(n)), optimize=False)
    index = tuple(evidence.get(v, slice(None)) for v in range(n))
    keep = tuple(v for v in range(n) if v not in evidence)
    return Factor(keep, np.ascontiguousarray(joint[index]))


def brute_posterior(net: BayesNet, x: int, evidence: Mapping[int, int] | None = None) -> np.ndarray:
    evidence = dict(evidence or {})
    if x in evidence:
        out = np.zeros(net.card(x))
        out[evidence[x]] = 1.0
        return out
    joint = joint_brute_force(net, evidence)
    axes = tuple(i for i, v in enumerate(joint.scope) if v != x)
    m = joint.table.sum(axis=axes)
    return m / m.sum()


def deputized_joint(df: DeputizedFactorization, net: BayesNet) -> Factor:
    """⊗-combine a deputized factor list and substitute every deputy back."""
    f = eliminate_deputies(combine_all(list(df.factors), df.variables), df.deputy_pairs)
    missing = [v for v in range(len(net)) if v not in f.scope]
    if missing:
        ones = Factor(tuple(missing), np.ones([net.card(v) for v in missing]))
        f = multiply(f, ones)
    return f


def evidence_factors(net: BayesNet, evidence: Mapping[int, int]) -> list[Factor]:
    return [indicator(x, a, net.card(x)) for x, a in sorted(evidence.items())]


def make_variable(vid: int, name: str, labels: Sequence[str] | int,
                  op: CombinationOperator | None = None) -> Variable:
    frame = Frame.of_size(labels) if isinstance(labels, int) else Frame(tuple(labels))
    role = Role.CONVERGENT if op is not None else Role.REGULAR
    return Variable(vid, name, frame, role, op)
