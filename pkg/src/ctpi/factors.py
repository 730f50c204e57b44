"""Dense factors over discrete variables and the combination algebra.

A factor's scope is a tuple of variable ids in strictly ascending order and
its table is a numpy array whose axes follow the scope (C order, so the last
scope variable varies fastest). Because every scope is sorted, aligning two
factors on the union of their scopes never needs a transpose, only a reshape
that inserts singleton axes.

Convergent and deputy variables are combined by ``combine``: on a shared
variable of that kind the two operands are convolved under the variable's
base operator instead of multiplied pointwise.
"""
from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from ctpi.instrument import count_macc


class FactorError(ValueError):
    pass


class Role(enum.Enum):
    REGULAR = "regular"
    CONVERGENT = "convergent"
    DEPUTY = "deputy"


class OpKind(enum.Enum):
    OR = "OR"
    AND = "AND"
    MAX = "MAX"
    MIN = "MIN"
    SATURATING_SUM = "SATSUM"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Frame:
    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))
        if len(self.labels) < 2:
            raise FactorError(f"a frame needs at least two values, got {self.labels}")
        if len(set(self.labels)) != len(self.labels):
            raise FactorError(f"duplicate labels in frame {self.labels}")

    @property
    def size(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)

    @classmethod
    def of_size(cls, k: int) -> "Frame":
        return cls(tuple(str(i) for i in range(k)))


@dataclass(frozen=True, eq=False)
class CombinationOperator:
    """Base combination operator acting on value indices.

    ``table`` is only used for ``OpKind.CUSTOM``; it is a k x k array of
    result indices.
    """

    kind: OpKind
    table: np.ndarray | None = None
    name: str | None = None

    def __post_init__(self):
        if self.kind is OpKind.CUSTOM:
            if self.table is None:
                raise FactorError("a custom operator needs a table")
            t = np.array(self.table, dtype=np.int64)
            t.setflags(write=False)
            object.__setattr__(self, "table", t)

    def __eq__(self, other):
        if not isinstance(other, CombinationOperator) or other.kind is not self.kind:
            return False
        if self.kind is OpKind.CUSTOM:
            return np.array_equal(self.table, other.table)
        return True

    def __hash__(self):
        return hash(self.kind)

    def as_table(self, k: int) -> np.ndarray:
        """k x k array whose (a, b) entry is ``a * b``."""
        a, b = np.meshgrid(np.arange(k), np.arange(k), indexing="ij")
        if self.kind is OpKind.CUSTOM:
            if self.table.shape != (k, k):
                raise FactorError(
                    f"custom operator table has shape {self.table.shape}, frame has {k} values"
                )
            return self.table
        if self.kind in (OpKind.OR, OpKind.AND) and k != 2:
            raise FactorError(f"{self.kind.value} needs a 2-valued frame, got {k}")
        if self.kind in (OpKind.OR, OpKind.MAX):
            return np.maximum(a, b)
        if self.kind in (OpKind.AND, OpKind.MIN):
            return np.minimum(a, b)
        return np.minimum(a + b, k - 1)

    def __repr__(self):
        if self.kind is OpKind.CUSTOM:
            return f"CombinationOperator(custom:{self.name or self.table.tolist()})"
        return f"CombinationOperator({self.kind.value})"


OR = CombinationOperator(OpKind.OR)
AND = CombinationOperator(OpKind.AND)
MAX = CombinationOperator(OpKind.MAX)
MIN = CombinationOperator(OpKind.MIN)
SATURATING_SUM = CombinationOperator(OpKind.SATURATING_SUM)


def custom_operator(table, name: str | None = None) -> CombinationOperator:
    return CombinationOperator(OpKind.CUSTOM, np.asarray(table), name)


@dataclass
class OperatorViolation:
    law: str
    values: tuple[int, ...]

    def __str__(self):
        return f"{self.law} fails at {self.values}"


def validate_operator(op: CombinationOperator, frame: Frame | int) -> OperatorViolation | None:
    """Exhaustively check commutativity and associativity.

    Returns None when both laws hold, otherwise the first failing pair or
    triple. Raises FactorError when a custom table does not match the frame
    or holds indices outside it.
    """
    k = frame.size if isinstance(frame, Frame) else int(frame)
    t = op.as_table(k)
    if t.min() < 0 or t.max() >= k:
        raise FactorError(f"operator table has entries outside 0..{k - 1}")
    for a, b in itertools.product(range(k), repeat=2):
        if t[a, b] != t[b, a]:
            return OperatorViolation("commutativity", (a, b))
    for a, b, c in itertools.product(range(k), repeat=3):
        if t[t[a, b], c] != t[a, t[b, c]]:
            return OperatorViolation("associativity", (a, b, c))
    return None


def identity_element(op: CombinationOperator, k: int) -> int:
    if op.kind in (OpKind.OR, OpKind.MAX, OpKind.SATURATING_SUM):
        return 0
    if op.kind in (OpKind.AND, OpKind.MIN):
        return k - 1
    t = op.as_table(k)
    for e in range(k):
        if np.array_equal(t[e], np.arange(k)):
            return e
    raise FactorError(f"{op!r} has no identity element")


@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    frame: Frame
    role: Role = Role.REGULAR
    op: CombinationOperator | None = None
    partner: int | None = None

    def __post_init__(self):
        needs_op = self.role in (Role.CONVERGENT, Role.DEPUTY)
        if needs_op and self.op is None:
            raise FactorError(f"{self.name}: a {self.role.value} variable needs an operator")

    @property
    def card(self) -> int:
        return self.frame.size


# Anything indexable by variable id.
VarTable = Union[Sequence[Variable], Mapping[int, Variable]]


@dataclass(frozen=True, eq=False)
class Factor:
    scope: tuple[int, ...]
    table: np.ndarray = field(repr=False)

    def __post_init__(self):
        scope = tuple(int(v) for v in self.scope)
        if any(a >= b for a, b in zip(scope, scope[1:])):
            raise FactorError(f"scope must be strictly ascending, got {scope}")
        table = np.asarray(self.table, dtype=np.float64)
        if table.ndim != len(scope):
            if table.size == 1 and not scope:
                table = table.reshape(())
            else:
                raise FactorError(f"table has {table.ndim} axes for scope {scope}")
        if not np.all(np.isfinite(table)) or np.any(table < 0):
            raise FactorError("factor entries must be finite and non-negative")
        if table is self.table and table.flags.writeable:
            table = table.copy()
        table.setflags(write=False)
        object.__setattr__(self, "scope", scope)
        object.__setattr__(self, "table", table)

    @classmethod
    def _make(cls, scope: tuple[int, ...], table: np.ndarray) -> "Factor":
        # trusted constructor for results of the algebra below
        f = object.__new__(cls)
        table = np.asarray(table, dtype=np.float64)
        table.setflags(write=False)
        object.__setattr__(f, "scope", scope)
        object.__setattr__(f, "table", table)
        return f

    @property
    def size(self) -> int:
        return self.table.size

    @property
    def cards(self) -> dict[int, int]:
        return dict(zip(self.scope, self.table.shape))

    def __contains__(self, v: int) -> bool:
        return v in self.scope

    def value(self, assignment: Mapping[int, int]) -> float:
        return float(self.table[tuple(assignment[v] for v in self.scope)])

    def allclose(self, other: "Factor", atol: float = 1e-12) -> bool:
        return (
            self.scope == other.scope
            and self.table.shape == other.table.shape
            and np.allclose(self.table, other.table, rtol=0.0, atol=atol)
        )

    def __repr__(self):
        return f"Factor(scope={self.scope}, shape={self.table.shape})"


def scalar(value: float = 1.0) -> Factor:
    return Factor((), np.array(value))


def from_vector(x: int, values) -> Factor:
    return Factor((x,), np.asarray(values, dtype=np.float64))


def _union(*scopes: Sequence[int]) -> tuple[int, ...]:
    return tuple(sorted(set().union(*scopes)))


def _union_cards(*factors: Factor) -> dict[int, int]:
    cards: dict[int, int] = {}
    for f in factors:
        for v, k in f.cards.items():
            if cards.setdefault(v, k) != k:
                raise FactorError(f"variable {v} has cardinality {cards[v]} and {k}")
    return cards


def _aligned(f: Factor, scope: Sequence[int]) -> np.ndarray:
    # valid because both scopes are ascending
    shape = [f.table.shape[f.scope.index(v)] if v in f.scope else 1 for v in scope]
    return f.table.reshape(shape)


def multiply(f: Factor, g: Factor) -> Factor:
    """Pointwise product over the union of the two scopes."""
    _union_cards(f, g)
    scope = _union(f.scope, g.scope)
    table = _aligned(f, scope) * _aligned(g, scope)
    count_macc(table.size)
    return Factor._make(scope, table)


def combine(f: Factor, g: Factor, variables: VarTable) -> Factor:
    """The ⊗ combination of two factors.

    Shared variables whose role is convergent or deputy are convolved: the
    result at value ``a`` sums ``f(a1) g(a2)`` over all splits with
    ``a1 * a2 == a``. Every other shared variable is matched pointwise, so
    with no such shared variable this is plain ``multiply``.
    """
    shared = [v for v in f.scope if v in g.scope]
    conv = [v for v in shared if variables[v].role in (Role.CONVERGENT, Role.DEPUTY)]
    if not conv:
        return multiply(f, g)
    cards = _union_cards(f, g)
    scope = _union(f.scope, g.scope)
    n = len(scope)
    # g's copy of each convolved variable gets its own trailing axis
    f_shape = [cards[v] if v in f.scope else 1 for v in scope] + [1] * len(conv)
    g_shape = [cards[v] if (v in g.scope and v not in conv) else 1 for v in scope]
    g_shape += [cards[v] for v in conv]
    g_src = [v for v in g.scope if v not in conv] + conv
    g_table = np.transpose(g.table, [g.scope.index(v) for v in g_src])
    prod = f.table.reshape(f_shape) * g_table.reshape(g_shape)
    count_macc(prod.size)

    for v in reversed(conv):
        var = variables[v]
        if var.op is None:
            raise FactorError(f"convergent variable {v} has no operator")
        k = cards[v]
        op = var.op.as_table(k)
        axis = scope.index(v)
        trailing = prod.ndim - 1
        out = np.zeros(prod.shape[:-1])
        for a1 in range(k):
            src1 = np.take(prod, a1, axis=axis)
            for a2 in range(k):
                part = np.take(src1, a2, axis=trailing - 1)
                idx = [slice(None)] * out.ndim
                idx[axis] = int(op[a1, a2])
                out[tuple(idx)] += part
        count_macc(prod.size)
        prod = out
    assert prod.ndim == n
    return Factor._make(scope, prod)


def combine_all(factors: Sequence[Factor], variables: VarTable) -> Factor:
    """⊗-combine a list left to right; the empty list gives the unit scalar."""
    if not factors:
        return scalar(1.0)
    out = factors[0]
    for g in factors[1:]:
        out = combine(out, g, variables)
    return out


def multiply_all(factors: Sequence[Factor]) -> Factor:
    if not factors:
        return scalar(1.0)
    out = factors[0]
    for g in factors[1:]:
        out = multiply(out, g)
    return out


def sum_out(f: Factor, x: int) -> Factor:
    if x not in f.scope:
        raise FactorError(f"variable {x} is not in scope {f.scope}")
    axis = f.scope.index(x)
    count_macc(f.size)
    return Factor._make(f.scope[:axis] + f.scope[axis + 1:], f.table.sum(axis=axis))


def sum_out_many(f: Factor, xs: Sequence[int]) -> Factor:
    xs = [x for x in xs if x in f.scope]
    if not xs:
        return f
    axes = tuple(f.scope.index(x) for x in xs)
    count_macc(f.size)
    keep = tuple(v for v in f.scope if v not in xs)
    return Factor._make(keep, f.table.sum(axis=axes))


def marginal(f: Factor, keep: Sequence[int]) -> Factor:
    return sum_out_many(f, [v for v in f.scope if v not in keep])


def eliminate_deputy(f: Factor, e_prime: int, e: int, variables: VarTable | None = None) -> Factor:
    """Replace deputy ``e_prime`` by its original ``e``.

    A pure rename when ``e`` is not in scope; otherwise the diagonal
    ``e_prime == e`` is taken and ``e_prime`` dropped.
    """
    if e_prime not in f.scope:
        raise FactorError(f"deputy {e_prime} is not in scope {f.scope}")
    if variables is not None:
        dep = variables[e_prime]
        if dep.role is not Role.DEPUTY or dep.partner != e:
            raise FactorError(f"{e_prime} is not the deputy of {e}")
    labels = [e if v == e_prime else v for v in f.scope]
    if e in f.scope and f.cards[e] != f.cards[e_prime]:
        raise FactorError(f"deputy {e_prime} and {e} have different frames")
    out_scope = tuple(sorted(set(labels)))
    local = {v: i for i, v in enumerate(out_scope)}
    table = np.einsum(f.table, [local[v] for v in labels], [local[v] for v in out_scope])
    return Factor._make(out_scope, np.array(table))


def eliminate_deputies(f: Factor, pairs: Mapping[int, int]) -> Factor:
    """Eliminate every deputy in ``pairs`` (deputy id -> original id) present in f."""
    for dep, orig in sorted(pairs.items()):
        if dep in f.scope:
            f = eliminate_deputy(f, dep, orig)
    return f


def reduce_list(factors: Sequence[Factor], variables: VarTable) -> list[Factor]:
    """Combine nested-scope pairs until no factor's scope lies inside another's.

    Pairs are scanned by ascending index of the containing factor, then of
    the contained one; the combination takes the container's position.
    """
    fs = list(factors)
    while True:
        hit = None
        for j, g in enumerate(fs):
            gs = set(g.scope)
            for i, f in enumerate(fs):
                if i != j and gs.issuperset(f.scope):
                    hit = (i, j)
                    break
            if hit:
                break
        if hit is None:
            return fs
        i, j = hit
        fs[j] = combine(fs[i], fs[j], variables)
        del fs[i]


def indicator(x: int, alpha: int, card: int) -> Factor:
    if not 0 <= alpha < card:
        raise FactorError(f"value index {alpha} outside frame of size {card}")
    t = np.zeros(card)
    t[alpha] = 1.0
    return Factor((x,), t)


def normalize(f: Factor) -> tuple[np.ndarray, float]:
    z = float(f.table.sum())
    if z <= 0.0:
        return np.zeros_like(f.table), z
    return f.table / z, z


def broadcast_to(f: Factor, scope: Sequence[int], cards: Mapping[int, int]) -> Factor:
    """Extend f by constant copies along variables of ``scope`` it lacks."""
    scope = tuple(sorted(scope))
    missing = [v for v in scope if v not in f.scope]
    if not missing:
        return f
    ones = Factor(tuple(missing), np.ones([cards[v] for v in missing]))
    return multiply(f, ones)


def rename(f: Factor, old: int, new: int) -> Factor:
    """Relabel one scope variable; ``new`` must not already be in scope."""
    if old not in f.scope:
        raise FactorError(f"variable {old} is not in scope {f.scope}")
    if new in f.scope:
        raise FactorError(f"variable {new} is already in scope {f.scope}")
    labels = [new if v == old else v for v in f.scope]
    out_scope = tuple(sorted(labels))
    table = np.transpose(f.table, [labels.index(v) for v in out_scope])
    return Factor._make(out_scope, np.ascontiguousarray(table))
