"""Line-oriented text format for networks with contributing factors.

::

    net <name>
    op <name> : <row>;<row>;...                 # custom operator table
    var <name> : <label>,<label>,...            # regular variable
    var <name> : <labels> convergent <OR|AND|MAX|MIN|SATSUM|custom:<op-name>>
    parents <name> <- <p1> <p2> ...
    cpt <name> : <row>;<row>;...
    contrib <name> <- <parent> : <row>;<row>;...

``cpt`` rows run over parent configurations with the first parent varying
slowest; entries run over the child's frame. ``contrib`` has one row per
value of the parent. Row entries are separated by spaces or commas; ``#``
starts a comment.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from ctpi.factors import (
    AND,
    MAX,
    MIN,
    OR,
    SATURATING_SUM,
    CombinationOperator,
    OpKind,
    custom_operator,
)
from ctpi.network import (
    NORMALIZATION_TOL,
    BayesNet,
    ContribList,
    FullCPT,
    NodeSpec,
    cpt_factor,
    cpt_rows,
    make_variable,
    pair_factor,
    validate_network,
)

BUILTIN_OPS = {"OR": OR, "AND": AND, "MAX": MAX, "MIN": MIN, "SATSUM": SATURATING_SUM}
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-']*$")


class NetworkFormatError(ValueError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.message, self.line, self.col = message, line, col
        where = f"line {line}, col {col}: " if line else ""
        super().__init__(where + message)


@dataclass
class _Line:
    no: int
    raw: str
    text: str

    def col(self, token: str) -> int:
        i = self.raw.find(token)
        return i + 1 if i >= 0 else 1

    def fail(self, message: str, token: str | None = None) -> NetworkFormatError:
        return NetworkFormatError(message, self.no, self.col(token) if token else 1)


@dataclass
class _VarDecl:
    line: _Line
    name: str
    labels: list[str]
    op: str | None


@dataclass
class _Doc:
    name: str | None = None
    ops: dict[str, tuple[_Line, list[list[float]]]] = field(default_factory=dict)
    vars: list[_VarDecl] = field(default_factory=list)
    parents: dict[str, tuple[_Line, list[str]]] = field(default_factory=dict)
    cpts: dict[str, tuple[_Line, list[list[float]]]] = field(default_factory=dict)
    contribs: dict[str, dict[str, tuple[_Line, list[list[float]]]]] = field(default_factory=dict)


def _rows(line: _Line, body: str) -> list[list[float]]:
    rows = []
    for chunk in body.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        row = []
        for tok in re.split(r"[\s,]+", chunk):
            try:
                row.append(float(tok))
            except ValueError:
                raise line.fail(f"not a number: {tok!r}", tok) from None
        rows.append(row)
    if not rows:
        raise line.fail("empty table")
    return rows


def _check_name(line: _Line, name: str) -> str:
    if not _NAME.match(name):
        raise line.fail(f"bad name {name!r}", name)
    return name


def _split_colon(line: _Line, rest: str) -> tuple[str, str]:
    if ":" not in rest:
        raise line.fail("expected ':'")
    head, body = rest.split(":", 1)
    return head.strip(), body.strip()


def _scan(text: str) -> _Doc:
    doc = _Doc()
    for no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if not stripped:
            continue
        line = _Line(no, raw, stripped)
        word, _, rest = stripped.partition(" ")
        rest = rest.strip()
        if word == "net":
            if doc.name is not None:
                raise line.fail("second 'net' line")
            doc.name = _check_name(line, rest) if rest else "net"
        elif word == "op":
            head, body = _split_colon(line, rest)
            name = _check_name(line, head)
            if name in doc.ops:
                raise line.fail(f"operator {name} declared twice", name)
            doc.ops[name] = (line, _rows(line, body))
        elif word == "var":
            head, body = _split_colon(line, rest)
            name = _check_name(line, head)
            parts = body.split()
            if not parts:
                raise line.fail(f"variable {name} has no labels")
            labels = [s.strip() for s in parts[0].split(",") if s.strip()]
            op = None
            if len(parts) > 1:
                if parts[1] != "convergent" or len(parts) != 3:
                    raise line.fail("expected 'convergent <operator>' after the labels", parts[1])
                op = parts[2]
            doc.vars.append(_VarDecl(line, name, labels, op))
        elif word == "parents":
            if "<-" not in rest:
                raise line.fail("expected '<-'")
            head, body = (s.strip() for s in rest.split("<-", 1))
            if head in doc.parents:
                raise line.fail(f"second parents line for {head}", head)
            doc.parents[head] = (line, body.split())
        elif word == "cpt":
            head, body = _split_colon(line, rest)
            if head in doc.cpts:
                raise line.fail(f"second cpt for {head}", head)
            doc.cpts[head] = (line, _rows(line, body))
        elif word == "contrib":
            head, body = _split_colon(line, rest)
            if "<-" not in head:
                raise line.fail("expected '<-'")
            child, parent = (s.strip() for s in head.split("<-", 1))
            per = doc.contribs.setdefault(child, {})
            if parent in per:
                raise line.fail(f"second contrib line for {child} <- {parent}", parent)
            per[parent] = (line, _rows(line, body))
        else:
            raise line.fail(f"unknown directive {word!r}", word)
    return doc


def _operator(decl: _VarDecl, doc: _Doc) -> CombinationOperator:
    spec = decl.op
    if spec in BUILTIN_OPS:
        return BUILTIN_OPS[spec]
    if spec.startswith("custom:"):
        ref = spec[len("custom:"):]
        if ref not in doc.ops:
            raise decl.line.fail(f"undeclared operator table {ref!r}", ref)
        rows = doc.ops[ref][1]
        table = np.asarray(rows)
        if table.shape != (len(decl.labels), len(decl.labels)) or np.any(table != np.round(table)):
            raise decl.line.fail(f"operator table {ref} does not fit the frame of {decl.name}", ref)
        return custom_operator(table.astype(int), ref)
    raise decl.line.fail(f"unknown operator {spec!r}", spec)


def _check_rows(line: _Line, node: str, what: str, rows, n_rows: int, width: int) -> None:
    if len(rows) != n_rows:
        raise line.fail(f"{node}: {what} needs {n_rows} rows, got {len(rows)}")
    for i, row in enumerate(rows):
        if len(row) != width:
            raise line.fail(f"{node}: {what} row {i} has {len(row)} entries, frame has {width}")
        if any(p < 0 or not np.isfinite(p) for p in row):
            raise line.fail(f"{node}: {what} row {i} has a negative or non-finite entry")
        if abs(sum(row) - 1.0) > NORMALIZATION_TOL:
            raise line.fail(f"{node}: {what} row {i} sums to {sum(row):.12g}")


def parse_network(text: str) -> BayesNet:
    """Parse and validate a network document.

    Raises NetworkFormatError with line and column for syntax errors and
    for semantic ones (undeclared names, duplicates, bad tables).
    """
    doc = _scan(text)
    if not doc.vars:
        raise NetworkFormatError("no variables declared")
    ids: dict[str, int] = {}
    variables = []
    for decl in doc.vars:
        if decl.name in ids:
            raise decl.line.fail(f"variable {decl.name} declared twice", decl.name)
        if len(decl.labels) < 2 or len(set(decl.labels)) != len(decl.labels):
            raise decl.line.fail(f"{decl.name}: a frame needs at least two distinct labels")
        op = _operator(decl, doc) if decl.op else None
        ids[decl.name] = len(variables)
        variables.append(make_variable(len(variables), decl.name, decl.labels, op))
    cards = [v.card for v in variables]

    def lookup(line: _Line, name: str) -> int:
        if name not in ids:
            raise line.fail(f"undeclared variable {name!r}", name)
        return ids[name]

    for table in (doc.parents, doc.cpts, doc.contribs):
        for name in table:
            entry = table[name]
            line = entry[0] if isinstance(entry, tuple) else next(iter(entry.values()))[0]
            lookup(line, name)

    nodes = []
    for decl in doc.vars:
        x = ids[decl.name]
        parents: list[int] = []
        if decl.name in doc.parents:
            pline, pnames = doc.parents[decl.name]
            parents = [lookup(pline, p) for p in pnames]
            if len(set(parents)) != len(parents):
                raise pline.fail(f"{decl.name}: repeated parent")
        has_cpt = decl.name in doc.cpts
        contribs = doc.contribs.get(decl.name)
        if has_cpt and contribs:
            raise doc.cpts[decl.name][0].fail(f"{decl.name} has both a cpt and contrib lines", decl.name)
        if has_cpt:
            line, rows = doc.cpts[decl.name]
            n_rows = int(np.prod([cards[p] for p in parents], dtype=int))
            _check_rows(line, decl.name, "cpt", rows, n_rows, cards[x])
            nodes.append(NodeSpec(x, tuple(parents), FullCPT(cpt_factor(x, parents, rows, cards))))
        elif contribs:
            first = next(iter(contribs.values()))[0]
            if decl.op is None:
                raise first.fail(f"{decl.name} is not convergent but has contrib lines", decl.name)
            factors = []
            for pname, (line, rows) in contribs.items():
                p = lookup(line, pname)
                if p not in parents:
                    raise line.fail(f"{pname} is not a parent of {decl.name}", pname)
            for p in parents:
                pname = variables[p].name
                if pname not in contribs:
                    raise first.fail(f"{decl.name}: no contrib line for parent {pname}")
                line, rows = contribs[pname]
                _check_rows(line, decl.name, f"contrib from {pname}", rows, cards[p], cards[x])
                factors.append(pair_factor(x, p, rows))
            nodes.append(NodeSpec(x, tuple(parents), ContribList(tuple(factors))))
        else:
            raise decl.line.fail(f"{decl.name} has no cpt or contrib lines", decl.name)

    net = BayesNet(tuple(variables), tuple(nodes), doc.name or "net")
    report = validate_network(net)
    if report:
        raise NetworkFormatError("; ".join(report))
    return net


def _num(x: float) -> str:
    return repr(float(x))


def _fmt_rows(rows) -> str:
    return ";".join(" ".join(_num(v) for v in row) for row in rows)


def serialize_network(net: BayesNet) -> str:
    """Canonical text form; parsing it gives back an identical network."""
    names = [v.name for v in net.variables]
    out = [f"net {net.name}"]
    op_names: dict[int, str] = {}
    for v in net.variables:
        if v.op is not None and v.op.kind is OpKind.CUSTOM:
            name = v.op.name or f"op_{v.name}"
            if name not in op_names.values():
                table = ";".join(" ".join(str(int(c)) for c in row) for row in v.op.table)
                out.append(f"op {name} : {table}")
            op_names[v.id] = name
    for v in net.variables:
        line = f"var {v.name} : {','.join(v.frame.labels)}"
        if v.op is not None:
            kind = f"custom:{op_names[v.id]}" if v.op.kind is OpKind.CUSTOM else v.op.kind.value
            line += f" convergent {kind}"
        out.append(line)
    for node in net.nodes:
        x = node.var
        if node.parents:
            out.append(f"parents {names[x]} <- {' '.join(names[p] for p in node.parents)}")
        if isinstance(node.payload, FullCPT):
            out.append(f"cpt {names[x]} : {_fmt_rows(cpt_rows(node.payload.factor, x, node.parents))}")
        else:
            for p, f in zip(node.parents, node.payload.factors):
                cols = f.table if f.scope[0] == p else f.table.T
                out.append(f"contrib {names[x]} <- {names[p]} : {_fmt_rows(cols)}")
    return "\n".join(out) + "\n"


def read_network(path) -> BayesNet:
    with open(path) as fh:
        return parse_network(fh.read())


def write_network(net: BayesNet, path) -> None:
    with open(path, "w") as fh:
        fh.write(serialize_network(net))
