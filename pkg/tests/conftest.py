import itertools
import sys

import numpy as np
import pytest

from ctpi.factors import (
    MAX,
    OR,
    SATURATING_SUM,
    Factor,
    Frame,
    Role,
    Variable,
    combine_all,
    eliminate_deputies,
)
from ctpi.network import cpt_by_enumeration


def universe(rng, n=5, deputy_share=0.5):
    """Variables 0..n-1 of mixed roles; convergent ones get OR or MAX/SATSUM."""
    out = []
    for i in range(n):
        k = int(rng.integers(2, 4))
        if rng.random() < deputy_share:
            op = OR if k == 2 else (MAX if rng.random() < 0.5 else SATURATING_SUM)
            role = Role.DEPUTY if rng.random() < 0.5 else Role.CONVERGENT
            out.append(Variable(i, f"v{i}", Frame.of_size(k), role, op))
        else:
            out.append(Variable(i, f"v{i}", Frame.of_size(k)))
    return out


def random_factor(rng, variables, scope=None, max_vars=3):
    if scope is None:
        m = int(rng.integers(0, max_vars + 1))
        scope = sorted(rng.choice(len(variables), size=m, replace=False).tolist())
    scope = tuple(sorted(scope))
    shape = [variables[v].card for v in scope]
    return Factor(scope, rng.random(shape))


def combine_oracle(f, g, variables):
    """Entry-by-entry enumeration of the ⊗ definition."""
    conv = {v for v in set(f.scope) & set(g.scope)
            if variables[v].role in (Role.CONVERGENT, Role.DEPUTY)}
    scope = tuple(sorted(set(f.scope) | set(g.scope)))
    out = np.zeros([variables[v].card for v in scope])
    cv = sorted(conv)
    rest = [v for v in scope if v not in conv]
    for base in itertools.product(*[range(variables[v].card) for v in rest]):
        a = dict(zip(rest, base))
        for s1 in itertools.product(*[range(variables[v].card) for v in cv]):
            for s2 in itertools.product(*[range(variables[v].card) for v in cv]):
                af, ag = dict(a), dict(a)
                af.update(zip(cv, s1))
                ag.update(zip(cv, s2))
                val = f.table[tuple(af[v] for v in f.scope)] * g.table[tuple(ag[v] for v in g.scope)]
                res = dict(a)
                for v, x, y in zip(cv, s1, s2):
                    res[v] = int(variables[v].op.as_table(variables[v].card)[x, y])
                out[tuple(res[v] for v in scope)] += val
    return Factor(scope, out)

def chain_rule_joint(net):
    """Joint table by looping over every assignment and multiplying CPT entries."""
    cards = [v.card for v in net.variables]
    cpts = [cpt_by_enumeration(net, v) for v in range(len(net))]
    out = np.zeros(cards)
    for a in itertools.product(*[range(k) for k in cards]):
        p = 1.0
        for f in cpts:
            p *= f.table[tuple(a[v] for v in f.scope)]
        out[a] = p
    return out


def represented(fs, variables):
    """The potential a factor list stands for: combine, then substitute deputies."""
    f = combine_all(fs, variables)
    pairs = {v: variables[v].partner for v in f.scope if variables[v].role is Role.DEPUTY}
    return eliminate_deputies(f, pairs)


def deputy_universe(rng, n=6):
    """n regular variables; variable 2 is deputed with deputy id n."""
    k = int(rng.integers(2, 4))
    op = OR if k == 2 else MAX
    vs = [Variable(i, f"v{i}", Frame.of_size(k if i == 2 else int(rng.integers(2, 4))), op=op if i == 2 else None,
                   partner=n if i == 2 else None) for i in range(n)]
    vs.append(Variable(n, "v2'", Frame.of_size(k), Role.DEPUTY, op, 2))
    return vs


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
