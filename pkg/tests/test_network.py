import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctpi.factors import MAX, Role
from ctpi.generator import GeneratorConfig, six_node_network, generate_network, small_random_network
from ctpi.network import (
    BayesNet,
    ContribList,
    FullCPT,
    NetworkError,
    NodeSpec,
    brute_posterior,
    cpt_by_enumeration,
    cpt_factor,
    depute,
    deputized_joint,
    expand_cpt,
    joint_brute_force,
    make_noisy_or,
    make_variable,
    pair_factor,
    validate_network,
)
from ctpi.factors import OR
from conftest import chain_rule_joint



def two_parent_noisy_or(q1=0.2, q2=0.3):
    vs = [make_variable(0, "c1", 2), make_variable(1, "c2", 2), make_variable(2, "e", 2, OR)]
    nodes = [
        NodeSpec(0, (), FullCPT(cpt_factor(0, (), [[0.5, 0.5]], [2, 2, 2]))),
        NodeSpec(1, (), FullCPT(cpt_factor(1, (), [[0.5, 0.5]], [2, 2, 2]))),
        make_noisy_or(2, (0, 1), (q1, q2), vs),
    ]
    return BayesNet(tuple(vs), tuple(nodes))


def test_noisy_or_expansion():
    f = expand_cpt(two_parent_noisy_or(), 2)
    p1 = f.table[..., 1]  # scope (c1, c2, e)
    assert np.allclose(p1, [[0.0, 0.7], [0.8, 0.94]], atol=1e-15)


def test_noisy_or_columns():
    vs = [make_variable(0, "c", 2), make_variable(1, "e", 2, OR)]
    for q, col in [(0.0, [0.0, 1.0]), (1.0, [1.0, 0.0]), (0.25, [0.25, 0.75])]:
        f = make_noisy_or(1, (0,), (q,), vs).payload.factors[0]
        assert np.allclose(f.table[1], col)
        assert np.allclose(f.table[0], [1.0, 0.0])


def test_noisy_or_rejects_ternary():
    vs = [make_variable(0, "c", 3), make_variable(1, "e", 2, OR)]
    with pytest.raises(NetworkError):
        make_noisy_or(1, (0,), (0.5,), vs)


def test_single_parent_expansion_is_the_factor():
    vs = [make_variable(0, "c", 3), make_variable(1, "e", 3, MAX)]
    cols = [[0.2, 0.5, 0.3], [0.1, 0.1, 0.8], [0.6, 0.2, 0.2]]
    net = BayesNet(tuple(vs), (
        NodeSpec(0, (), FullCPT(cpt_factor(0, (), [[0.3, 0.3, 0.4]], [3, 3]))),
        NodeSpec(1, (0,), ContribList((pair_factor(1, 0, cols),))),
    ))
    assert expand_cpt(net, 1).allclose(net.nodes[1].payload.factors[0], 1e-15)


def test_expand_rejects_full_cpt():
    with pytest.raises(NetworkError):
        expand_cpt(two_parent_noisy_or(), 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_expand_matches_enumeration_and_normalizes(seed):
    net = small_random_network(seed, max_nodes=8)
    for e in net.contrib_nodes():
        f = expand_cpt(net, e)
        assert f.allclose(cpt_by_enumeration(net, e), 1e-12)
        sums = f.table.sum(axis=f.scope.index(e))
        assert np.allclose(sums, 1.0, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_expand_invariant_under_parent_order(seed):
    net = small_random_network(seed, max_nodes=8)
    e = net.contrib_nodes()[0]
    node = net.nodes[e]
    perm = np.random.default_rng(seed).permutation(len(node.parents))
    shuffled = NodeSpec(e, tuple(node.parents[i] for i in perm),
                        ContribList(tuple(node.payload.factors[i] for i in perm)))
    nodes = list(net.nodes)
    nodes[e] = shuffled
    other = BayesNet(net.variables, tuple(nodes))
    assert expand_cpt(other, e).allclose(expand_cpt(net, e), 1e-12)


def test_noisy_max_against_pair_enumeration(rng):
    vs = [make_variable(0, "c1", 3), make_variable(1, "c2", 3), make_variable(2, "e", 3, MAX)]
    cols = [rng.dirichlet(np.ones(3), size=3) for _ in range(2)]
    net = BayesNet(tuple(vs), (
        NodeSpec(0, (), FullCPT(cpt_factor(0, (), [[1 / 3] * 3], [3] * 3))),
        NodeSpec(1, (), FullCPT(cpt_factor(1, (), [[1 / 3] * 3], [3] * 3))),
        NodeSpec(2, (0, 1), ContribList((pair_factor(2, 0, cols[0]), pair_factor(2, 1, cols[1])))),
    ))
    f = expand_cpt(net, 2)
    for c1, c2 in itertools.product(range(3), repeat=2):
        want = np.zeros(3)
        for x1, x2 in itertools.product(range(3), repeat=2):
            want[max(x1, x2)] += cols[0][c1][x1] * cols[1][c2][x2]
        assert np.allclose(f.table[c1, c2], want, atol=1e-15)


def test_six_node_validates():
    assert validate_network(six_node_network()) == []


def test_cycle_is_reported():
    vs = [make_variable(0, "a", 2), make_variable(1, "b", 2)]
    net = BayesNet(tuple(vs), (
        NodeSpec(0, (1,), FullCPT(cpt_factor(0, (1,), [[0.5, 0.5]] * 2, [2, 2]))),
        NodeSpec(1, (0,), FullCPT(cpt_factor(1, (0,), [[0.5, 0.5]] * 2, [2, 2]))),
    ))
    assert any("acyclicity" in r for r in validate_network(net))


def test_contrib_column_sum_reported():
    vs = [make_variable(0, "c", 2), make_variable(1, "e", 2, OR)]
    net = BayesNet(tuple(vs), (
        NodeSpec(0, (), FullCPT(cpt_factor(0, (), [[0.5, 0.5]], [2, 2]))),
        NodeSpec(1, (0,), ContribList((pair_factor(1, 0, [[1.0, 0.0], [0.3, 0.6]]),))),
    ))
    report = validate_network(net)
    assert len(report) == 1 and "sums to 0.9" in report[0]


def test_invalid_operator_reported():
    from ctpi.factors import custom_operator
    vs = [make_variable(0, "c", 2), make_variable(1, "e", 2, custom_operator([[0, 0], [1, 1]], "left"))]
    net = BayesNet(tuple(vs), (
        NodeSpec(0, (), FullCPT(cpt_factor(0, (), [[0.5, 0.5]], [2, 2]))),
        NodeSpec(1, (0,), ContribList((pair_factor(1, 0, [[1.0, 0.0], [0.3, 0.7]]),))),
    ))
    assert any("commutativity" in r for r in validate_network(net))


def test_depute_six_node():
    net = six_node_network()
    df = depute(net)
    assert len(df.factors) == 11
    assert df.deputy_map == {3: 6, 4: 7, 5: 8}
    scopes = sorted(f.scope for f in df.factors)
    assert scopes == sorted([(0,), (1,), (2,), (0, 6), (1, 6), (2, 6), (0, 7), (1, 7), (2, 7), (3, 8), (4, 8)])
    for e, d in df.deputy_map.items():
        assert df.variables[e].role is Role.REGULAR
        assert df.variables[d].role is Role.DEPUTY and df.variables[d].partner == e
    assert len({v.id for v in df.variables}) == len(df.variables)


def test_depute_without_convergent_nodes():
    vs = [make_variable(0, "a", 2), make_variable(1, "b", 2)]
    net = BayesNet(tuple(vs), (
        NodeSpec(0, (), FullCPT(cpt_factor(0, (), [[0.4, 0.6]], [2, 2]))),
        NodeSpec(1, (0,), FullCPT(cpt_factor(1, (0,), [[0.9, 0.1], [0.2, 0.8]], [2, 2]))),
    ))
    df = depute(net)
    assert df.deputy_map == {}
    assert [f.scope for f in df.factors] == [n.payload.factor.scope for n in net.nodes]


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_deputation_preserves_joint(seed):
    net = small_random_network(seed, max_nodes=7)
    f = deputized_joint(depute(net), net)
    assert f.scope == tuple(range(len(net)))
    assert np.allclose(f.table, chain_rule_joint(net), rtol=0, atol=1e-12)


def test_brute_force_single_node():
    vs = [make_variable(0, "a", 2)]
    net = BayesNet(tuple(vs), (NodeSpec(0, (), FullCPT(cpt_factor(0, (), [[0.4, 0.6]], [2]))),))
    assert np.allclose(joint_brute_force(net).table, [0.4, 0.6])


def test_brute_force_with_evidence():
    vs = [make_variable(0, "a", 2), make_variable(1, "e", 2, OR)]
    net = BayesNet(tuple(vs), (
        NodeSpec(0, (), FullCPT(cpt_factor(0, (), [[0.5, 0.5]], [2, 2]))),
        make_noisy_or(1, (0,), (0.2,), vs),
    ))
    out = joint_brute_force(net, {1: 1})
    assert out.scope == (0,) and np.allclose(out.table, [0.0, 0.4], atol=1e-15)


def test_brute_force_cap(monkeypatch):
    net = six_node_network()
    with pytest.raises(NetworkError):
        joint_brute_force(net, cap=32)
    monkeypatch.setenv("ICI_ORACLE_CAP", "16")
    with pytest.raises(NetworkError):
        brute_posterior(net, 5)


def test_generator_single_node():
    net = generate_network(GeneratorConfig(nodes=1, mean_parents=0.0, seed=3))
    assert len(net) == 1 and net.nodes[0].parents == ()
    assert abs(net.nodes[0].payload.factor.table.sum() - 1.0) < 1e-12


def test_generator_rejects_infeasible_mean():
    with pytest.raises(ValueError):
        generate_network(GeneratorConfig(nodes=1, mean_parents=1.0))
