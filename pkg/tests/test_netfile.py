import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctpi.generator import six_node_network, preset, small_random_network
from ctpi.netfile import NetworkFormatError, parse_network, read_network, serialize_network, write_network

SIX = """\
net six
var a : f,t
var b : f,t
var c : f,t
var e1 : f,t convergent OR
var e2 : f,t convergent OR
var e3 : f,t convergent OR
cpt a : 0.6 0.4
cpt b : 0.7 0.3
cpt c : 0.8 0.2   # comments are fine
parents e1 <- a b c
contrib e1 <- a : 1 0; 0.2 0.8
contrib e1 <- b : 1 0; 0.3 0.7
contrib e1 <- c : 1 0; 0.4 0.6
parents e2 <- a b c
contrib e2 <- a : 1 0; 0.5 0.5
contrib e2 <- b : 1 0; 0.6 0.4
contrib e2 <- c : 1 0; 0.7 0.3
parents e3 <- e1 e2
contrib e3 <- e1 : 1 0; 0.1 0.9
contrib e3 <- e2 : 1 0; 0.2 0.8
"""


def test_parse_six_node():
    net = parse_network(SIX)
    assert len(net) == 6 and net.contrib_nodes() == [3, 4, 5]
    assert net.variables[3].frame.labels == ("f", "t")


def test_parse_six_node_with_full_cpt_for_e3():
    text = SIX.replace("contrib e3 <- e1 : 1 0; 0.1 0.9\ncontrib e3 <- e2 : 1 0; 0.2 0.8\n",
                        "cpt e3 : 1 0; 0.2 0.8; 0.1 0.9; 0.02 0.98\n")
    net = parse_network(text)
    assert net.contrib_nodes() == [3, 4]


def test_cpt_row_order_first_parent_slowest():
    text = """var a : 0,1
var b : 0,1,2
var x : 0,1
cpt a : 0.5 0.5
cpt b : 0.2 0.3 0.5
parents x <- b a
cpt x : 1 0; 0.9 0.1; 0.8 0.2; 0.7 0.3; 0.6 0.4; 0.5 0.5
"""
    f = parse_network(text).nodes[2].payload.factor  # scope (a, b, x)
    assert np.allclose(f.table[1, 0], [0.9, 0.1])
    assert np.allclose(f.table[0, 1], [0.8, 0.2])
    assert np.allclose(f.table[1, 2], [0.5, 0.5])


def test_empty_document():
    with pytest.raises(NetworkFormatError, match="no variables declared"):
        parse_network("# nothing here\n")


def test_row_sum_error_names_node_and_row():
    text = "var a : 0,1\nvar b : 0,1\ncpt a : 0.5 0.5\nparents b <- a\ncpt b : 0.5 0.5; 0.6 0.6\n"
    with pytest.raises(NetworkFormatError) as exc:
        parse_network(text)
    assert "b: cpt row 1 sums to 1.2" in str(exc.value)
    assert exc.value.line == 5


@pytest.mark.parametrize("text,needle,line", [
    ("var a : 0,1\nfoo a\n", "unknown directive", 2),
    ("var a : 0,1\ncpt a : 0.5 x\n", "not a number", 2),
    ("var a : 0,1\ncpt a : 0.5 0.5\nparents a <- z\n", "undeclared variable 'z'", 3),
    ("var a : 0,1\nvar a : 0,1\ncpt a : 0.5 0.5\n", "declared twice", 2),
    ("var a : 0,1 convergent XOR\ncpt a : 0.5 0.5\n", "unknown operator", 1),
    ("var a : 0,1\n", "no cpt or contrib", 1),
])
def test_errors_carry_positions(text, needle, line):
    with pytest.raises(NetworkFormatError) as exc:
        parse_network(text)
    assert needle in str(exc.value) and exc.value.line == line and exc.value.col >= 1


def test_column_points_at_token():
    with pytest.raises(NetworkFormatError) as exc:
        parse_network("var a : 0,1\ncpt a : 0.5 oops\n")
    assert exc.value.col == 13


def test_custom_operator_roundtrip():
    text = """op xor : 0 1; 1 0
var a : 0,1
var e : 0,1 convergent custom:xor
cpt a : 0.5 0.5
parents e <- a
contrib e <- a : 0.9 0.1; 0.2 0.8
"""
    net = parse_network(text)
    again = parse_network(serialize_network(net))
    assert serialize_network(again) == serialize_network(net)


def test_non_commutative_custom_operator_rejected():
    text = """op left : 0 0; 1 1
var a : 0,1
var e : 0,1 convergent custom:left
cpt a : 0.5 0.5
parents e <- a
contrib e <- a : 0.9 0.1; 0.2 0.8
"""
    with pytest.raises(NetworkFormatError, match="commutativity"):
        parse_network(text)


@pytest.mark.parametrize("make", [six_node_network, lambda: preset("cpcs2"), lambda: small_random_network(3)])
def test_roundtrip_is_exact(make, tmp_path):
    net = make()
    path = tmp_path / "n.net"
    write_network(net, path)
    back = read_network(path)
    assert serialize_network(back) == serialize_network(net)
    for a, b in zip(net.nodes, back.nodes):
        assert a.parents == b.parents
        fa = a.payload.factors if a.is_contrib else (a.payload.factor,)
        fb = b.payload.factors if b.is_contrib else (b.payload.factor,)
        for f, g in zip(fa, fb):
            assert f.scope == g.scope and np.array_equal(f.table, g.table)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_parse_serialize_parse_fixed_point(seed):
    text = serialize_network(small_random_network(seed))
    assert serialize_network(parse_network(text)) == text
