"""Exact Bayesian network inference exploiting independence of causal influence."""
from ctpi.factors import (
    AND,
    MAX,
    MIN,
    OR,
    SATURATING_SUM,
    CombinationOperator,
    Factor,
    Frame,
    OpKind,
    Role,
    Variable,
    combine,
    custom_operator,
    eliminate_deputy,
    indicator,
    multiply,
    reduce_list,
    sum_out,
    validate_operator,
)
from ctpi.network import (
    BayesNet,
    ContribList,
    FullCPT,
    NodeSpec,
    depute,
    expand_cpt,
    joint_brute_force,
    make_noisy_or,
    validate_network,
)
from ctpi.cliquetree import CliqueTree, GraphMode, build_clique_tree, build_moral_graph, triangulate
from ctpi.inference import Engine, EngineKind, get_prob, initialize, propagate, sumout_c, ve_query
from ctpi.netfile import parse_network, serialize_network

__version__ = "0.1.0"
