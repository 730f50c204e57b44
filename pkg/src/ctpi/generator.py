"""Random networks, the CPCS-shaped presets and a few fixed test networks."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ctpi.factors import MAX, OR, SATURATING_SUM, CombinationOperator
from ctpi.network import (
    BayesNet,
    ContribList,
    FullCPT,
    NodeSpec,
    cpt_factor,
    full_cpts,
    make_noisy_or,
    expand_cpt,
    make_variable,
    pair_factor,
)


@dataclass(frozen=True)
class GeneratorConfig:
    """Parameters of a random network.

    Parent counts follow a geometric law on {0, 1, ...} with mean
    ``mean_parents``, truncated at the number of predecessors, and are then
    nudged one at a time until the total matches ``round(n * mean_parents)``
    exactly. Parents are drawn uniformly from the previous ``window`` nodes
    (all predecessors when ``window`` is None).

    ``frame_sizes`` / ``frame_weights`` give the frame-size mix; the count of
    each size is fixed to the rounded expectation and then shuffled.
    """

    nodes: int
    mean_parents: float = 1.0
    frame_sizes: tuple[int, ...] = (2,)
    frame_weights: tuple[float, ...] = (1.0,)
    convergent_fraction: float = 1.0
    operator: str = "or-max"
    seed: int = 0
    window: int | None = None
    min_fanin: int = 0
    absent_is_identity: bool = False
    name: str = "random"

    def check(self) -> None:
        if self.nodes < 1:
            raise ValueError("a network needs at least one node")
        if self.mean_parents < 0:
            raise ValueError("mean parent count must be non-negative")
        if len(self.frame_sizes) != len(self.frame_weights) or min(self.frame_sizes) < 2:
            raise ValueError("frame sizes must be >= 2 with one weight each")
        if not 0.0 <= self.convergent_fraction <= 1.0:
            raise ValueError("convergent fraction must lie in [0, 1]")
        if self.operator not in OPERATOR_CHOICES:
            raise ValueError(f"operator must be one of {sorted(OPERATOR_CHOICES)}")
        if self.min_fanin >= self.nodes:
            raise ValueError("min_fanin needs more nodes than parents")
        max_edges = sum(min(i, self.window or i) for i in range(self.nodes))
        if round(self.nodes * self.mean_parents) > max_edges:
            raise ValueError("mean parent count is infeasible for this node count")


OPERATOR_CHOICES = {"or-max", "max", "satsum"}

PRESETS = {
    "cpcs1": GeneratorConfig(145, 1.14, (2,), (1.0,), seed=1, window=12,
                             absent_is_identity=True, name="cpcs1"),
    "cpcs2": GeneratorConfig(145, 1.14, (2, 3), (0.73, 0.27), seed=2, window=12,
                             absent_is_identity=True, name="cpcs2"),
    "cpcs3": GeneratorConfig(245, 1.45, (2,), (1.0,), seed=3, window=12,
                             absent_is_identity=True, name="cpcs3"),
    "cpcs4": GeneratorConfig(245, 1.45, (2, 3), (0.75, 0.25), seed=4, window=12,
                             absent_is_identity=True, name="cpcs4"),
}

# node count, mean parents, mean frame size
PRESET_TARGETS = {
    "cpcs1": (145, 1.14, 2.0),
    "cpcs2": (145, 1.14, 2.27),
    "cpcs3": (245, 1.45, 2.0),
    "cpcs4": (245, 1.45, 2.25),
}


def _operator(kind: str, k: int) -> CombinationOperator:
    if kind == "satsum":
        return SATURATING_SUM
    if kind == "max" or k > 2:
        return MAX
    return OR


def _parent_counts(cfg: GeneratorConfig, rng: np.random.Generator) -> list[int]:
    n = cfg.nodes
    cap = [min(i, cfg.window or i) for i in range(n)]
    if cfg.min_fanin:
        cap[-1] = n - 1
    p = 1.0 / (1.0 + cfg.mean_parents)
    counts = [min(int(rng.geometric(p)) - 1, cap[i]) for i in range(n)]
    if cfg.min_fanin:
        counts[-1] = max(counts[-1], cfg.min_fanin)
    target = max(round(n * cfg.mean_parents), cfg.min_fanin)
    while sum(counts) != target:
        if sum(counts) > target:
            floor = [cfg.min_fanin if (cfg.min_fanin and i == n - 1) else 0 for i in range(n)]
            pool = [i for i in range(n) if counts[i] > floor[i]]
            counts[pool[rng.integers(len(pool))]] -= 1
        else:
            pool = [i for i in range(n) if counts[i] < cap[i]]
            counts[pool[rng.integers(len(pool))]] += 1
    return counts


def _frame_sizes(cfg: GeneratorConfig, rng: np.random.Generator) -> list[int]:
    w = np.asarray(cfg.frame_weights, dtype=float)
    w = w / w.sum()
    counts = np.floor(w * cfg.nodes).astype(int)
    # largest remainders get the leftover nodes
    for i in np.argsort(-(w * cfg.nodes - counts), kind="stable")[: cfg.nodes - counts.sum()]:
        counts[i] += 1
    sizes = [s for s, c in zip(cfg.frame_sizes, counts) for _ in range(c)]
    rng.shuffle(sizes)
    return [int(s) for s in sizes]


def _dirichlet(rng: np.random.Generator, k: int, rows: int = 1) -> np.ndarray:
    return rng.dirichlet(np.ones(k), size=rows)


def generate_network(cfg: GeneratorConfig) -> BayesNet:
    """Random network, a pure function of ``cfg``.

    Non-root nodes become convergent with probability
    ``convergent_fraction`` and then get random contributing factors.
    With ``absent_is_identity`` the column for parent value 0 puts all
    mass on the operator's identity, as in noisy-OR/noisy-MAX models.
    """
    cfg.check()
    rng = np.random.default_rng(cfg.seed)
    n = cfg.nodes
    counts = _parent_counts(cfg, rng)
    sizes = _frame_sizes(cfg, rng)
    parents = []
    for i, c in enumerate(counts):
        lo = 0 if cfg.window is None else max(0, i - cfg.window)
        if i == n - 1 and cfg.min_fanin:
            lo = 0
        pool = np.arange(lo, i)
        parents.append(tuple(sorted(int(p) for p in rng.choice(pool, size=c, replace=False))))
    convergent = [bool(parents[i]) and rng.random() < cfg.convergent_fraction for i in range(n)]
    if cfg.min_fanin:
        convergent[-1] = True
    variables = []
    for i in range(n):
        op = _operator(cfg.operator, sizes[i]) if convergent[i] else None
        variables.append(make_variable(i, f"x{i}", sizes[i], op))
    nodes = []
    for i in range(n):
        k = sizes[i]
        if convergent[i]:
            factors = []
            for p in parents[i]:
                cols = _dirichlet(rng, k, sizes[p])
                if cfg.absent_is_identity:
                    cols[0] = 0.0
                    cols[0, 0] = 1.0
                factors.append(pair_factor(i, p, cols))
            nodes.append(NodeSpec(i, parents[i], ContribList(tuple(factors))))
        else:
            rows = _dirichlet(rng, k, int(np.prod([sizes[p] for p in parents[i]], dtype=int)))
            nodes.append(NodeSpec(i, parents[i], FullCPT(cpt_factor(i, parents[i], rows, sizes))))
    return BayesNet(tuple(variables), tuple(nodes), cfg.name)


def preset(name: str, seed: int | None = None) -> BayesNet:
    cfg = PRESETS[name]
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    return generate_network(cfg)


def small_random_network(seed: int, max_nodes: int = 12, max_frame: int = 3,
                         fanin: int = 3, operator: str = "or-max") -> BayesNet:
    """Small network with one convergent node of at least ``fanin`` parents."""
    rng = np.random.default_rng([seed, 7])
    n = int(rng.integers(fanin + 1, max_nodes + 1))
    cfg = GeneratorConfig(
        nodes=n,
        mean_parents=float(rng.uniform(0.8, min(1.8, (n - 1) / 2))),
        frame_sizes=tuple(range(2, max_frame + 1)),
        frame_weights=tuple([1.0] * (max_frame - 1)),
        convergent_fraction=float(rng.uniform(0.4, 1.0)),
        operator=operator,
        seed=seed,
        min_fanin=fanin,
        name=f"small{seed}",
    )
    return generate_network(cfg)


def six_node_network(seed: int = 0, e3_factorized: bool = True) -> BayesNet:
    """Three binary causes a, b, c of convergent e1 and e2, which both cause e3.

    All three effects are noisy-OR with random inhibitor probabilities; the
    roots get random priors. With ``e3_factorized=False`` e3 stays
    convergent but carries its expanded table instead of contributing
    factors.
    """
    rng = np.random.default_rng(seed)
    names = ["a", "b", "c", "e1", "e2", "e3"]
    variables = [make_variable(i, nm, 2, OR if nm.startswith("e") else None)
                 for i, nm in enumerate(names)]
    nodes = [NodeSpec(i, (), FullCPT(cpt_factor(i, (), _dirichlet(rng, 2), [2] * 6))) for i in range(3)]
    for e in (3, 4):
        nodes.append(make_noisy_or(e, (0, 1, 2), rng.uniform(0.1, 0.9, 3), variables))
    e3 = make_noisy_or(5, (3, 4), rng.uniform(0.1, 0.9, 2), variables)
    if not e3_factorized:
        e3 = NodeSpec(5, (3, 4), FullCPT(expand_cpt(BayesNet(tuple(variables), tuple(nodes) + (e3,)), 5)))
    nodes.append(e3)
    return BayesNet(tuple(variables), tuple(nodes), "sixnode")


def fanin_network(seed: int = 0, n_parents: int = 16) -> BayesNet:
    """A noisy-OR node ``e`` with many parents inside a larger network.

    Each parent ``x_i`` has its own root cause ``r_i`` and ``e`` has a child
    ``y``; no two parents of ``e`` share any other node, so under the
    causal-independence moral graph no clique holds e's whole family.
    """
    rng = np.random.default_rng([seed, n_parents])
    m = n_parents
    variables = []
    for i in range(m):
        variables.append(make_variable(i, f"r{i}", 2))
    for i in range(m):
        variables.append(make_variable(m + i, f"x{i}", 2))
    e = 2 * m
    variables.append(make_variable(e, "e", 2, OR))
    variables.append(make_variable(e + 1, "y", 2))
    cards = [2] * (e + 2)
    nodes = [NodeSpec(i, (), FullCPT(cpt_factor(i, (), _dirichlet(rng, 2), cards))) for i in range(m)]
    for i in range(m):
        x = m + i
        nodes.append(NodeSpec(x, (i,), FullCPT(cpt_factor(x, (i,), _dirichlet(rng, 2, 2), cards))))
    nodes.append(make_noisy_or(e, tuple(range(m, 2 * m)), rng.uniform(0.05, 0.95, m), variables))
    nodes.append(NodeSpec(e + 1, (e,), FullCPT(cpt_factor(e + 1, (e,), _dirichlet(rng, 2, 2), cards))))
    return BayesNet(tuple(variables), tuple(nodes), f"fanin{m}")


def forward_sample(net: BayesNet, rng: np.random.Generator) -> list[int]:
    """One joint sample by ancestral sampling over the expanded tables."""
    cpts = full_cpts(net)
    values = [0] * len(net)
    for v in net.topological_order():
        f = cpts[v]
        idx = tuple(values[u] if u != v else slice(None) for u in f.scope)
        col = f.table[idx]
        values[v] = int(rng.choice(len(col), p=col / col.sum()))
    return values


def realized_stats(net: BayesNet) -> tuple[int, float, float]:
    n = len(net)
    mean_parents = sum(len(nd.parents) for nd in net.nodes) / n
    mean_frame = sum(v.card for v in net.variables) / n
    return n, mean_parents, mean_frame
