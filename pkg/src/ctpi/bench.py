"""Benchmark harness: random evidence cases, per-phase timings and counters.

Every case is run by every engine; posteriors are compared before any row
of that case is recorded, so timings are never reported for engines that
disagree.
"""
from __future__ import annotations

import csv
import json
import time
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ctpi.cliquetree import GraphMode, clique_tree_for
from ctpi.generator import forward_sample
from ctpi.inference import (
    EngineKind,
    absorb_all,
    get_prob,
    initialize,
    propagate,
    ve_query,
)
from ctpi.instrument import Counters, counting, observe_live
from ctpi.network import BayesNet

ENGINES = ("ctpi", "ctp", "ve")
COLUMNS = ("net", "case", "engine", "phase", "wall_ns", "peak_entries", "macc", "messages")
SETUP_CASE = -1


class EngineDisagreement(RuntimeError):
    pass


@dataclass(frozen=True)
class CaseSpec:
    cases: int
    observations: tuple[int, ...] = (5, 10, 15)
    seed: int = 0


@dataclass
class BenchRow:
    net: str
    case: int
    engine: str
    phase: str
    wall_ns: int
    peak_entries: int
    macc: int
    messages: int


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def aggregates(self) -> list[dict]:
        """Mean of every numeric column per (net, engine, phase)."""
        groups: dict[tuple[str, str, str], list[BenchRow]] = defaultdict(list)
        for r in self.rows:
            groups[(r.net, r.engine, r.phase)].append(r)
        out = []
        for (net, engine, phase), rows in groups.items():
            agg = {"net": net, "engine": engine, "phase": phase, "cases": len(rows)}
            for col in COLUMNS[4:]:
                agg[col] = float(np.mean([getattr(r, col) for r in rows]))
            out.append(agg)
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            for r in self.rows:
                w.writerow([getattr(r, c) for c in COLUMNS])

    def to_json(self) -> dict:
        return {"rows": [asdict(r) for r in self.rows], "aggregates": self.aggregates()}

    def write(self, path) -> None:
        if str(path).endswith(".json"):
            with open(path, "w") as fh:
                json.dump(self.to_json(), fh, indent=1)
        else:
            self.write_csv(path)


def make_cases(net: BayesNet, spec: CaseSpec) -> list[dict[int, int]]:
    """Observed sets cycle through ``spec.observations`` sizes.

    Observed values come from a forward sample, so every case has positive
    probability.
    """
    rng = np.random.default_rng([spec.seed, len(net)])
    n = len(net)
    cases = []
    for i in range(spec.cases):
        m = min(spec.observations[i % len(spec.observations)], n - 1)
        obs = sorted(int(v) for v in rng.choice(n, size=m, replace=False))
        values = forward_sample(net, rng)
        cases.append({v: values[v] for v in obs})
    return cases


class _Timer:
    def __init__(self):
        self.counters = Counters()

    def __enter__(self):
        self._ctx = counting(self.counters)
        self._ctx.__enter__()
        self.t0 = time.perf_counter_ns()
        return self

    def __exit__(self, *exc):
        self.wall_ns = time.perf_counter_ns() - self.t0
        self._ctx.__exit__(*exc)
        return False

    def row(self, net: str, case: int, engine: str, phase: str) -> BenchRow:
        c = self.counters
        return BenchRow(net, case, engine, phase, self.wall_ns, c.peak_entries, c.macc, c.messages)


class _Compiled:
    def __init__(self, net: BayesNet, engine: str, rows: list[BenchRow]):
        self.net, self.engine = net, engine
        if engine == "ve":
            return
        kind = EngineKind(engine)
        mode = GraphMode.ICI if kind is EngineKind.CTPI else GraphMode.STANDARD
        with _Timer() as t:
            self.tree = clique_tree_for(net, mode)
        rows.append(t.row(net.name, SETUP_CASE, engine, "construction"))
        with _Timer() as t:
            self.initialized = initialize(net, self.tree, kind)
        rows.append(t.row(net.name, SETUP_CASE, engine, "initialization"))

    def run(self, case: int, evidence: dict[int, int]) -> tuple[dict[int, np.ndarray], list[BenchRow]]:
        name = self.net.name
        targets = [v for v in range(len(self.net)) if v not in evidence]
        rows = []
        if self.engine == "ve":
            with _Timer() as t:
                post = {x: ve_query(self.net, x, evidence).posterior for x in targets}
            rows.append(t.row(name, case, "ve", "posterior"))
            return post, rows
        with _Timer() as t:
            it = absorb_all(self.initialized, evidence)
            observe_live(it.attached_entries())
        rows.append(t.row(name, case, self.engine, "absorption"))
        with _Timer() as t:
            state = propagate(it)
        rows.append(t.row(name, case, self.engine, "propagation"))
        with _Timer() as t:
            post = {x: get_prob(state, x).posterior for x in targets}
        rows.append(t.row(name, case, self.engine, "posterior"))
        return post, rows


def run_benchmark(nets: Sequence[BayesNet], spec: CaseSpec, engines: Sequence[str] = ("ctpi", "ctp"),
                  tol: float = 1e-9, progress=None) -> BenchReport:
    """Run every case on every engine and collect timings.

    Raises EngineDisagreement on the first posterior entry that differs by
    more than ``tol`` between an engine and the first engine listed.
    """
    for e in engines:
        if e not in ENGINES:
            raise ValueError(f"unknown engine {e!r}; choose from {ENGINES}")
    report = BenchReport()
    for net in nets:
        compiled = [_Compiled(net, e, report.rows) for e in engines]
        for case, evidence in enumerate(make_cases(net, spec)):
            results = [c.run(case, evidence) for c in compiled]
            ref_engine, (ref, _) = engines[0], results[0]
            for engine, (post, _) in zip(engines[1:], results[1:]):
                for x in ref:
                    diff = float(np.max(np.abs(post[x] - ref[x])))
                    if diff > tol:
                        raise EngineDisagreement(
                            f"{net.name} case {case}: {engine} and {ref_engine} differ on "
                            f"{net.variables[x].name} by {diff:.3g}"
                        )
            for _, rows in results:
                report.rows.extend(rows)
            if progress:
                progress(net.name, case)
    return report
