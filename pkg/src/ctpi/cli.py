"""Command line entry point.

Exit codes: 0 success, 1 usage error, 2 input error, 3 engine disagreement.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ctpi.bench import ENGINES, CaseSpec, EngineDisagreement, run_benchmark
from ctpi.cliquetree import GraphMode, clique_tree_for
from ctpi.generator import PRESETS, GeneratorConfig, generate_network, preset
from ctpi.inference import Engine, InferenceError, ve_query
from ctpi.netfile import NetworkFormatError, read_network, serialize_network
from ctpi.network import NetworkError, brute_posterior

EXIT_USAGE, EXIT_INPUT, EXIT_DISAGREE = 1, 2, 3


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load(path: str):
    if path in PRESETS:
        return preset(path)
    try:
        return read_network(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    except NetworkFormatError as exc:
        raise InputError(f"{path}: {exc}") from None


def _var(net, name: str) -> int:
    try:
        return net.id_of(name)
    except KeyError:
        raise InputError(f"unknown variable {name!r}") from None


def _evidence(net, text: str | None) -> dict[int, int]:
    out: dict[int, int] = {}
    if not text:
        return out
    for item in text.split(","):
        if "=" not in item:
            raise InputError(f"evidence item {item!r} is not of the form var=value")
        name, value = (s.strip() for s in item.split("=", 1))
        v = _var(net, name)
        labels = net.variables[v].frame.labels
        if value in labels:
            out[v] = labels.index(value)
        elif value.isdigit() and int(value) < len(labels):
            out[v] = int(value)
        else:
            raise InputError(f"{value!r} is not a value of {name} {list(labels)}")
    return out


def cmd_validate(args) -> int:
    net = _load(args.file)
    print(f"ok: {net.name}, {len(net)} variables, {len(net.contrib_nodes())} with contributing factors")
    return 0


def cmd_query(args) -> int:
    net = _load(args.file)
    evidence = _evidence(net, args.evidence)
    targets = [_var(net, t.strip()) for t in args.target.split(",") if t.strip()]
    if args.engine in ("ctpi", "ctp"):
        engine = Engine(net, args.engine, mode=args.mode)
        results = {x: r.posterior for x, r in engine.query(evidence, targets).items()}
    elif args.engine == "ve":
        results = {x: ve_query(net, x, evidence).posterior for x in targets}
    else:
        results = {x: brute_posterior(net, x, evidence) for x in targets}
    given = ", ".join(f"{net.variables[v].name}={net.variables[v].frame.labels[a]}"
                      for v, a in sorted(evidence.items()))
    for x, post in results.items():
        var = net.variables[x]
        cond = f" | {given}" if given else ""
        values = "  ".join(f"{lab}: {p:.12g}" for lab, p in zip(var.frame.labels, post))
        print(f"P({var.name}{cond}) = {values}")
    return 0


def cmd_gen(args) -> int:
    if args.preset:
        net = preset(args.preset, args.seed)
    else:
        if args.nodes is None:
            raise InputError("give --preset or --nodes")
        sizes = tuple(int(s) for s in args.frame_sizes.split(","))
        weights = (tuple(float(w) for w in args.frame_weights.split(","))
                   if args.frame_weights else tuple([1.0] * len(sizes)))
        cfg = GeneratorConfig(
            nodes=args.nodes, mean_parents=args.mean_parents, frame_sizes=sizes,
            frame_weights=weights, convergent_fraction=args.convergent_fraction,
            operator=args.operator, seed=args.seed or 0, window=args.window,
            name=args.name,
        )
        try:
            net = generate_network(cfg)
        except ValueError as exc:
            raise InputError(str(exc)) from None
    text = serialize_network(net)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    nets = [_load(p) for p in args.nets]
    engines = [e.strip() for e in args.engines.split(",")]
    bad = [e for e in engines if e not in ENGINES]
    if bad:
        raise InputError(f"unknown engine(s) {bad}; choose from {list(ENGINES)}")
    obs = tuple(int(m) for m in args.obs.split(","))
    report = run_benchmark(nets, CaseSpec(args.cases, obs, args.seed), engines)
    if args.out:
        report.write(args.out)
    for agg in report.aggregates():
        print(f"{agg['net']:>10} {agg['engine']:>5} {agg['phase']:>14} "
              f"wall_ms={agg['wall_ns'] / 1e6:10.3f} peak={agg['peak_entries']:12.1f} "
              f"macc={agg['macc']:14.1f}")
    return 0


def cmd_tree(args) -> int:
    net = _load(args.file)
    tree = clique_tree_for(net, args.mode)
    print(tree.dump([v.name for v in net.variables]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ctpi", description="Exact inference with factorized conditional tables.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("validate", help="parse and check a network file")
    s.add_argument("file")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("query", help="posterior probabilities")
    s.add_argument("file")
    s.add_argument("--evidence", default="")
    s.add_argument("--target", required=True)
    s.add_argument("--engine", choices=["ctpi", "ctp", "ve", "brute"], default="ctpi")
    s.add_argument("--mode", choices=[m.value for m in GraphMode], default=None)
    s.set_defaults(func=cmd_query)

    s = sub.add_parser("gen", help="generate a random network")
    s.add_argument("--preset", choices=sorted(PRESETS))
    s.add_argument("--nodes", type=int)
    s.add_argument("--mean-parents", type=float, default=1.0)
    s.add_argument("--frame-sizes", default="2")
    s.add_argument("--frame-weights", default=None)
    s.add_argument("--convergent-fraction", type=float, default=1.0)
    s.add_argument("--operator", default="or-max")
    s.add_argument("--window", type=int, default=None)
    s.add_argument("--name", default="random")
    s.add_argument("--seed", type=int, default=None)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("bench", help="time engines on random cases")
    s.add_argument("--nets", nargs="+", required=True, help="network files or preset names")
    s.add_argument("--cases", type=int, default=10)
    s.add_argument("--obs", default="5,10,15", help="observation counts, cycled over cases")
    s.add_argument("--engines", default="ctpi,ctp")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("tree", help="print the clique tree")
    s.add_argument("file")
    s.add_argument("--mode", choices=[m.value for m in GraphMode], default="ici")
    s.set_defaults(func=cmd_tree)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EngineDisagreement as exc:
        print(f"engine disagreement: {exc}", file=sys.stderr)
        return EXIT_DISAGREE
    except (InputError, NetworkError, InferenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
