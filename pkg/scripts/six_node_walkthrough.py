"""Step through the six-node example: lists, messages and one posterior.

Three causes a, b, c feed two noisy-OR effects e1, e2, which feed e3. The
tree is the star with the {e1, e2, e3} clique in the middle.
"""
import argparse

import numpy as np

from ctpi.cliquetree import CliqueTree
from ctpi.generator import six_node_network
from ctpi.inference import absorb_evidence, get_prob, initialize, propagate
from ctpi.network import brute_posterior


def show(fs, names):
    return ", ".join(f"f({','.join(names[v] for v in f.scope)})" for f in fs) or "-"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--alpha", type=int, default=1, help="observed value of e1")
    args = ap.parse_args()

    net = six_node_network(args.seed)
    tree = CliqueTree((frozenset({0, 3, 4}), frozenset({1, 3, 4}), frozenset({2, 3, 4}), frozenset({3, 4, 5})),
                      ((0, 3), (1, 3), (2, 3)))
    it = initialize(net, tree, "ctpi")
    names = [v.name for v in it.variables]
    print(tree.dump(names))
    print("\nattached lists")
    for c, fs in enumerate(it.lists):
        print(f"  l{c + 1} = {{{show(fs, names)}}}")

    it = absorb_evidence(it, 3, args.alpha)
    print(f"\nafter e1={args.alpha}: l4 = {{{show(it.lists[3], names)}}}")
    state = propagate(it, pivot=3)
    print("\nmessages")
    for src, dst in state.schedule:
        print(f"  {src + 1} -> {dst + 1}: {{{show(state.messages[(src, dst)].factors, names)}}}")

    post = get_prob(state, 5).posterior
    want = brute_posterior(net, 5, {3: args.alpha})
    print(f"\nP(e3 | e1={args.alpha}) = {np.round(post, 12)}")
    print(f"brute force          = {np.round(want, 12)}  (max diff {np.max(np.abs(post - want)):.1e})")


if __name__ == "__main__":
    main()
