"""Memory and propagation time against the number of noisy-OR parents.

For each parent count the plain engine must hold the full family table of
the noisy-OR node, so its peak grows as 2^(m+1); the factorized engine only
ever stores pairwise pieces.
"""
import argparse
import statistics
import time

import numpy as np

from ctpi.generator import fanin_network, forward_sample
from ctpi.inference import Engine, absorb_all, propagate
from ctpi.instrument import Counters, counting


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--parents", default="4,8,12,16")
    ap.add_argument("--seeds", type=int, default=5)
    args = ap.parse_args()

    print(f"{'m':>3} {'engine':>6} {'peak entries':>13} {'median ms':>10}")
    for m in (int(s) for s in args.parents.split(",")):
        for kind in ("ctpi", "ctp"):
            peaks, times = [], []
            for seed in range(args.seeds):
                net = fanin_network(seed, m)
                sample = forward_sample(net, np.random.default_rng(seed))
                ev = {len(net) - 1: sample[-1]}
                c = Counters()
                with counting(c):
                    engine = Engine(net, kind)
                    it = absorb_all(engine.initialized, ev)
                    t0 = time.perf_counter()
                    propagate(it)
                    times.append(time.perf_counter() - t0)
                peaks.append(c.peak_entries)
            print(f"{m:>3} {kind:>6} {max(peaks):>13} {statistics.median(times) * 1e3:>10.2f}")


if __name__ == "__main__":
    main()
