#!/usr/bin/env python3
"""Benchmark reachability exploration and observer determinisation.

The workload is a product of independent modulo counters, so the state
count is (bound+1)**counters and every state is reachable. Defaults give
110_592 states, which a laptop should clear in a few seconds.

Usage: python3 scripts/bench_statespace.py [--counters N] [--bound B]
"""

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fssm import ExploreLimits, explore
from fssm.corpus import bench_counter_net
from fssm.noninterference import obs_from_dict
from fssm.opacity import build_observer


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--counters", type=int, default=3)
    ap.add_argument("--bound", type=int, default=47)
    ap.add_argument("--max-states", type=int, default=1_000_000)
    args = ap.parse_args()

    net = bench_counter_net(args.counters, args.bound)
    expected = (args.bound + 1) ** args.counters
    print(f"counter net: {args.counters} counters mod {args.bound + 1}, "
          f"{len(net.transitions)} transitions, {expected} states expected")

    t0 = time.perf_counter()
    g = explore(net, ExploreLimits(max_states=args.max_states))
    t1 = time.perf_counter()
    rate = len(g.states) / (t1 - t0)
    print(f"explore:  {len(g.states)} states, {len(g.edges)} edges in "
          f"{t1 - t0:.2f}s ({rate:,.0f} states/s)"
          + ("  [truncated]" if g.truncated else ""))

    # identity observation map: worst case, every macro-state is a singleton
    ident = obs_from_dict({t.id: t.id for t in net.transitions}, net)
    t2 = time.perf_counter()
    obs_auto = build_observer(g, ident)
    t3 = time.perf_counter()
    print(f"observer: {len(obs_auto.macro_states)} macro states in {t3 - t2:.2f}s "
          f"(identity map)")

    # silent map: single macro state absorbing everything
    silent = obs_from_dict({t.id: None for t in net.transitions}, net)
    t4 = time.perf_counter()
    obs_silent = build_observer(g, silent)
    t5 = time.perf_counter()
    print(f"observer: {len(obs_silent.macro_states)} macro state(s) in {t5 - t4:.2f}s "
          f"(all silent)")


if __name__ == "__main__":
    main()
