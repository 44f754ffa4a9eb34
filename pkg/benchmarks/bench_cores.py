#!/usr/bin/env python3
"""Benchmark the compiled page-store kernel against the pure-Python twin.

Two views:
  * micro: a synthetic op mix (deploy / write / capture / read / destroy)
    against each core in-process;
  * macro: an end-to-end all-unique throughput trial, run in a subprocess
    per core because the engine binds to one core at import time
    (SEUSS_SIM_PURE selects the fallback).

Usage: python benchmarks/bench_cores.py [--requests N]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time


def micro(core_module, rounds: int) -> float:
    store = core_module.PageStore(page_size=4096)
    content = b"\x42" * 4096
    image = store.create_base_image({i * 4096: content for i in range(2048)})
    base = image.boot().capture()
    t0 = time.perf_counter()
    for r in range(rounds):
        space = base.deploy()
        for i in range(391):
            space.write((0x10000 + (r * 397 + i * 7) % 65536) * 4096, content)
        snap = space.capture()
        clone = snap.deploy()
        for i in range(0, 391, 13):
            clone.read((0x10000 + (r * 397 + i * 7) % 65536) * 4096)
        clone.destroy()
        space.destroy()
        snap.delete()
    return time.perf_counter() - t0


MACRO_SCRIPT = """
import time, dataclasses
from seuss_sim.config import RunConfig
from seuss_sim.runner import throughput_trial
from seuss_sim import pagestore
cfg = RunConfig(backend="seuss").validate()
spec = dataclasses.replace(cfg.workload, n={n})
cfg = cfg.replace(workload=spec)
t0 = time.perf_counter()
trial = throughput_trial(cfg, {n})
elapsed = time.perf_counter() - t0
print(f"{{pagestore.BACKEND}} {{elapsed:.3f}} {{trial.stats.throughput_rps:.2f}}")
"""


def macro(pure: bool, n: int) -> tuple[str, float, float]:
    env = dict(os.environ, SEUSS_SIM_PURE="1" if pure else "0")
    out = subprocess.run([sys.executable, "-c", MACRO_SCRIPT.format(n=n)],
                         capture_output=True, text=True, env=env, check=True)
    backend, elapsed, rps = out.stdout.split()
    return backend, float(elapsed), float(rps)


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--rounds", type=int, default=300,
                        help="micro benchmark deploy/write/capture rounds")
    parser.add_argument("--requests", type=int, default=4000,
                        help="macro benchmark all-unique request count")
    args = parser.parse_args()

    from seuss_sim.pagestore import _pure

    cores = {"pure": _pure}
    try:
        from seuss_sim.pagestore import _kernel

        cores["compiled"] = _kernel
    except ImportError:
        print("compiled kernel not built; micro benchmark covers pure only")

    print(f"micro: {args.rounds} rounds of deploy/write(391)/capture/read/destroy")
    micro_times = {}
    for name, mod in cores.items():
        micro(mod, 20)  # warm up
        micro_times[name] = micro(mod, args.rounds)
        per_round = micro_times[name] / args.rounds * 1e6
        print(f"  {name:9s} {micro_times[name]:7.3f}s  ({per_round:7.1f} us/round)")
    if len(micro_times) == 2:
        print(f"  speedup   {micro_times['pure'] / micro_times['compiled']:.2f}x")

    print(f"macro: all-unique throughput trial, n={args.requests}")
    macro_times = {}
    for pure in (False, True):
        backend, elapsed, rps = macro(pure, args.requests)
        macro_times[backend] = elapsed
        print(f"  {backend:9s} {elapsed:7.3f}s  (simulated {rps} rps)")
    if len(macro_times) == 2:
        print(f"  speedup   {macro_times['pure'] / macro_times['compiled']:.2f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
