"""Snapshot-stack FaaS node model and simulator.

Layers, bottom up:

* ``pagestore``  — refcounted page frames, copy-on-write address spaces,
  immutable snapshot stacks (compiled kernel with pure-Python fallback);
* ``lifecycle``  — unikernel contexts: runtime templates, function
  snapshots, hot re-entry, synthetic page-exact execution;
* ``caches``     — warm pool, per-core hot tubs, idle-context reclaimer;
* ``engine``     — deterministic discrete-event simulation of one node
  (snapshot backend), ``baseline`` — the Linux-container comparison model;
* ``workload``   — diversity-sweep and burst generators, trace interchange;
* ``metrics``    — nearest-rank percentiles, throughput, CSV output;
* ``cli``        — ``seuss-sim`` entry point.
"""

from . import pagestore
from .config import RunConfig
from .engine import run_simulation
from .workload import generate

__version__ = "0.1.0"

__all__ = ["pagestore", "RunConfig", "run_simulation", "generate",
           "__version__"]
