"""Workload generation for the two macro experiments, plus trace export.

Generation is a pure function of the workload parameters (seed included);
the PRNG is Python's ``random.Random`` (Mersenne Twister) seeded with
explicit strings, so traces are portable and reproducible.  Two client
models exist:

* a shared ordered queue that C closed-loop workers pull from one at a time
  (the throughput experiment), and
* per-thread closed-loop streams under a global client-side rate cap, with
  open-loop bursts injected at fixed instants (the burst experiment).
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from .config import PageCalibration, WorkloadSpec
from .lifecycle import Behavior, FunctionProfile


@dataclass
class Workload:
    """Materialized request plan consumed by the simulator."""

    kind: str
    concurrency: int = 0                      # workers on the shared queue
    shared_queue: list[str] = field(default_factory=list)
    thread_streams: list[list[str]] = field(default_factory=list)
    timed: list[tuple[int, str]] = field(default_factory=list)  # (t_us, fn)
    client_rate_rps: int | None = None
    horizon_us: int | None = None
    profiles: dict[str, FunctionProfile] = field(default_factory=dict)

    def total_planned(self) -> int:
        return (len(self.shared_queue) + len(self.timed)
                + sum(len(s) for s in self.thread_streams))

    def profile_for(self, fn_id: str, pages: PageCalibration) -> FunctionProfile:
        prof = self.profiles.get(fn_id)
        if prof is None:
            # unknown function: a plain no-op profile created on the fly
            prof = FunctionProfile(
                fn_id=fn_id, source_pages=pages.source_pages,
                exec_pages=pages.exec_pages, hot_exec_pages=pages.hot_exec_pages)
            self.profiles[fn_id] = prof
        return prof


def _nop_profile(fn_id: str, pages: PageCalibration,
                 import_compile_ms: float) -> FunctionProfile:
    return FunctionProfile(
        fn_id=fn_id, source_pages=pages.source_pages,
        exec_pages=pages.exec_pages, hot_exec_pages=pages.hot_exec_pages,
        import_compile_ms=import_compile_ms)


def gen_throughput(spec: WorkloadSpec, pages: PageCalibration) -> Workload:
    """N invocations over M functions, balanced counts, seeded shuffle."""
    assert spec.kind == "throughput"
    fns = [f"f{i:05d}" for i in range(spec.m)]
    queue: list[str] = []
    base, extra = divmod(spec.n, spec.m)
    for i, fn in enumerate(fns):
        queue.extend([fn] * (base + (1 if i < extra else 0)))
    random.Random(f"{spec.seed}|throughput").shuffle(queue)
    profiles = {fn: _nop_profile(fn, pages, spec.import_compile_ms)
                for fn in fns}
    return Workload(kind="throughput", concurrency=spec.c, shared_queue=queue,
                    profiles=profiles)


def gen_burst(spec: WorkloadSpec, pages: PageCalibration) -> Workload:
    """Rate-capped IO background plus fixed-period CPU bursts to fresh fns."""
    assert spec.kind == "burst"
    period_us = spec.burst_period_s * 1_000_000
    horizon = (spec.burst_count + 1) * period_us
    profiles: dict[str, FunctionProfile] = {}

    bg_fns = [f"io{j:02d}" for j in range(spec.background_fns)]
    for fn in bg_fns:
        profiles[fn] = FunctionProfile(
            fn_id=fn, source_pages=pages.source_pages,
            exec_pages=pages.exec_pages, hot_exec_pages=pages.hot_exec_pages,
            behavior=Behavior.IO_BOUND, io_wait_ms=spec.io_wait_ms,
            import_compile_ms=spec.import_compile_ms)

    # generous per-thread stream bound: the global rate cap, not stream
    # exhaustion, must end the background
    per_thread = max(16, 3 * spec.background_rate_rps * (horizon // 1_000_000)
                     // spec.background_threads)
    # threads are pinned round-robin to functions, so per-function
    # parallelism is bounded by its dedicated thread count
    streams = [[bg_fns[t % spec.background_fns]] * per_thread
               for t in range(spec.background_threads)]

    timed: list[tuple[int, str]] = []
    for k in range(1, spec.burst_count + 1):
        fn = f"burst{k:02d}"
        profiles[fn] = FunctionProfile(
            fn_id=fn, source_pages=pages.source_pages,
            exec_pages=pages.exec_pages, hot_exec_pages=pages.hot_exec_pages,
            behavior=Behavior.CPU_BOUND, exec_time_ms=spec.burst_cpu_ms,
            import_compile_ms=spec.import_compile_ms)
        timed.extend((k * period_us, fn) for _ in range(spec.burst_size))

    return Workload(kind="burst", concurrency=0, thread_streams=streams,
                    timed=timed, client_rate_rps=spec.background_rate_rps,
                    horizon_us=horizon, profiles=profiles)


def generate(spec: WorkloadSpec, pages: PageCalibration) -> Workload:
    if spec.kind == "throughput":
        return gen_throughput(spec, pages)
    if spec.kind == "burst":
        return gen_burst(spec, pages)
    raise ValueError(f"unknown workload kind {spec.kind!r}")


# -- newline-delimited trace interchange -------------------------------------

def _profile_record(prof: FunctionProfile) -> dict:
    return {
        "profile": prof.fn_id,
        "runtime": prof.runtime_id,
        "source_pages": prof.source_pages,
        "exec_pages": prof.exec_pages,
        "hot_exec_pages": prof.hot_exec_pages,
        "exec_time_ms": prof.exec_time_ms,
        "behavior": prof.behavior.value,
        "io_wait_ms": prof.io_wait_ms,
        "import_compile_ms": prof.import_compile_ms,
    }


def export_trace(workload: Workload) -> str:
    """Serialize a workload as newline-delimited JSON records."""
    lines = [json.dumps({
        "meta": workload.kind,
        "concurrency": workload.concurrency,
        "client_rate_rps": workload.client_rate_rps,
        "horizon_us": workload.horizon_us,
    }, sort_keys=True)]
    for prof in workload.profiles.values():
        lines.append(json.dumps(_profile_record(prof), sort_keys=True))
    for fn in workload.shared_queue:
        lines.append(json.dumps({"q": fn}, sort_keys=True))
    for t, stream in enumerate(workload.thread_streams):
        for fn in stream:
            lines.append(json.dumps({"q": fn, "thread": t}, sort_keys=True))
    for at_us, fn in workload.timed:
        lines.append(json.dumps({"at_us": at_us, "q": fn}, sort_keys=True))
    return "\n".join(lines) + "\n"


def import_trace(text: str) -> Workload:
    meta: dict | None = None
    profiles: dict[str, FunctionProfile] = {}
    shared: list[str] = []
    streams: dict[int, list[str]] = {}
    timed: list[tuple[int, str]] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        if "meta" in rec:
            meta = rec
        elif "profile" in rec:
            profiles[rec["profile"]] = FunctionProfile(
                fn_id=rec["profile"], runtime_id=rec.get("runtime", "nodejs"),
                source_pages=rec["source_pages"], exec_pages=rec["exec_pages"],
                hot_exec_pages=rec["hot_exec_pages"],
                exec_time_ms=rec.get("exec_time_ms", 0.0),
                behavior=Behavior(rec.get("behavior", "nop")),
                io_wait_ms=rec.get("io_wait_ms", 0.0),
                import_compile_ms=rec.get("import_compile_ms", 300.0))
        elif "at_us" in rec:
            timed.append((rec["at_us"], rec["q"]))
        elif "thread" in rec:
            streams.setdefault(rec["thread"], []).append(rec["q"])
        elif "q" in rec:
            shared.append(rec["q"])
        else:
            raise ValueError(f"trace line {lineno}: unrecognized record {rec}")
    if meta is None:
        raise ValueError("trace has no meta record")
    thread_streams = [streams[k] for k in sorted(streams)]
    return Workload(kind=meta["meta"], concurrency=meta.get("concurrency") or 0,
                    shared_queue=shared, thread_streams=thread_streams,
                    timed=sorted(timed), client_rate_rps=meta.get("client_rate_rps"),
                    horizon_us=meta.get("horizon_us"), profiles=profiles)
