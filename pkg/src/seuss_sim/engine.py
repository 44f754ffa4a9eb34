"""Deterministic discrete-event simulator of one FaaS compute node.

Single-threaded event loop over integer microseconds; ties break by event
insertion order, so a run is a pure function of (config, workload, seed).
Worker cores are logical: a shared FIFO of jobs feeds idle cores in
core-index order.  CPU-bound work occupies its core to completion; IO-bound
work releases the core during the wait and its completion re-queues at the
back of the FIFO, behind any queued CPU work.

Requests pass a control-plane stage (fixed round-trip latency plus a token
bucket at the measured peak rate) before reaching the backend.  The snapshot
backend adds a relay hop that serializes messages; the container backend is
in ``baseline``.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass
from typing import Callable

from .caches import CacheSet, MemoryBudget, PathKind
from .config import RunConfig, us
from .lifecycle import (
    AnticipatoryConfig,
    Behavior,
    FunctionProfile,
    UnikernelContext,
    build_runtime_template,
    cold_deploy,
    warm_deploy,
)
from .pagestore import PageStore
from .workload import Workload

MICRO = 1_000_000


class EventLoop:
    """Time-ordered callback queue; (time, seq) gives a total order."""

    def __init__(self) -> None:
        self.now = 0
        self._heap: list[tuple[int, int, Callable[[int], None]]] = []
        self._seq = itertools.count()

    def schedule(self, at_us: int, callback: Callable[[int], None]) -> None:
        if at_us < self.now:
            raise ValueError(f"cannot schedule into the past ({at_us} < {self.now})")
        heapq.heappush(self._heap, (at_us, next(self._seq), callback))

    def pending(self) -> int:
        return len(self._heap)

    def run(self) -> None:
        heap = self._heap
        while heap:
            at, _seq, cb = heapq.heappop(heap)
            self.now = at
            cb(at)


class TokenBucket:
    """Integer-arithmetic token bucket (1 token = MICRO micro-tokens)."""

    def __init__(self, rate_per_s: int, burst: int) -> None:
        if rate_per_s <= 0 or burst <= 0:
            raise ValueError("rate and burst must be positive")
        self.rate = rate_per_s          # micro-tokens per microsecond
        self.cap = burst * MICRO
        self.level = self.cap
        self.last = 0

    def admission_time(self, now: int) -> int:
        """Earliest instant at or after ``now`` a token is available.

        Consumes the token.  Calls must come with nondecreasing ``now``.
        """
        level = min(self.cap, self.level + (now - self.last) * self.rate)
        if level >= MICRO:
            self.level = level - MICRO
            self.last = now
            return now
        wait = -(-(MICRO - level) // self.rate)  # ceil division
        t = now + wait
        self.level = min(self.cap, level + wait * self.rate) - MICRO
        self.last = t
        return t


@dataclass
class Request:
    rid: int
    fn_id: str
    submit_us: int
    done_cb: Callable[[int], None]
    path: str = ""
    server_us: int = 0
    pages_written: int = 0


@dataclass(frozen=True)
class RequestRecord:
    rid: int
    fn_id: str
    submit_us: int
    complete_us: int
    path: str          # hot | warm | cold | fail
    status: str        # ok | failure reason
    server_us: int
    pages_written: int

    @property
    def latency_us(self) -> int:
        return self.complete_us - self.submit_us


@dataclass(frozen=True)
class TimelineSample:
    t_us: int
    bytes_resident: int
    warm_entries: int
    idle_contexts: int


@dataclass
class TrialResult:
    backend: str
    records: list[RequestRecord]
    timeline: list[TimelineSample]
    peak_bytes_resident: int
    reclaimed_contexts: int
    warm_entries: int
    idle_contexts: int


class CoreScheduler:
    """Shared FIFO of jobs feeding idle logical cores in index order.

    A job is ``start_cb(core, now) -> (busy_us, done_cb)``; the core is held
    for ``busy_us`` and then ``done_cb(core, now)`` runs before the core is
    returned to the idle set.
    """

    def __init__(self, loop: EventLoop, n_cores: int) -> None:
        self.loop = loop
        self.idle = list(range(n_cores))
        heapq.heapify(self.idle)
        self.ready: list = []
        self._head = 0

    def queue_depth(self) -> int:
        return len(self.ready) - self._head

    def submit(self, start_cb) -> None:
        self.ready.append(start_cb)
        self._pump()

    def _pump(self) -> None:
        while self.idle and self._head < len(self.ready):
            core = heapq.heappop(self.idle)
            start_cb = self.ready[self._head]
            self.ready[self._head] = None
            self._head += 1
            if self._head > 4096 and self._head * 2 > len(self.ready):
                del self.ready[: self._head]
                self._head = 0
            busy_us, done_cb = start_cb(core, self.loop.now)
            self.loop.schedule(
                self.loop.now + busy_us,
                lambda now, c=core, cb=done_cb: self._finish(c, cb, now))

    def _finish(self, core: int, done_cb, now: int) -> None:
        done_cb(core, now)
        heapq.heappush(self.idle, core)
        self._pump()


class SeussBackend:
    """Snapshot-stack node: warm pool, hot tubs, page-exact memory."""

    name = "seuss"

    def __init__(self, cfg: RunConfig, loop: EventLoop, workload: Workload,
                 complete_cb) -> None:
        self.cfg = cfg
        self.cost = cfg.cost_model
        self.loop = loop
        self.workload = workload
        self.complete_cb = complete_cb
        self.store = PageStore(page_size=cfg.node.page_size)
        self.template = build_runtime_template(
            self.store, "nodejs",
            AnticipatoryConfig(
                base_image_pages=cfg.anticipatory.base_image_pages,
                warmup_pages=cfg.anticipatory.warmup_pages,
                warmup_enabled=cfg.anticipatory.warmup_enabled,
                noopt_page_factor=cfg.anticipatory.noopt_page_factor),
            seed=cfg.seed)
        self.caches = CacheSet(cfg.node.worker_cores, cfg.node.hot_tub_per_core)
        self.budget = MemoryBudget(cfg.node.memory_bytes,
                                   cfg.node.oom_threshold_bytes)
        self.cores = CoreScheduler(loop, cfg.node.worker_cores)
        self.shim_free_us = 0
        self.reclaimed = 0

    # -- node surface ---------------------------------------------------------

    def arrive(self, req: Request, now: int) -> None:
        """Past the control plane: relay through the shim, then queue."""
        start = max(now, self.shim_free_us)
        self.shim_free_us = start + self.cost.shim_service_us
        deliver = start + self.cost.shim_rtt_us
        self.loop.schedule(
            deliver,
            lambda t, r=req: self.cores.submit(
                lambda core, now2: self._start(r, core, now2)))

    def _start(self, req: Request, core: int, now: int):
        prof = self.workload.profile_for(req.fn_id, self.cfg.pages)
        decision = self.caches.lookup(req.fn_id, core)
        if decision.kind == PathKind.HOT:
            uc = decision.uc
            path_cost = self.cost.hot_us
        elif decision.kind == PathKind.WARM:
            uc = warm_deploy(decision.snapshot, prof, self.template,
                             seed=self.cfg.seed)
            path_cost = self.cost.warm_base_us + self.cost.deploy_us
        else:
            uc, fn_snap = cold_deploy(self.template, prof, seed=self.cfg.seed)
            self.caches.warm.admit(fn_snap)
            path_cost = (self.cost.cold_base_us + self.cost.deploy_us
                         + self.cost.capture_us)
            # import+compile wrote the function's source pages
            req.pages_written = self.template.effective_source_pages(prof)
        req.path = decision.kind
        uc.start_run(prof)
        exec_us = us(prof.exec_time_ms)
        if prof.behavior is Behavior.IO_BOUND:
            io_us = us(prof.io_wait_ms)
            req.server_us = path_cost + io_us + exec_us
            busy = path_cost

            def parked(_core, t):
                # core released while the function waits on external IO;
                # completion re-queues behind whatever is ready
                self.loop.schedule(t + io_us, lambda t2: self.cores.submit(
                    lambda core2, now3: (exec_us,
                                         lambda c, t3: self._finish(req, uc, prof, c, t3))))

            return busy, parked
        req.server_us = path_cost + exec_us
        return (path_cost + exec_us,
                lambda c, t: self._finish(req, uc, prof, c, t))

    def _finish(self, req: Request, uc: UnikernelContext,
                prof: FunctionProfile, core: int, now: int) -> None:
        rec = uc.finish_run(prof)
        req.pages_written += rec.pages_written
        uc.last_idle_us = now
        uc.core = core
        if not self.caches.tubs[core].admit(uc):
            uc.destroy()
        self.reclaimed += self.caches.reclaim_idle(self.budget, self.store)
        self.complete_cb(req, now, "ok")

    # -- observation ------------------------------------------------------------

    def resident_bytes(self) -> int:
        return self.store.stats().bytes_resident

    def enforce_budget(self) -> None:
        self.reclaimed += self.caches.reclaim_idle(self.budget, self.store)

    def warm_entries(self) -> int:
        return len(self.caches.warm)

    def idle_contexts(self) -> int:
        return self.caches.idle_count()


class ClientDriver:
    """Replays the workload's client model against the simulation."""

    def __init__(self, sim: "Simulation", workload: Workload) -> None:
        self.sim = sim
        self.wl = workload
        self.queue_pos = 0
        self.stream_pos = [0] * len(workload.thread_streams)
        self.bucket = (TokenBucket(workload.client_rate_rps,
                                   burst=max(1, len(workload.thread_streams)))
                       if workload.client_rate_rps else None)

    def start(self) -> None:
        for at_us, fn in self.wl.timed:
            self.sim.loop.schedule(
                at_us, lambda now, f=fn: self.sim.submit(f, now, lambda _t: None))
        for _ in range(min(self.wl.concurrency, len(self.wl.shared_queue))):
            self._next_shared(0)
        for t in range(len(self.wl.thread_streams)):
            self._pull_stream(t, 0)

    def _next_shared(self, now: int) -> None:
        if self.queue_pos >= len(self.wl.shared_queue):
            return
        fn = self.wl.shared_queue[self.queue_pos]
        self.queue_pos += 1
        self.sim.submit(fn, now, self._next_shared)

    def _pull_stream(self, t: int, now: int) -> None:
        pos = self.stream_pos[t]
        stream = self.wl.thread_streams[t]
        if pos >= len(stream):
            return
        if self.wl.horizon_us is not None and now >= self.wl.horizon_us:
            return
        self.stream_pos[t] = pos + 1
        fn = stream[pos]
        fire_at = self.bucket.admission_time(now) if self.bucket else now
        if fire_at == now:
            self.sim.submit(fn, now, lambda t2, k=t: self._pull_stream(k, t2))
        else:
            self.sim.loop.schedule(
                fire_at,
                lambda now2, f=fn, k=t: self.sim.submit(
                    f, now2, lambda t2: self._pull_stream(k, t2)))


class Simulation:
    """One deterministic trial: config + workload + seed in, records out."""

    def __init__(self, cfg: RunConfig, workload: Workload) -> None:
        cfg.validate()
        self.cfg = cfg
        self.loop = EventLoop()
        self.workload = workload
        cp_burst = max(workload.concurrency, len(workload.thread_streams),
                       1)
        self.cp_bucket = TokenBucket(cfg.cost_model.control_plane_peak_rps,
                                     burst=cp_burst)
        if cfg.backend == "seuss":
            self.backend = SeussBackend(cfg, self.loop, workload, self._complete)
        else:
            from .baseline import LinuxBackend

            self.backend = LinuxBackend(cfg, self.loop, workload, self._complete)
        self.records: list[RequestRecord] = []
        self.submitted = 0
        self.open_requests = 0
        self._rid = itertools.count()
        self.timeline: list[TimelineSample] = []
        self.peak_resident = 0
        self.driver = ClientDriver(self, workload)

    # -- client-facing ---------------------------------------------------------

    def submit(self, fn_id: str, now: int, done_cb) -> None:
        req = Request(next(self._rid), fn_id, now, done_cb)
        self.submitted += 1
        self.open_requests += 1
        admitted = self.cp_bucket.admission_time(now)
        deliver = admitted + self.cfg.cost_model.control_plane_us
        self.loop.schedule(deliver, lambda t, r=req: self.backend.arrive(r, t))

    def _complete(self, req: Request, now: int, status: str) -> None:
        self.open_requests -= 1
        self.records.append(RequestRecord(
            rid=req.rid, fn_id=req.fn_id, submit_us=req.submit_us,
            complete_us=now, path=req.path if status == "ok" else "fail",
            status=status, server_us=req.server_us,
            pages_written=req.pages_written))
        self._observe()
        req.done_cb(now)

    # -- observation -------------------------------------------------------------

    def _observe(self) -> None:
        resident = self.backend.resident_bytes()
        if resident > self.peak_resident:
            self.peak_resident = resident

    def _sample(self, now: int) -> None:
        self.backend.enforce_budget()
        self._observe()
        self.timeline.append(TimelineSample(
            now, self.backend.resident_bytes(), self.backend.warm_entries(),
            self.backend.idle_contexts()))
        if self.open_requests > 0 or self._clients_pending():
            self.loop.schedule(now + us(self.cfg.sample_interval_ms),
                               self._sample)

    def _clients_pending(self) -> bool:
        d = self.driver
        if d.queue_pos < len(self.workload.shared_queue):
            return True
        if (self.workload.horizon_us is not None
                and self.loop.now >= self.workload.horizon_us):
            return False  # background threads stop pulling at the horizon
        return any(pos < len(s) for pos, s in
                   zip(d.stream_pos, self.workload.thread_streams))

    def run(self) -> TrialResult:
        self.driver.start()
        self.loop.schedule(0, self._sample)
        self.loop.run()
        if len(self.records) != self.submitted:
            raise RuntimeError(
                f"conservation violated: {self.submitted} submitted, "
                f"{len(self.records)} recorded")
        self._sample_final()
        return TrialResult(
            backend=self.cfg.backend,
            records=self.records,
            timeline=self.timeline,
            peak_bytes_resident=self.peak_resident,
            reclaimed_contexts=getattr(self.backend, "reclaimed", 0),
            warm_entries=self.backend.warm_entries(),
            idle_contexts=self.backend.idle_contexts(),
        )

    def _sample_final(self) -> None:
        self.timeline.append(TimelineSample(
            self.loop.now, self.backend.resident_bytes(),
            self.backend.warm_entries(), self.backend.idle_contexts()))


def run_simulation(cfg: RunConfig, workload: Workload) -> TrialResult:
    return Simulation(cfg, workload).run()
