"""Analytic Linux/Docker compute-node backend.

Function state lives in unpaused containers.  A hot start connects to an
idle container of the function; a warm start consumes a prewarmed stem cell
(unpause, then import+compile); a cold start evicts if the cache is full,
then pays a creation latency that grows with resident count and with
concurrent creations (plus seeded lognormal jitter for the tail).

Connections fail deterministically while the bridge holds more endpoints
than its capacity; containers mid-creation and mid-teardown count as
endpoints.  Stem-cell repopulation is a single batch job gated on a quiet
container-op path, delivered atomically, and abandoned whenever
request-driven container work starts, so sustained churn starves it.

Failures are data: a failed request produces a fail record, never an
exception.
"""

from __future__ import annotations

import heapq
import itertools
import random
from collections import deque
from typing import Callable

from .config import RunConfig, us
from .engine import CoreScheduler, EventLoop, Request
from .lifecycle import Behavior, FunctionProfile
from .workload import Workload


class _Container:
    __slots__ = ("fn_id", "busy", "deleted", "last_used_us", "idle_token", "seq")

    def __init__(self, fn_id: str, seq: int) -> None:
        self.fn_id = fn_id
        self.busy = True
        self.deleted = False
        self.last_used_us = 0
        self.idle_token = 0
        self.seq = seq


class _BulkRefill:
    __slots__ = ("remaining", "produced", "gen", "active_wave")

    def __init__(self, size: int, gen: int) -> None:
        self.remaining = size
        self.produced = 0
        self.gen = gen
        self.active_wave = 0


class LinuxBackend:
    name = "linux"

    def __init__(self, cfg: RunConfig, loop: EventLoop, workload: Workload,
                 complete_cb) -> None:
        self.cfg = cfg
        self.cm = cfg.container
        self.cost = cfg.cost_model
        self.loop = loop
        self.workload = workload
        self.complete_cb = complete_cb
        self.cores = CoreScheduler(loop, cfg.node.worker_cores)
        self.rng = random.Random(f"{cfg.seed}|container-jitter")

        self._seq = itertools.count()
        self.idle_by_fn: dict[str, list[_Container]] = {}
        self.idle_heap: list[tuple[int, int, int, _Container]] = []
        self.bound = 0              # live fn-bound containers (busy + idle)
        self.idle_count = 0
        self.prewarm = self.cm.prewarm_pool_size
        self.creations_in_flight = 0
        self.teardowns_in_flight = 0
        self.invocation_ops = 0     # request-driven container ops in flight
        self.last_op_end_us = 0
        self.bulk: _BulkRefill | None = None
        self.bulk_gen = 0
        self.cooldown_until = -1
        self.evict_waiters: deque[tuple[Request, FunctionProfile]] = deque()
        self.footprint_bytes = cfg.node.memory_bytes // self.cm.density_limit
        self.reclaimed = 0

    # -- capacity bookkeeping -------------------------------------------------

    def resident_containers(self) -> int:
        return self.bound + self.prewarm

    def endpoints(self) -> int:
        """Bridge endpoints and prospective cache occupancy.

        A victim keeps its endpoint (and cache slot) until its teardown
        completes, and an in-flight creation claims both the moment it
        starts, so request-driven evict+create cycles conserve this count.
        """
        return self.bound + self.prewarm + self.creations_in_flight

    def _connect_ok(self) -> bool:
        return self.endpoints() <= self.cm.bridge_capacity

    def _quiet_us(self) -> int:
        return us(self.cm.refill_quiet_ms)

    # -- container-op accounting (drives the stem-cell quiet gate) -------------

    def _op_begin(self) -> None:
        self.invocation_ops += 1
        if self.bulk is not None:
            self._abort_bulk()

    def _op_end(self, now: int) -> None:
        self.invocation_ops -= 1
        self.last_op_end_us = now
        if self.prewarm < self.cm.prewarm_pool_size:
            self.loop.schedule(now + self._quiet_us(), self._refill_check)

    # -- idle container pool ----------------------------------------------------

    def _park_idle(self, container: _Container, now: int) -> None:
        container.busy = False
        container.last_used_us = now
        container.idle_token += 1
        self.idle_count += 1
        self.idle_by_fn.setdefault(container.fn_id, []).append(container)
        heapq.heappush(self.idle_heap,
                       (now, container.seq, container.idle_token, container))
        if self.evict_waiters:
            req, prof = self.evict_waiters.popleft()
            self._cold_start(req, prof, now)

    def _take_idle(self, fn_id: str) -> _Container | None:
        stack = self.idle_by_fn.get(fn_id)
        if not stack:
            return None
        container = stack.pop()  # most recently used first
        container.busy = True
        self.idle_count -= 1
        return container

    def _pop_lru_idle(self) -> _Container | None:
        heap = self.idle_heap
        while heap:
            _t, _seq, token, container = heapq.heappop(heap)
            if (container.busy or container.deleted
                    or container.idle_token != token):
                continue
            self.idle_by_fn[container.fn_id].remove(container)
            self.idle_count -= 1
            return container
        return None

    # -- request handling -------------------------------------------------------

    def arrive(self, req: Request, now: int) -> None:
        prof = self.workload.profile_for(req.fn_id, self.cfg.pages)
        if self.cm.failure_cooldown_ms > 0 and now < self.cooldown_until:
            self._fail(req, now, "cooldown")
            return
        container = self._take_idle(req.fn_id)
        if container is not None:
            self._hot_start(req, prof, container, now)
        elif self.prewarm > 0:
            self._warm_start(req, prof, now)
        else:
            self._cold_start(req, prof, now)

    def _hot_start(self, req: Request, prof: FunctionProfile,
                   container: _Container, now: int) -> None:
        req.path = "hot"
        if not self._connect_ok():
            self._park_idle(container, now)
            self._fail(req, now, "bridge")
            return
        req.server_us += self.cost.hot_us
        self.loop.schedule(now + self.cost.hot_us,
                           lambda t: self._exec(req, prof, container, t))

    def _warm_start(self, req: Request, prof: FunctionProfile, now: int) -> None:
        req.path = "warm"
        self.prewarm -= 1
        self._op_begin()
        unpause = us(self.cm.unpause_ms)
        req.server_us += unpause
        self.loop.schedule(now + unpause,
                           lambda t: self._warm_unpaused(req, prof, t))

    def _warm_unpaused(self, req: Request, prof: FunctionProfile,
                       now: int) -> None:
        self._op_end(now)
        container = _Container(req.fn_id, next(self._seq))
        self.bound += 1
        if not self._connect_ok():
            self._park_idle(container, now)
            self._fail(req, now, "bridge")
            return
        self._import_compile(req, prof, container, now)

    def _cold_start(self, req: Request, prof: FunctionProfile,
                    now: int) -> None:
        req.path = "cold"
        if self.endpoints() >= self.cm.cache_limit:
            victim = self._pop_lru_idle()
            if victim is None:
                self.evict_waiters.append((req, prof))
                return
            victim.deleted = True  # stays in `bound` until teardown completes
            self.teardowns_in_flight += 1
            self._op_begin()
            concurrent = self.creations_in_flight + self.teardowns_in_flight
            delete = us(self.cm.delete_latency_ms(
                self.resident_containers(), concurrent))
            req.server_us += delete
            self.loop.schedule(now + delete,
                               lambda t: self._evicted(req, prof, t))
        else:
            self._create(req, prof, now)

    def _evicted(self, req: Request, prof: FunctionProfile, now: int) -> None:
        self.bound -= 1
        self.teardowns_in_flight -= 1
        self._op_end(now)
        self._create(req, prof, now)

    def _create(self, req: Request, prof: FunctionProfile, now: int) -> None:
        self.creations_in_flight += 1
        self._op_begin()
        # creations and teardowns contend on the same non-parallel paths
        concurrent = self.creations_in_flight + self.teardowns_in_flight
        base_ms = self.cm.create_latency_ms(self.resident_containers(),
                                            concurrent)
        jitter = (self.rng.lognormvariate(0.0, self.cm.jitter_sigma)
                  if self.cm.jitter_sigma > 0 else 1.0)
        duration = int(us(base_ms) * jitter)
        req.server_us += duration
        self.loop.schedule(now + duration,
                           lambda t: self._created(req, prof, t))

    def _created(self, req: Request, prof: FunctionProfile, now: int) -> None:
        self.creations_in_flight -= 1
        self._op_end(now)
        container = _Container(req.fn_id, next(self._seq))
        self.bound += 1
        if not self._connect_ok():
            self._park_idle(container, now)
            self._fail(req, now, "bridge")
            return
        self._import_compile(req, prof, container, now)

    def _import_compile(self, req: Request, prof: FunctionProfile,
                        container: _Container, now: int) -> None:
        compile_us = us(prof.import_compile_ms)
        req.server_us += compile_us
        self.loop.schedule(now + compile_us,
                           lambda t: self._exec(req, prof, container, t))

    def _exec(self, req: Request, prof: FunctionProfile,
              container: _Container, now: int) -> None:
        exec_us = us(prof.exec_time_ms)
        if prof.behavior is Behavior.IO_BOUND:
            io_us = us(prof.io_wait_ms)
            req.server_us += io_us + exec_us

            def start(_core, t):
                def parked(_c, t2):
                    self.loop.schedule(t2 + io_us, lambda t3: self.cores.submit(
                        lambda _core2, _t4: (
                            exec_us,
                            lambda c, t5: self._done(req, container, t5))))
                return 0, parked

            self.cores.submit(start)
        else:
            req.server_us += exec_us
            self.cores.submit(
                lambda _core, t: (exec_us,
                                  lambda c, t2: self._done(req, container, t2)))

    def _done(self, req: Request, container: _Container, now: int) -> None:
        self._park_idle(container, now)
        self.complete_cb(req, now, "ok")

    def _fail(self, req: Request, now: int, reason: str) -> None:
        if self.cm.failure_cooldown_ms > 0:
            self.cooldown_until = now + us(self.cm.failure_cooldown_ms)
        self.complete_cb(req, now, reason)

    # -- stem-cell (prewarm) repopulation ----------------------------------------

    def _abort_bulk(self) -> None:
        bulk = self.bulk
        if bulk is None:
            return
        self.creations_in_flight -= bulk.active_wave
        self.bulk = None
        self.bulk_gen += 1

    def _refill_check(self, now: int) -> None:
        if (self.bulk is not None or self.invocation_ops > 0
                or self.prewarm >= self.cm.prewarm_pool_size):
            return
        gate = self.last_op_end_us + self._quiet_us()
        if now < gate:
            self.loop.schedule(gate, self._refill_check)
            return
        self.bulk_gen += 1
        self.bulk = _BulkRefill(self.cm.prewarm_pool_size - self.prewarm,
                                self.bulk_gen)
        self._launch_wave(now)

    def _launch_wave(self, now: int) -> None:
        bulk = self.bulk
        wave = min(self.cm.refill_concurrency, bulk.remaining)
        bulk.active_wave = wave
        self.creations_in_flight += wave
        duration = us(self.cm.create_latency_ms(self.resident_containers(), wave))
        self.loop.schedule(
            now + duration,
            lambda t, gen=bulk.gen, k=wave: self._wave_done(gen, k, t))

    def _wave_done(self, gen: int, wave: int, now: int) -> None:
        bulk = self.bulk
        if bulk is None or bulk.gen != gen:
            return  # aborted mid-wave; accounting already rolled back
        self.creations_in_flight -= wave
        bulk.active_wave = 0
        bulk.produced += wave
        bulk.remaining -= wave
        if bulk.remaining > 0:
            self._launch_wave(now)
            return
        # delivered as one batch; the bridge does not care about the cache
        # accounting, so a full node can end up past its endpoint capacity
        self.prewarm += bulk.produced
        self.bulk = None

    # -- observation --------------------------------------------------------------

    def resident_bytes(self) -> int:
        return self.resident_containers() * self.footprint_bytes

    def enforce_budget(self) -> None:
        pass  # density and cache limits cap residency by construction

    def warm_entries(self) -> int:
        return self.prewarm

    def idle_contexts(self) -> int:
        return self.idle_count
