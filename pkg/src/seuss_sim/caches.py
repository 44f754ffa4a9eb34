"""Warm pool, hot tubs, and the idle-context reclaimer.

The warm pool maps each function to its immutable snapshot (at most one per
function); deploying from it consumes nothing, so it serves any degree of
parallelism.  Hot tubs are per-core lists of live idle contexts: taking one
consumes it for the duration of an execution.  The reclaimer destroys idle
contexts, least-recently-idled first, whenever resident bytes exceed the
budget's high-water mark; running contexts and warm-pool snapshots are never
touched, so the node can always make forward progress.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .lifecycle import FunctionSnapshot, StateError, UCState, UnikernelContext
from .pagestore import PageStore


class PathKind:
    HOT = "hot"
    WARM = "warm"
    COLD = "cold"


class PathDecision(NamedTuple):
    kind: str
    uc: UnikernelContext | None = None
    snapshot: FunctionSnapshot | None = None


@dataclass(frozen=True)
class MemoryBudget:
    capacity_bytes: int
    oom_threshold_bytes: int

    def __post_init__(self):
        if not 0 < self.oom_threshold_bytes < self.capacity_bytes:
            raise ValueError("need 0 < oom_threshold_bytes < capacity_bytes")

    @property
    def high_water_bytes(self) -> int:
        return self.capacity_bytes - self.oom_threshold_bytes


class WarmPool:
    """fn_id -> function snapshot; entries are never consumed by deploys."""

    def __init__(self) -> None:
        self._entries: dict[str, FunctionSnapshot] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, fn_id: str) -> bool:
        return fn_id in self._entries

    def get(self, fn_id: str) -> FunctionSnapshot | None:
        return self._entries.get(fn_id)

    def admit(self, entry: FunctionSnapshot) -> None:
        """Install (or replace) the snapshot for a function.

        The pool pins the snapshot; a replaced snapshot is unpinned and
        deleted once nothing else depends on it.
        """
        entry.snapshot.acquire()
        old = self._entries.get(entry.fn_id)
        self._entries[entry.fn_id] = entry
        if old is not None:
            old.snapshot.release()
            if old.snapshot.refcount == 0:
                old.snapshot.delete()

    def functions(self) -> list[str]:
        return list(self._entries)


class HotTub:
    """Idle contexts parked on one core, newest last."""

    def __init__(self, core: int, capacity: int) -> None:
        self.core = core
        self.capacity = capacity
        self._idle: list[UnikernelContext] = []

    def __len__(self) -> int:
        return len(self._idle)

    def admit(self, uc: UnikernelContext) -> bool:
        """Park an idle context; False means the caller must destroy it."""
        if uc.state is not UCState.IDLE:
            raise StateError(f"uc{uc.uc_id} not idle")
        if len(self._idle) >= self.capacity:
            return False
        self._idle.append(uc)
        return True

    def take(self, fn_id: str) -> UnikernelContext | None:
        """Consume the most recently parked context bound to fn_id."""
        for i in range(len(self._idle) - 1, -1, -1):
            if self._idle[i].bound_fn == fn_id:
                return self._idle.pop(i)
        return None

    def evict(self, uc: UnikernelContext) -> None:
        self._idle.remove(uc)

    def members(self) -> list[UnikernelContext]:
        return list(self._idle)


class CacheSet:
    """All cache state of one node: warm pool plus one tub per core."""

    def __init__(self, cores: int, tub_capacity: int) -> None:
        self.warm = WarmPool()
        self.tubs = [HotTub(core, tub_capacity) for core in range(cores)]

    def idle_count(self) -> int:
        return sum(len(t) for t in self.tubs)

    def lookup(self, fn_id: str, core: int) -> PathDecision:
        """Hot beats warm beats cold; hot hits are same-core only."""
        uc = self.tubs[core].take(fn_id)
        if uc is not None:
            return PathDecision(PathKind.HOT, uc=uc)
        snap = self.warm.get(fn_id)
        if snap is not None:
            return PathDecision(PathKind.WARM, snapshot=snap)
        return PathDecision(PathKind.COLD)

    def reclaim_idle(self, budget: MemoryBudget, store: PageStore) -> int:
        """Destroy least-recently-idled contexts until back under the mark."""
        reclaimed = 0
        while store.stats().bytes_resident > budget.high_water_bytes:
            victim: UnikernelContext | None = None
            victim_tub: HotTub | None = None
            for tub in self.tubs:
                for uc in tub.members():
                    if victim is None or uc.last_idle_us < victim.last_idle_us:
                        victim, victim_tub = uc, tub
            if victim is None:
                break  # nothing idle: overcommit persists, running UCs untouched
            victim_tub.evict(victim)
            victim.destroy()
            reclaimed += 1
        return reclaimed
