"""Unikernel-context lifecycle over the page store.

A runtime template is a booted base image plus the runtime snapshot captured
from it (optionally after anticipatory warm-up writes).  A cold deploy clones
the runtime snapshot, "imports and compiles" the function by writing its
source pages, and captures the function-specific snapshot; warm deploys clone
that snapshot directly; hot re-entry reuses a live idle context.

Function "execution" never interprets code: each run writes a deterministic
pseudo-random set of page addresses derived from (seed, fn_id, phase, run
index), so memory accounting is exact and reproducible.  Source and
first-run windows are disjoint, which makes a cold invocation's cumulative
private pages exactly source_pages + exec_pages.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

from .pagestore import AddressSpace, BaseImage, PageStore, Snapshot

# Disjoint page-number windows for synthetic writes.
_WARMUP_BASE = 0x20_0000
_SOURCE_BASE = 0x40_0000
_EXEC_BASE = 0x80_0000
_WINDOW_SPAN = 0x10_0000


class LifecycleError(Exception):
    """Base class for UC lifecycle misuse."""


class StateError(LifecycleError):
    """Operation applied in an illegal lifecycle state."""


class BindingError(LifecycleError):
    """Function identity does not match the context or snapshot."""


class UCState(enum.Enum):
    AWAITING_SOURCE = "awaiting_source"
    AWAITING_INPUT = "awaiting_input"
    RUNNING = "running"
    IDLE = "idle"
    DESTROYED = "destroyed"


class Behavior(enum.Enum):
    NOP = "nop"
    CPU_BOUND = "cpu"
    IO_BOUND = "io"


@dataclass(frozen=True)
class FunctionProfile:
    """Static description of a function's cost and memory behavior.

    Page counts are the calibrated per-invocation allocation counts: pages
    written while importing+compiling source, during a first execution, and
    during a re-execution in an already-used context.
    """

    fn_id: str
    runtime_id: str = "nodejs"
    source_pages: int = 136
    exec_pages: int = 391
    hot_exec_pages: int = 13
    exec_time_ms: float = 0.0
    behavior: Behavior = Behavior.NOP
    io_wait_ms: float = 0.0
    import_compile_ms: float = 300.0  # container-backend import+compile cost

    def __post_init__(self):
        if min(self.source_pages, self.exec_pages, self.hot_exec_pages) < 0:
            raise ValueError("page counts must be >= 0")
        if self.exec_time_ms < 0 or self.io_wait_ms < 0:
            raise ValueError("durations must be >= 0")
        if self.behavior is Behavior.IO_BOUND and self.io_wait_ms == 0:
            raise ValueError("IO-bound profile needs io_wait_ms > 0")


@dataclass(frozen=True)
class AnticipatoryConfig:
    """Sizing for the runtime template and the warm-up toggle.

    With warm-up enabled the runtime snapshot absorbs ``warmup_pages`` of
    interpreter/network state and per-function page counts apply as given;
    disabled, function deploys pay ``noopt_page_factor`` times the source and
    first-run pages instead.
    """

    base_image_pages: int = 29312  # 114.5 MiB of 4 KiB pages
    warmup_pages: int = 408
    warmup_enabled: bool = True
    noopt_page_factor: int = 4


class ExecutionRecord(NamedTuple):
    pages_written: int
    simulated_duration_ms: float


@lru_cache(maxsize=32)
def _fill_page(page_size: int, tag: int) -> bytes:
    return bytes([tag & 0xFF]) * page_size


def _phase_pages(seed: int, fn_id: str, phase: str, index: int,
                 count: int, window_base: int) -> list[int]:
    """Deterministic scattered page numbers, distinct within one call.

    Affine scatter: an odd stride modulo the power-of-two window visits
    distinct slots, at two PRNG draws per phase instead of one per page.
    """
    if count > _WINDOW_SPAN:
        raise ValueError(f"phase write count {count} exceeds window")
    rnd = random.Random(f"{seed}|{fn_id}|{phase}|{index}")
    offset = rnd.randrange(_WINDOW_SPAN)
    stride = rnd.randrange(1, _WINDOW_SPAN, 2)
    mask = _WINDOW_SPAN - 1
    return [window_base + ((offset + i * stride) & mask) for i in range(count)]


@dataclass
class RuntimeTemplate:
    runtime_id: str
    base: BaseImage
    runtime_snapshot: Snapshot
    config: AnticipatoryConfig

    @property
    def warmup_enabled(self) -> bool:
        return self.config.warmup_enabled

    def stack_pages(self) -> int:
        return self.runtime_snapshot.stack_pages()

    def effective_source_pages(self, profile: FunctionProfile) -> int:
        if self.config.warmup_enabled:
            return profile.source_pages
        return profile.source_pages * self.config.noopt_page_factor

    def effective_exec_pages(self, profile: FunctionProfile) -> int:
        if self.config.warmup_enabled:
            return profile.exec_pages
        return profile.exec_pages * self.config.noopt_page_factor


class FunctionSnapshot(NamedTuple):
    """Warm-pool entry: an immutable snapshot bound to one function."""

    fn_id: str
    snapshot: Snapshot


class UnikernelContext:
    """An address space plus the lifecycle state machine driving it."""

    __slots__ = ("space", "state", "bound_fn", "core", "template",
                 "run_index", "last_idle_us", "seed", "_pending_pages")

    def __init__(self, space: AddressSpace, state: UCState,
                 template: RuntimeTemplate, seed: int,
                 bound_fn: str | None = None) -> None:
        self.space = space
        self.state = state
        self.bound_fn = bound_fn
        self.core: int | None = None
        self.template = template
        self.run_index = 0
        self.last_idle_us = 0
        self.seed = seed
        self._pending_pages = 0

    @property
    def uc_id(self) -> int:
        return self.space.space_id

    @property
    def registers(self) -> bytes:
        return self.space.registers

    def _require(self, *states: UCState) -> None:
        if self.state not in states:
            raise StateError(
                f"uc{self.uc_id}: illegal in state {self.state.value}")

    def start_run(self, profile: FunctionProfile) -> float:
        """Import run arguments and begin executing; returns the duration.

        First run of a context writes the full execution working set;
        re-entries write the (much smaller) hot working set on top.
        """
        self._require(UCState.AWAITING_INPUT, UCState.IDLE)
        if profile.fn_id != self.bound_fn:
            raise BindingError(
                f"uc{self.uc_id} bound to {self.bound_fn}, got {profile.fn_id}")
        if self.run_index == 0:
            count = self.template.effective_exec_pages(profile)
        else:
            count = profile.hot_exec_pages
        page_size = self.space.store.page_size
        fill = _fill_page(page_size, 0xE0 + (self.run_index & 0x0F))
        for page_no in _phase_pages(self.seed, profile.fn_id, "exec",
                                    self.run_index, count, _EXEC_BASE):
            self.space.write(page_no * page_size, fill)
        self.run_index += 1
        self._pending_pages = count
        self.state = UCState.RUNNING
        return profile.exec_time_ms

    def finish_run(self, profile: FunctionProfile) -> ExecutionRecord:
        self._require(UCState.RUNNING)
        self.state = UCState.IDLE
        pages = self._pending_pages
        self._pending_pages = 0
        return ExecutionRecord(pages, profile.exec_time_ms)

    def run(self, profile: FunctionProfile) -> ExecutionRecord:
        """start_run + finish_run in one step (no simulated clock)."""
        self.start_run(profile)
        return self.finish_run(profile)

    def destroy(self) -> None:
        if self.state is UCState.DESTROYED:
            raise StateError(f"uc{self.uc_id} already destroyed")
        self.space.destroy()
        self.state = UCState.DESTROYED


def build_runtime_template(store: PageStore, runtime_id: str,
                           config: AnticipatoryConfig | None = None,
                           seed: int = 0) -> RuntimeTemplate:
    """Boot a synthetic base image and capture its runtime snapshot."""
    cfg = config or AnticipatoryConfig()
    page_size = store.page_size
    fill = _fill_page(page_size, 0x42)
    image = store.create_base_image(
        {i * page_size: fill for i in range(cfg.base_image_pages)})
    space = image.boot()
    if cfg.warmup_enabled and cfg.warmup_pages:
        warm_fill = _fill_page(page_size, 0x57)
        for page_no in _phase_pages(seed, runtime_id, "warmup", 0,
                                    cfg.warmup_pages, _WARMUP_BASE):
            space.write(page_no * page_size, warm_fill)
    snapshot = space.capture()
    snapshot.acquire()  # template pins the snapshot for the node's lifetime
    space.destroy()
    return RuntimeTemplate(runtime_id, image, snapshot, cfg)


def cold_deploy(template: RuntimeTemplate, profile: FunctionProfile,
                seed: int = 0) -> tuple[UnikernelContext, FunctionSnapshot]:
    """Deploy from the runtime snapshot, import+compile, capture the
    function-specific snapshot, and leave the context awaiting input."""
    if profile.runtime_id != template.runtime_id:
        raise BindingError(
            f"profile runtime {profile.runtime_id!r} != template "
            f"{template.runtime_id!r}")
    space = template.runtime_snapshot.deploy()
    uc = UnikernelContext(space, UCState.AWAITING_SOURCE, template, seed)
    page_size = space.store.page_size
    fill = _fill_page(page_size, 0x5C)
    for page_no in _phase_pages(seed, profile.fn_id, "source", 0,
                                template.effective_source_pages(profile),
                                _SOURCE_BASE):
        space.write(page_no * page_size, fill)
    snapshot = space.capture()
    uc.state = UCState.AWAITING_INPUT
    uc.bound_fn = profile.fn_id
    return uc, FunctionSnapshot(profile.fn_id, snapshot)


def warm_deploy(fn_snapshot: FunctionSnapshot, profile: FunctionProfile,
                template: RuntimeTemplate, seed: int = 0) -> UnikernelContext:
    """Deploy a fresh context from a function snapshot; nothing is consumed."""
    if fn_snapshot.fn_id != profile.fn_id:
        raise BindingError(
            f"snapshot for {fn_snapshot.fn_id!r} cannot serve {profile.fn_id!r}")
    space = fn_snapshot.snapshot.deploy()
    uc = UnikernelContext(space, UCState.AWAITING_INPUT, template, seed,
                          bound_fn=profile.fn_id)
    return uc
