"""Run configuration: calibrated cost constants, node sizing, validation.

Everything the simulator consumes is declared here with its default, and a
whole run is a pure function of (config, workload, seed).  Times are floats
in milliseconds at the config surface and integer microseconds inside the
engine, so event ordering never depends on float rounding.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field, fields

GIB = 2**30
MIB = 2**20

SEED_ENV_VAR = "SEUSS_SIM_SEED"


class ConfigError(ValueError):
    """Configuration failed schema validation."""


def us(ms: float) -> int:
    """Milliseconds (float) to integer microseconds."""
    return int(round(ms * 1000))


@dataclass
class CostModel:
    """Per-path latency constants, simulated milliseconds.

    The hot/warm/cold overheads are end-to-end server-side path costs for a
    no-op function; deploy and capture costs are components *inside* the warm
    and cold paths, so composition reproduces the configured totals exactly.
    The control plane adds a fixed round trip plus a throughput cap; the
    snapshot backend also pays a message-relay hop (``shim``) whose
    per-message occupancy caps its admission rate below the control plane's.
    """

    hot_overhead_ms: float = 0.82
    warm_overhead_ms: float = 2.95
    cold_overhead_ms: float = 7.67
    control_plane_latency_ms: float = 60.0
    control_plane_peak_rps: int = 220
    shim_extra_rtt_ms: float = 8.0
    shim_service_ms: float = 6.0
    uc_deploy_cost_ms: float = 0.4
    snapshot_capture_cost_ms: float = 0.4

    def validate(self) -> None:
        vals = dataclasses.asdict(self)
        for name, v in vals.items():
            if v < 0:
                raise ConfigError(f"cost_model.{name} must be >= 0, got {v}")
        if not (self.cold_overhead_ms >= self.warm_overhead_ms
                >= self.hot_overhead_ms):
            raise ConfigError("need cold_overhead >= warm_overhead >= hot_overhead")
        if self.warm_overhead_ms < self.uc_deploy_cost_ms:
            raise ConfigError("warm_overhead must cover the deploy cost")
        if self.cold_overhead_ms < (self.uc_deploy_cost_ms
                                    + self.snapshot_capture_cost_ms):
            raise ConfigError("cold_overhead must cover deploy + capture costs")
        if self.control_plane_peak_rps <= 0:
            raise ConfigError("control_plane_peak_rps must be > 0")

    # integer-microsecond views used by the engine
    @property
    def hot_us(self) -> int:
        return us(self.hot_overhead_ms)

    @property
    def warm_base_us(self) -> int:
        return us(self.warm_overhead_ms) - us(self.uc_deploy_cost_ms)

    @property
    def cold_base_us(self) -> int:
        return (us(self.cold_overhead_ms) - us(self.uc_deploy_cost_ms)
                - us(self.snapshot_capture_cost_ms))

    @property
    def deploy_us(self) -> int:
        return us(self.uc_deploy_cost_ms)

    @property
    def capture_us(self) -> int:
        return us(self.snapshot_capture_cost_ms)

    @property
    def control_plane_us(self) -> int:
        return us(self.control_plane_latency_ms)

    @property
    def shim_rtt_us(self) -> int:
        return us(self.shim_extra_rtt_ms)

    @property
    def shim_service_us(self) -> int:
        return us(self.shim_service_ms)


@dataclass
class NodeConfig:
    """One compute node: cores, memory, cache sizing."""

    worker_cores: int = 16
    memory_gib: float = 88.0
    hot_tub_per_core: int = 64
    oom_threshold_frac: float = 0.05
    page_size: int = 4096

    def validate(self) -> None:
        if self.worker_cores < 1:
            raise ConfigError("node.worker_cores must be >= 1")
        if self.memory_gib <= 0:
            raise ConfigError("node.memory_gib must be > 0")
        if not 0 < self.oom_threshold_frac < 1:
            raise ConfigError("node.oom_threshold_frac must be in (0, 1)")
        if self.page_size <= 0:
            raise ConfigError("node.page_size must be > 0")
        if self.hot_tub_per_core < 0:
            raise ConfigError("node.hot_tub_per_core must be >= 0")

    @property
    def memory_bytes(self) -> int:
        return int(self.memory_gib * GIB)

    @property
    def oom_threshold_bytes(self) -> int:
        return max(1, int(self.memory_bytes * self.oom_threshold_frac))


@dataclass
class AnticipatorySettings:
    """Runtime-template sizing and warm-up toggle (page counts)."""

    base_image_pages: int = 29312  # 114.5 MiB of 4 KiB pages
    warmup_pages: int = 408
    warmup_enabled: bool = True
    noopt_page_factor: int = 4

    def validate(self) -> None:
        if self.base_image_pages < 0 or self.warmup_pages < 0:
            raise ConfigError("anticipatory page counts must be >= 0")
        if self.noopt_page_factor < 1:
            raise ConfigError("anticipatory.noopt_page_factor must be >= 1")


@dataclass
class PageCalibration:
    """Per-invocation page-allocation counts for a no-op function."""

    source_pages: int = 136   # cold minus warm: import + compile
    exec_pages: int = 391     # first execution in a fresh context
    hot_exec_pages: int = 13  # re-execution in a used context

    def validate(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"pages.{f.name} must be >= 0")


@dataclass
class ContainerModel:
    """Analytic Linux/Docker backend: lifecycle costs and capacity limits.

    Creation latency scales linearly with resident containers and with
    additional concurrent creations; deletion costs a configurable fraction
    of creation at the same occupancy.  Instance footprints are back-derived
    from the node's density limits.  Stem-cell (prewarm) repopulation is a
    maintenance task: it launches only after the container-op path has been
    quiet for a spell, runs as one batch delivered atomically, and is
    abandoned if request-driven container work preempts it.
    """

    create_base_ms: float = 541.0
    create_per_instance_ms: float = (1900.0 - 541.0) / 3000.0
    create_per_concurrent_ms: float = 60.0
    unpause_ms: float = 40.0  # deterministic midpoint of the 30-50 range
    delete_factor: float = 0.75
    jitter_sigma: float = 0.204  # lognormal; p99 at 16-way concurrency ~4.6 s
    density_limit: int = 3000
    cache_limit: int = 1024
    bridge_capacity: int = 1024
    microvm_create_ms: float = 3000.0
    microvm_density: int = 450
    process_density: int = 4200
    prewarm_pool_size: int = 0  # 256 in burst runs
    refill_concurrency: int = 8
    refill_quiet_ms: float = 4000.0
    failure_cooldown_ms: float = 0.0  # optional post-failure blackout

    def validate(self) -> None:
        numeric = ("create_base_ms", "create_per_instance_ms",
                   "create_per_concurrent_ms", "unpause_ms", "delete_factor",
                   "jitter_sigma", "microvm_create_ms", "refill_quiet_ms",
                   "failure_cooldown_ms")
        for name in numeric:
            if getattr(self, name) < 0:
                raise ConfigError(f"container.{name} must be >= 0")
        for name in ("density_limit", "cache_limit", "bridge_capacity",
                     "microvm_density", "process_density", "prewarm_pool_size",
                     "refill_concurrency"):
            if getattr(self, name) < 0:
                raise ConfigError(f"container.{name} must be >= 0")
        if self.cache_limit > self.density_limit:
            raise ConfigError("container.cache_limit must be <= density_limit")

    def create_latency_ms(self, resident: int, concurrent: int) -> float:
        """Deterministic creation latency; ``concurrent`` counts this one."""
        extra = max(0, concurrent - 1)
        return (self.create_base_ms + self.create_per_instance_ms * resident
                + self.create_per_concurrent_ms * extra)

    def delete_latency_ms(self, resident: int, concurrent: int) -> float:
        return self.delete_factor * self.create_latency_ms(resident, concurrent)


@dataclass
class WorkloadSpec:
    """Benchmark parameters for the two macro experiments (or a custom trace)."""

    kind: str = "throughput"  # throughput | burst
    n: int = 20000
    m: int = 64
    c: int = 32
    seed: int = 1
    background_threads: int = 128
    background_fns: int = 16
    background_rate_rps: int = 72
    io_wait_ms: float = 250.0
    burst_size: int = 128
    burst_period_s: int = 32
    burst_count: int = 10
    burst_cpu_ms: float = 150.0
    import_compile_ms: float = 300.0

    def validate(self) -> None:
        if self.kind not in ("throughput", "burst"):
            raise ConfigError(f"workload.kind must be throughput|burst, "
                              f"got {self.kind!r}")
        if self.kind == "throughput":
            # m may exceed n: the all-unique regime invokes each function at
            # most once
            if self.n < 1 or self.m < 1:
                raise ConfigError("throughput workload needs n >= 1 and m >= 1")
            if self.c < 1:
                raise ConfigError("workload.c must be >= 1")
        else:
            for name in ("background_threads", "background_fns",
                         "background_rate_rps", "burst_size", "burst_period_s",
                         "burst_count"):
                if getattr(self, name) <= 0:
                    raise ConfigError(f"workload.{name} must be > 0")
            if self.io_wait_ms <= 0 or self.burst_cpu_ms < 0:
                raise ConfigError("workload burst durations invalid")


@dataclass
class RunConfig:
    """Everything one simulation run consumes."""

    backend: str = "seuss"  # seuss | linux
    seed: int = 1
    sample_interval_ms: float = 1000.0
    node: NodeConfig = field(default_factory=NodeConfig)
    cost_model: CostModel = field(default_factory=CostModel)
    anticipatory: AnticipatorySettings = field(default_factory=AnticipatorySettings)
    pages: PageCalibration = field(default_factory=PageCalibration)
    container: ContainerModel = field(default_factory=ContainerModel)
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)

    def validate(self) -> "RunConfig":
        if self.backend not in ("seuss", "linux"):
            raise ConfigError(f"backend must be seuss|linux, got {self.backend!r}")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")
        if self.sample_interval_ms <= 0:
            raise ConfigError("sample_interval_ms must be > 0")
        for section in (self.node, self.cost_model, self.anticipatory,
                        self.pages, self.container, self.workload):
            section.validate()
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def replace(self, **kw) -> "RunConfig":
        return dataclasses.replace(self, **kw)


_SECTIONS = {
    "node": NodeConfig,
    "cost_model": CostModel,
    "anticipatory": AnticipatorySettings,
    "pages": PageCalibration,
    "container": ContainerModel,
    "workload": WorkloadSpec,
}


def _build_section(cls, data, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = sorted(set(data) - set(known))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    kwargs = {}
    defaults = cls()
    for name, value in data.items():
        current = getattr(defaults, name)
        if isinstance(current, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"{path}.{name}: expected bool")
        elif isinstance(current, int):
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError(f"{path}.{name}: expected int")
        elif isinstance(current, float):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError(f"{path}.{name}: expected number")
            value = float(value)
        elif isinstance(current, str):
            if not isinstance(value, str):
                raise ConfigError(f"{path}.{name}: expected string")
        kwargs[name] = value
    return cls(**kwargs)


def config_from_dict(data: dict) -> RunConfig:
    """Strict deserialization: unknown keys and wrong types are errors."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a JSON object")
    top_fields = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - top_fields)
    if unknown:
        raise ConfigError(f"config: unknown keys {unknown}")
    kwargs: dict = {}
    for name, value in data.items():
        if name in _SECTIONS:
            kwargs[name] = _build_section(_SECTIONS[name], value, name)
        elif name == "backend":
            if not isinstance(value, str):
                raise ConfigError("backend: expected string")
            kwargs[name] = value
        elif name == "seed":
            if not isinstance(value, int) or isinstance(value, bool):
                raise ConfigError("seed: expected int")
            kwargs[name] = value
        elif name == "sample_interval_ms":
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ConfigError("sample_interval_ms: expected number")
            kwargs[name] = float(value)
    return RunConfig(**kwargs).validate()


def load_config(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return config_from_dict(data)
