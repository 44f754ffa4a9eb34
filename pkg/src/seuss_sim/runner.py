"""Experiment drivers shared by the CLI and the acceptance suite."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass

from .config import RunConfig
from .engine import TrialResult, run_simulation
from .metrics import SummaryStats, summarize
from .workload import Workload, generate


@dataclass
class Trial:
    label: str
    backend: str
    result: TrialResult
    stats: SummaryStats


def m_sweep_values(m_start: int, m_end: int) -> list[int]:
    """Doubling sweep, inclusive of both endpoints."""
    if m_start < 1 or m_end < m_start:
        raise ValueError("need 1 <= m_start <= m_end")
    values = []
    m = m_start
    while m <= m_end:
        values.append(m)
        m *= 2
    if values[-1] != m_end:
        values.append(m_end)
    return values


def throughput_trial(cfg: RunConfig, m: int) -> Trial:
    spec = dataclasses.replace(cfg.workload, kind="throughput", m=m)
    cfg = cfg.replace(workload=spec)
    workload = generate(spec, cfg.pages)
    result = run_simulation(cfg, workload)
    return Trial(label=f"m{m}", backend=cfg.backend, result=result,
                 stats=summarize(result))


def throughput_sweep(cfg: RunConfig, m_values: list[int]) -> list[Trial]:
    return [throughput_trial(cfg, m) for m in m_values]


def burst_trial(cfg: RunConfig, period_s: int | None = None) -> Trial:
    spec = cfg.workload
    if spec.kind != "burst":
        spec = dataclasses.replace(spec, kind="burst")
    if period_s is not None:
        spec = dataclasses.replace(spec, burst_period_s=period_s)
    cfg = cfg.replace(workload=spec)
    workload = generate(spec, cfg.pages)
    result = run_simulation(cfg, workload)
    return Trial(label=f"p{spec.burst_period_s}s", backend=cfg.backend,
                 result=result, stats=summarize(result))


def trace_trial(cfg: RunConfig, workload: Workload) -> Trial:
    result = run_simulation(cfg, workload)
    return Trial(label="trace", backend=cfg.backend, result=result,
                 stats=summarize(result))


def apply_seed_env(cfg: RunConfig) -> RunConfig:
    """SEUSS_SIM_SEED in the environment overrides the config seed."""
    raw = os.environ.get("SEUSS_SIM_SEED")
    if raw is None or raw == "":
        return cfg
    try:
        seed = int(raw)
    except ValueError as exc:
        raise ValueError(f"SEUSS_SIM_SEED must be an integer, got {raw!r}") from exc
    spec = dataclasses.replace(cfg.workload, seed=seed)
    return cfg.replace(seed=seed, workload=spec)
