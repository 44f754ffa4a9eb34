from __future__ import annotations

import dataclasses

import pytest

from seuss_sim.config import ContainerModel, RunConfig
from seuss_sim.engine import run_simulation
from seuss_sim.runner import burst_trial
from seuss_sim.workload import generate


def linux_cfg(**container_kw):
    cfg = RunConfig(backend="linux")
    if container_kw:
        cfg = cfg.replace(container=dataclasses.replace(cfg.container,
                                                        **container_kw))
    return cfg.validate()


def run_throughput(cfg, n, m, c=4):
    spec = dataclasses.replace(cfg.workload, kind="throughput", n=n, m=m, c=c)
    cfg = cfg.replace(workload=spec)
    return run_simulation(cfg, generate(spec, cfg.pages))


def test_container_create_latency_law():
    cm = ContainerModel()
    assert cm.create_latency_ms(0, 1) == 541.0
    assert cm.create_latency_ms(3000, 1) == pytest.approx(1900.0)
    # sixteen-way concurrency adds the per-concurrent penalty for the
    # fifteen additional creations
    assert cm.create_latency_ms(3000, 16) == pytest.approx(1900.0 + 60 * 15)


def test_create_latency_monotone_in_occupancy():
    cm = ContainerModel()
    lat = [cm.create_latency_ms(r, 1) for r in range(0, 3001, 500)]
    assert lat == sorted(lat)


def test_delete_costs_a_fraction_of_create():
    cm = ContainerModel()
    assert cm.delete_latency_ms(1000, 1) == pytest.approx(
        cm.delete_factor * cm.create_latency_ms(1000, 1))


def test_first_invocation_with_prewarm_is_warm():
    cfg = linux_cfg(prewarm_pool_size=256)
    res = run_throughput(cfg, n=1, m=1, c=1)
    rec = res.records[0]
    assert rec.path == "warm"
    # unpause + import/compile (+ exec 0)
    assert rec.server_us == 40_000 + 300_000
    assert rec.latency_us == 60_000 + rec.server_us


def test_cold_without_prewarm_pays_creation():
    cfg = linux_cfg()
    res = run_throughput(cfg, n=1, m=1, c=1)
    rec = res.records[0]
    assert rec.path == "cold"
    assert rec.server_us >= 541_000 + 300_000  # creation (jittered) + compile


def test_hot_start_uses_idle_container():
    cfg = linux_cfg()
    res = run_throughput(cfg, n=3, m=1, c=1)
    assert [r.path for r in res.records] == ["cold", "hot", "hot"]
    assert res.records[1].server_us == 820


def test_cache_eviction_under_tiny_limit():
    # cache of 2: a third function evicts the least recently used
    cfg = linux_cfg(cache_limit=2, bridge_capacity=1024)
    res = run_throughput(cfg, n=8, m=4, c=1)
    paths = [r.path for r in res.records]
    assert paths.count("cold") >= 4  # every new fn over the limit re-creates
    assert all(r.status == "ok" for r in res.records)
    # eviction cost shows up in the cold records past the cache limit
    lru_colds = [r for r in res.records[2:] if r.path == "cold"]
    assert all(r.server_us > 541_000 + 300_000 for r in lru_colds)


def test_failures_are_records_not_exceptions():
    # bridge capacity below the cache limit: creations overflow endpoints
    cfg = linux_cfg(cache_limit=64, bridge_capacity=3, prewarm_pool_size=0)
    res = run_throughput(cfg, n=12, m=6, c=6)
    assert len(res.records) == 12
    fails = [r for r in res.records if r.status != "ok"]
    assert fails, "expected bridge failures"
    assert all(r.path == "fail" for r in fails)
    assert all(r.status == "bridge" for r in fails)


def test_failure_cooldown_toggle():
    cfg = linux_cfg(cache_limit=64, bridge_capacity=3, prewarm_pool_size=0,
                    failure_cooldown_ms=60_000.0)
    res = run_throughput(cfg, n=12, m=6, c=6)
    reasons = {r.status for r in res.records if r.status != "ok"}
    assert "cooldown" in reasons


def test_density_limit_caps_resident_bytes():
    cfg = linux_cfg()
    res = run_throughput(cfg, n=50, m=10)
    limit = cfg.container.density_limit * (cfg.node.memory_bytes
                                           // cfg.container.density_limit)
    assert all(s.bytes_resident <= limit for s in res.timeline)


def burst_cfg(backend, period, **container_kw):
    cfg = RunConfig(backend=backend).validate()
    container_kw.setdefault("prewarm_pool_size", 256)
    container = dataclasses.replace(cfg.container, **container_kw)
    wl = dataclasses.replace(cfg.workload, kind="burst", burst_period_s=period)
    return cfg.replace(container=container, workload=wl)


def burst_paths(trial):
    per_burst: dict[int, dict[str, int]] = {}
    for r in trial.result.records:
        if r.fn_id.startswith("burst"):
            k = int(r.fn_id[5:])
            d = per_burst.setdefault(k, {})
            key = r.path if r.status == "ok" else "fail"
            d[key] = d.get(key, 0) + 1
    return per_burst


def test_slow_bursts_see_warm_starts_until_cache_fills():
    trial = burst_trial(burst_cfg("linux", 32))
    per_burst = burst_paths(trial)
    assert per_burst[1] == {"warm": 128}
    assert per_burst[2] == {"warm": 128}  # pool repopulated between bursts
    fails = [r for r in trial.result.records if r.status != "ok"]
    assert fails, "cache saturation must eventually fail requests"


def test_fast_bursts_starve_the_prewarm_pool():
    for period in (16, 8):
        per_burst = burst_paths(burst_trial(burst_cfg("linux", period)))
        assert per_burst[1] == {"warm": 128}
        for k in range(2, 11):
            assert per_burst[k].get("warm", 0) == 0
            assert per_burst[k].get("cold", 0) > 0


def test_prewarm_refill_disabled_when_target_zero():
    cfg = burst_cfg("linux", 32, prewarm_pool_size=0)
    # rebuild workload config but with zero pool: all bursts go cold
    trial = burst_trial(cfg)
    per_burst = burst_paths(trial)
    assert per_burst[1].get("warm", 0) == 0
