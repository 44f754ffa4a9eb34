"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them on
success).  Simulations are deterministic, so these checks are exact
reruns, not statistical ones.
"""

from __future__ import annotations

import dataclasses
import math
import time
from collections import Counter

import pytest

from seuss_sim import pagestore
from seuss_sim.cli import main as cli_main
from seuss_sim.config import GIB, ContainerModel, RunConfig
from seuss_sim.density import density_report
from seuss_sim.lifecycle import (
    AnticipatoryConfig,
    FunctionProfile,
    build_runtime_template,
    cold_deploy,
)
from seuss_sim.metrics import nearest_rank, write_requests_csv, write_timeline_csv
from seuss_sim.runner import burst_trial, throughput_trial
from seuss_sim.workload import generate

from oracle import ProgramRunner


def report(criterion: str, ok: bool, detail: str) -> None:
    print(f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {criterion} failed: {detail}"


# -- criteria 1 + 2: oracle equivalence, conservation, minimality -------------

N_PROGRAMS = 10_000
OPS_PER_PROGRAM = 14
MASTER_SEED_BASE = 0  # program i uses seed MASTER_SEED_BASE + i


@pytest.fixture(scope="module")
def oracle_campaign():
    t0 = time.time()
    reads = conservation = captures = 0
    for i in range(N_PROGRAMS):
        runner = ProgramRunner(pagestore, MASTER_SEED_BASE + i,
                               page_size=16, max_pages=64, max_objects=16,
                               verify_each_step=True)
        runner.run(OPS_PER_PROGRAM)
        reads += runner.reads_checked
        conservation += runner.conservation_checks
        captures += runner.captures_checked
    return {"elapsed": time.time() - t0, "reads": reads,
            "conservation": conservation, "captures": captures}


def test_criterion_1_oracle_equivalence(oracle_campaign):
    c = oracle_campaign
    ok = c["elapsed"] < 60.0 and c["reads"] > 0
    report("1 oracle-equivalence",
           ok,
           f"{N_PROGRAMS} programs (seeds {MASTER_SEED_BASE}.."
           f"{MASTER_SEED_BASE + N_PROGRAMS - 1}), {c['reads']} reads "
           f"matched exactly, {c['elapsed']:.1f}s < 60s, "
           f"backend={pagestore.BACKEND}")


def test_criterion_2_conservation_and_minimality(oracle_campaign):
    c = oracle_campaign
    ok = c["conservation"] >= N_PROGRAMS * OPS_PER_PROGRAM and c["captures"] > 0
    report("2 refcount-conservation+diff-minimality",
           ok,
           f"{c['conservation']} per-step conservation checks, "
           f"{c['captures']} capture-size checks, zero violations")


# -- criterion 3: snapshot-stack sharing arithmetic ---------------------------

def test_criterion_3_snapshot_stack_sharing():
    store = pagestore.PageStore()
    cfg = AnticipatoryConfig()  # default runtime sizing
    tpl = build_runtime_template(store, "nodejs", cfg)
    runtime_pages = store.stats().unique_frames
    foo = FunctionProfile(fn_id="foo")
    bar = FunctionProfile(fn_id="bar")
    uc_foo, snap_foo = cold_deploy(tpl, foo)
    uc_bar, snap_bar = cold_deploy(tpl, bar)
    snapshots = 1 + 2  # runtime snapshot plus one per function
    expected = runtime_pages + snap_foo.snapshot.size_pages \
        + snap_bar.snapshot.size_pages
    got = store.stats().unique_frames
    ok = (got == expected
          and snap_foo.snapshot.parent is tpl.runtime_snapshot
          and snap_bar.snapshot.parent is tpl.runtime_snapshot
          and snap_foo.snapshot.size_pages == 136
          and snap_bar.snapshot.size_pages == 136)
    report("3 snapshot-stack-sharing",
           ok,
           f"{snapshots} snapshots; unique_frames {got} == runtime "
           f"{runtime_pages} + foo 136 + bar 136, no duplication")


# -- criterion 4: density reproduction ----------------------------------------

def test_criterion_4_density():
    t0 = time.time()
    rep = density_report(88 * GIB, ContainerModel(), base_mib=114.5,
                         pages_per_instance=391)
    elapsed = time.time() - t0
    ratio = rep.seuss / rep.container
    ok = (abs(rep.seuss - 52_000) <= 0.25 * 52_000
          and abs(rep.container - 3000) <= 0.10 * 3000
          and abs(rep.microvm - 450) <= 0.10 * 450
          and ratio >= 15.0
          and elapsed < 30.0)
    report("4 density",
           ok,
           f"seuss {rep.seuss} (52000 +/-25%), container {rep.container} "
           f"(3000 +/-10%), microvm {rep.microvm} (450 +/-10%), "
           f"ratio {ratio:.1f}x >= 15x, {elapsed:.2f}s < 30s")


def test_criterion_4_density_formula_matches_page_store():
    # the analytic count equals what physically deploying instances through
    # the page store yields, at desk scale
    from seuss_sim.density import snapshot_instances

    store = pagestore.PageStore(page_size=64)
    tpl = build_runtime_template(
        store, "nodejs",
        AnticipatoryConfig(base_image_pages=50, warmup_pages=0))
    prof = FunctionProfile(fn_id="d", source_pages=0, exec_pages=7)
    uc, fn_snap = cold_deploy(tpl, prof)
    uc.destroy()
    budget = 12_000  # bytes
    deployed = 0
    while True:
        clone = fn_snap.snapshot.deploy()
        uc = None
        for page in range(7):
            clone.write((0x90_0000 + deployed * 7 + page) * 64, b"\x01" * 64)
        if store.stats().bytes_resident > budget:
            clone.destroy()
            break
        deployed += 1
    analytic = snapshot_instances(budget, base_stack_pages=50,
                                  pages_per_instance=7, page_size=64)
    assert deployed == analytic


# -- criterion 5: path latency composition ------------------------------------

def test_criterion_5_path_latencies():
    cfg = RunConfig(backend="seuss").validate()
    spec = dataclasses.replace(cfg.workload, kind="throughput", n=3, m=1, c=1)

    # cold, then hot (same core re-entry)
    r1 = _run(cfg, spec)
    cold, hot = r1.records[0], r1.records[1]

    # warm isolated via zero-capacity hot tubs
    cfg2 = cfg.replace(node=dataclasses.replace(cfg.node, hot_tub_per_core=0))
    r2 = _run(cfg2, spec)
    warm = r2.records[1]

    ok = (cold.path == "cold" and cold.server_us == 7670
          and warm.path == "warm" and warm.server_us == 2950
          and hot.path == "hot" and hot.server_us == 820)
    report("5 path-latencies",
           ok,
           f"server-side hot {hot.server_us}us == 820, warm {warm.server_us}us "
           f"== 2950, cold {cold.server_us}us == 7670 (cold includes deploy "
           f"400 + capture 400), exact to the tick")


def _run(cfg, spec):
    from seuss_sim.engine import run_simulation

    cfg = cfg.replace(workload=spec)
    return run_simulation(cfg, generate(spec, cfg.pages))


# -- criterion 6: throughput crossover ----------------------------------------

def test_criterion_6_throughput_crossover():
    t0 = time.time()
    thr = {}
    for backend, m_values in (("linux", (64, 512, 2048, 65536)),
                              ("seuss", (64, 65536))):
        cfg = RunConfig(backend=backend).validate()
        for m in m_values:
            thr[(backend, m)] = throughput_trial(cfg, m).stats.throughput_rps
    elapsed = time.time() - t0

    gap = thr[("linux", 64)] / thr[("seuss", 64)] - 1
    collapse = thr[("linux", 512)] / thr[("linux", 2048)]
    ratio = thr[("seuss", 65536)] / thr[("linux", 65536)]
    # crossover existence: past the collapse point the container backend
    # runs below half its best-case throughput
    crossover = thr[("linux", 2048)] < 0.5 * thr[("linux", 64)]
    ok = (0.10 <= gap <= 0.35 and collapse >= 2.0 and ratio >= 25.0
          and crossover and elapsed < 300.0)
    report("6 throughput-crossover",
           ok,
           f"(a) linux/seuss at m=64: +{gap * 100:.1f}% in [10%,35%]; "
           f"(b) linux 512->2048 collapse {collapse:.1f}x >= 2x; "
           f"(c) seuss/linux at m=65536: {ratio:.1f}x >= 25x "
           f"(achieved ratio reported); {elapsed:.0f}s < 300s")


# -- criterion 7: burst resiliency --------------------------------------------

def _burst(backend: str, period: int):
    cfg = RunConfig(backend=backend).validate()
    container = dataclasses.replace(cfg.container, prewarm_pool_size=256)
    wl = dataclasses.replace(cfg.workload, kind="burst", burst_period_s=period,
                             burst_count=10)
    return burst_trial(cfg.replace(container=container, workload=wl))


def _burst_paths(trial):
    per_burst: dict[int, Counter] = {}
    for r in trial.result.records:
        if r.fn_id.startswith("burst"):
            k = int(r.fn_id[5:])
            key = r.path if r.status == "ok" else "fail"
            per_burst.setdefault(k, Counter())[key] += 1
    return per_burst


def _bg_p99(trial):
    lat = sorted(r.latency_us for r in trial.result.records
                 if r.fn_id.startswith("io") and r.status == "ok")
    return nearest_rank(lat, 99)


def test_criterion_7_burst_resiliency():
    t0 = time.time()
    seuss = {p: _burst("seuss", p) for p in (32, 16, 8)}
    linux = {p: _burst("linux", p) for p in (32, 16, 8)}
    elapsed = time.time() - t0

    seuss_fails = {p: t.stats.fail for p, t in seuss.items()}
    p99_32, p99_8 = _bg_p99(seuss[32]), _bg_p99(seuss[8])

    lx32_fails = sorted(r.submit_us for r in linux[32].result.records
                        if r.status != "ok")
    first_fail_s = lx32_fails[0] / 1_000_000 if lx32_fails else None
    in_window = first_fail_s is not None and 4 * 32 <= first_fail_s <= 8 * 32

    starved_ok = True
    for p in (16, 8):
        per_burst = _burst_paths(linux[p])
        if per_burst[1].get("warm", 0) == 0:
            starved_ok = False
        for k in range(2, 11):
            if per_burst[k].get("warm", 0) != 0:
                starved_ok = False

    ok = (all(v == 0 for v in seuss_fails.values())
          and in_window
          and starved_ok
          and p99_8 > p99_32
          and elapsed < 120.0)
    report("7 burst-resiliency",
           ok,
           f"seuss fails {seuss_fails} == 0 at all periods; linux first "
           f"failure at {first_fail_s:.0f}s within [128s,256s] (~burst "
           f"{first_fail_s / 32:.1f}); 16s/8s: only burst 1 warm-served; "
           f"seuss background p99 8s {p99_8 / 1000:.0f}ms > 32s "
           f"{p99_32 / 1000:.0f}ms; {elapsed:.0f}s < 120s")


# -- criterion 8: determinism ---------------------------------------------------

def test_criterion_8_determinism(tmp_path):
    t0 = time.time()

    def produce(tag: str) -> dict[str, bytes]:
        outputs = {}
        cfg = RunConfig(backend="seuss").validate()
        trial = throughput_trial(cfg, 512)
        d = tmp_path / tag
        d.mkdir(exist_ok=True)
        write_requests_csv(str(d / "requests.csv"), trial.result.records)
        write_timeline_csv(str(d / "memory.csv"), trial.result.timeline)
        b = _burst("linux", 16)
        write_requests_csv(str(d / "burst_requests.csv"), b.result.records)
        for name in ("requests.csv", "memory.csv", "burst_requests.csv"):
            outputs[name] = (d / name).read_bytes()
        return outputs

    first = produce("one")
    second = produce("two")
    identical = first == second
    elapsed = time.time() - t0
    ok = identical and all(len(v) > 0 for v in first.values())
    report("8 determinism",
           ok,
           f"repeated seuss m=512 sweep trial and linux 16s burst trial: "
           f"all CSVs byte-identical ({sum(map(len, first.values()))} bytes "
           f"compared), {elapsed:.0f}s")


def test_cli_density_end_to_end(tmp_path, capsys):
    # the density criterion exercised through the command-line surface
    code = cli_main(["density", "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "seuss: 58924" in out
