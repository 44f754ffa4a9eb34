"""Command-line entry point.

Subcommands: ``throughput`` (function-diversity sweep), ``burst``
(background stream plus parallel bursts), ``density`` (instances per memory
budget for each deployment model), ``trace`` (run an imported request
trace).  Configuration comes from an optional JSON file (printable via
``--print-default-config``) with CLI flags layered on top; the
``SEUSS_SIM_SEED`` environment variable overrides the config seed.

Outputs per run directory: ``summary.csv`` (one row per trial),
``requests_<label>.csv`` (per-request rows), ``memory_<label>.csv``
(resident-bytes timeline).  Identical config and seed produce byte-identical
files.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .config import ConfigError, RunConfig, load_config
from .density import density_report
from .metrics import (
    summary_row,
    write_requests_csv,
    write_summary_csv,
    write_timeline_csv,
)
from .runner import (
    Trial,
    apply_seed_env,
    burst_trial,
    m_sweep_values,
    throughput_sweep,
    trace_trial,
)
from .workload import export_trace, generate, import_trace

EXIT_OK = 0
EXIT_CONFIG = 2


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--backend", choices=("seuss", "linux"))
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--sample-interval-ms", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seuss-sim",
        description="Deterministic FaaS compute-node simulator "
                    "(snapshot-stack backend vs Linux-container baseline)")
    parser.add_argument("--print-default-config", action="store_true",
                        help="print the default JSON config and exit")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("throughput", help="function-diversity throughput sweep")
    _add_common(p)
    p.add_argument("--n", type=int, help="invocations per trial")
    p.add_argument("--m-start", type=int, default=64)
    p.add_argument("--m-end", type=int, default=65536)
    p.add_argument("--concurrency", type=int)
    p.add_argument("--export-trace", metavar="FILE",
                   help="write the generated trace and exit (single trial)")

    p = sub.add_parser("burst", help="background stream plus parallel bursts")
    _add_common(p)
    p.add_argument("--period", type=int, help="seconds between bursts")
    p.add_argument("--bursts", type=int, help="number of bursts")
    p.add_argument("--burst-size", type=int)
    p.add_argument("--export-trace", metavar="FILE",
                   help="write the generated trace and exit")

    p = sub.add_parser("density", help="instances per memory budget")
    _add_common(p)
    p.add_argument("--memory-gib", type=float)
    p.add_argument("--base-mib", type=float, default=114.5,
                   help="runtime snapshot stack size")
    p.add_argument("--pages-per-instance", type=int,
                   help="private pages per initialized instance")

    p = sub.add_parser("trace", help="run an imported request trace")
    _add_common(p)
    p.add_argument("--input", required=True, help="trace file (NDJSON)")

    return parser


def _load_cfg(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    cfg.validate()
    cfg = apply_seed_env(cfg)
    if args.backend:
        cfg = cfg.replace(backend=args.backend)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed,
                          workload=dataclasses.replace(cfg.workload,
                                                       seed=args.seed))
    if args.sample_interval_ms is not None:
        cfg = cfg.replace(sample_interval_ms=args.sample_interval_ms)
    return cfg.validate()


def _write_trials(out_dir: str, trials: list[Trial]) -> None:
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    for t in trials:
        label = f"{t.backend}_{t.label}"
        write_requests_csv(os.path.join(out_dir, f"requests_{label}.csv"),
                           t.result.records)
        write_timeline_csv(os.path.join(out_dir, f"memory_{label}.csv"),
                           t.result.timeline)
        rows.append(summary_row(t.label, t.backend, t.stats))
    write_summary_csv(os.path.join(out_dir, "summary.csv"), rows)


def cmd_throughput(args) -> int:
    cfg = _load_cfg(args)
    wl = cfg.workload
    wl = dataclasses.replace(wl, kind="throughput",
                             n=args.n if args.n is not None else wl.n,
                             c=args.concurrency if args.concurrency is not None
                             else wl.c)
    cfg = cfg.replace(workload=wl)
    if args.export_trace:
        spec = dataclasses.replace(cfg.workload, m=args.m_start)
        with open(args.export_trace, "w", encoding="utf-8") as fh:
            fh.write(export_trace(generate(spec, cfg.pages)))
        return EXIT_OK
    trials = throughput_sweep(cfg, m_sweep_values(args.m_start, args.m_end))
    _write_trials(args.out, trials)
    for t in trials:
        print(f"{t.backend} {t.label}: {t.stats.throughput_rps:.1f} rps "
              f"(hot {t.stats.hot}, warm {t.stats.warm}, cold {t.stats.cold}, "
              f"fail {t.stats.fail})")
    return EXIT_OK


def cmd_burst(args) -> int:
    cfg = _load_cfg(args)
    wl = dataclasses.replace(
        cfg.workload, kind="burst",
        burst_period_s=args.period if args.period is not None
        else cfg.workload.burst_period_s,
        burst_count=args.bursts if args.bursts is not None
        else cfg.workload.burst_count,
        burst_size=args.burst_size if args.burst_size is not None
        else cfg.workload.burst_size)
    container = cfg.container
    if container.prewarm_pool_size == 0:
        # the burst experiment runs the container backend with a stem-cell
        # pool; throughput runs leave it disabled
        container = dataclasses.replace(container, prewarm_pool_size=256)
    cfg = cfg.replace(workload=wl, container=container)
    if args.export_trace:
        with open(args.export_trace, "w", encoding="utf-8") as fh:
            fh.write(export_trace(generate(cfg.workload, cfg.pages)))
        return EXIT_OK
    trial = burst_trial(cfg)
    _write_trials(args.out, [trial])
    s = trial.stats
    print(f"{trial.backend} {trial.label}: {s.completed}/{s.n} ok, "
          f"{s.fail} failed, p99 {s.p99_us / 1000:.1f} ms")
    return EXIT_OK


def cmd_density(args) -> int:
    cfg = _load_cfg(args)
    memory = int((args.memory_gib if args.memory_gib is not None
                  else cfg.node.memory_gib) * (2**30))
    pages = (args.pages_per_instance if args.pages_per_instance is not None
             else cfg.pages.exec_pages)
    report = density_report(memory, cfg.container, base_mib=args.base_mib,
                            pages_per_instance=pages,
                            page_size=cfg.node.page_size)
    os.makedirs(args.out, exist_ok=True)
    lines = ["deployment,instances"]
    for mode, count in report.rows():
        print(f"{mode}: {count}")
        lines.append(f"{mode},{count}")
    with open(os.path.join(args.out, "density.csv"), "w",
              encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_trace(args) -> int:
    cfg = _load_cfg(args)
    try:
        with open(args.input, "r", encoding="utf-8") as fh:
            workload = import_trace(fh.read())
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot load trace {args.input}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    trial = trace_trial(cfg, workload)
    _write_trials(args.out, [trial])
    print(f"{trial.backend} trace: {trial.stats.completed}/{trial.stats.n} ok")
    return EXIT_OK


COMMANDS = {
    "throughput": cmd_throughput,
    "burst": cmd_burst,
    "density": cmd_density,
    "trace": cmd_trace,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_default_config:
        sys.stdout.write(RunConfig().to_json())
        return EXIT_OK
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
