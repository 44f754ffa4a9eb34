"""Aggregation and file output.

Percentiles are nearest-rank (value at index ceil(p*n/100) of the sorted
sample, 1-indexed); failed requests are excluded from latency statistics and
counted separately.  Throughput is completed requests over the span from
first submission to last completion.  Milliseconds in CSV output are
rendered from integer microseconds with exact integer arithmetic, so output
files are byte-identical across runs with the same config and seed.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, fields
from typing import Iterable, Sequence

from .engine import RequestRecord, TimelineSample, TrialResult

PCTS = (1, 25, 50, 75, 99)


def nearest_rank(sorted_values: Sequence[int], pct: float) -> int:
    """Nearest-rank percentile of a pre-sorted sample."""
    if not sorted_values:
        return 0
    idx = math.ceil(pct * len(sorted_values) / 100)
    return sorted_values[max(1, idx) - 1]


def fmt_ms(value_us: int) -> str:
    """Integer microseconds as a millisecond string with 3 exact decimals."""
    sign = "-" if value_us < 0 else ""
    value_us = abs(value_us)
    return f"{sign}{value_us // 1000}.{value_us % 1000:03d}"


@dataclass(frozen=True)
class SummaryStats:
    n: int
    completed: int
    throughput_rps: float
    mean_us: int
    p1_us: int
    p25_us: int
    p50_us: int
    p75_us: int
    p99_us: int
    hot: int
    warm: int
    cold: int
    fail: int
    peak_bytes_resident: int
    cache_entries: int


def aggregate(records: Iterable[RequestRecord], *,
              peak_bytes_resident: int = 0,
              cache_entries: int = 0) -> SummaryStats:
    recs = list(records)
    ok = [r for r in recs if r.status == "ok"]
    lat = sorted(r.latency_us for r in ok)
    paths = {"hot": 0, "warm": 0, "cold": 0, "fail": 0}
    for r in recs:
        paths[r.path] += 1
    if ok:
        span_us = max(r.complete_us for r in ok) - min(r.submit_us for r in recs)
        throughput = len(ok) / (span_us / 1_000_000) if span_us > 0 else 0.0
        mean = sum(lat) // len(lat)
    else:
        throughput = 0.0
        mean = 0
    pct = {p: nearest_rank(lat, p) for p in PCTS}
    return SummaryStats(
        n=len(recs), completed=len(ok), throughput_rps=throughput,
        mean_us=mean, p1_us=pct[1], p25_us=pct[25], p50_us=pct[50],
        p75_us=pct[75], p99_us=pct[99], hot=paths["hot"], warm=paths["warm"],
        cold=paths["cold"], fail=paths["fail"],
        peak_bytes_resident=peak_bytes_resident, cache_entries=cache_entries)


def summarize(result: TrialResult) -> SummaryStats:
    return aggregate(result.records,
                     peak_bytes_resident=result.peak_bytes_resident,
                     cache_entries=result.warm_entries)


REQUEST_COLUMNS = ("request_id", "fn_id", "submit_ms", "complete_ms",
                   "latency_ms", "path", "status")


def write_requests_csv(path: str, records: Iterable[RequestRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(REQUEST_COLUMNS)
        for r in records:
            w.writerow((r.rid, r.fn_id, fmt_ms(r.submit_us),
                        fmt_ms(r.complete_us), fmt_ms(r.latency_us),
                        r.path, r.status))


TIMELINE_COLUMNS = ("t_ms", "bytes_resident", "warm_entries", "idle_contexts")


def write_timeline_csv(path: str, samples: Iterable[TimelineSample]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TIMELINE_COLUMNS)
        for s in samples:
            w.writerow((fmt_ms(s.t_us), s.bytes_resident, s.warm_entries,
                        s.idle_contexts))


SUMMARY_COLUMNS = ("label", "backend", "n", "completed", "throughput_rps",
                   "mean_ms", "p1_ms", "p25_ms", "p50_ms", "p75_ms", "p99_ms",
                   "hot", "warm", "cold", "fail", "peak_bytes_resident",
                   "cache_entries")


def summary_row(label: str, backend: str, stats: SummaryStats) -> list:
    return [label, backend, stats.n, stats.completed,
            f"{stats.throughput_rps:.3f}", fmt_ms(stats.mean_us),
            fmt_ms(stats.p1_us), fmt_ms(stats.p25_us), fmt_ms(stats.p50_us),
            fmt_ms(stats.p75_us), fmt_ms(stats.p99_us), stats.hot, stats.warm,
            stats.cold, stats.fail, stats.peak_bytes_resident,
            stats.cache_entries]


def write_summary_csv(path: str, rows: Iterable[list]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_COLUMNS)
        for row in rows:
            w.writerow(row)
