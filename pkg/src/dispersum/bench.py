"""Benchmark harness: run a suite across solver modes and tabulate.

Per-solve rows and a (n, p, mode, limit)-keyed aggregate go to CSV; the
report path also renders the two standard summary figures (average time,
average cuts) next to the delimited output.  Solves are single-threaded
and deterministic; --jobs only fans independent rows out over processes.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import math
import time
from typing import Optional, Sequence

from .baselines import brute_force, solve_f3
from .engine import SolveParams, solve_multi_tree, solve_single_tree
from .instances import SuiteEntry, load_entry
from .model import Status

MODES = ("single", "multi", "f3", "brute")
GAP_EPS = 1e-9


@dataclasses.dataclass
class BenchRow:
    instance: str
    n: int
    p: int
    s: Optional[int]
    mode: str
    time_limit_s: Optional[float]
    status: str
    cuts: int
    nodes: int
    time_ms: float
    lb: float
    ub: float
    gap_percent: float
    error: str = ""


def gap_percent(lb: float, ub: float) -> float:
    if ub == lb:
        return 0.0
    return 100.0 * (ub - lb) / max(lb, GAP_EPS)


def run_one(entry: SuiteEntry, manifest_path: str, mode: str, limit: Optional[float]) -> BenchRow:
    try:
        inst = load_entry(entry, manifest_path)
        params = SolveParams(time_limit=limit)
        t0 = time.monotonic()
        if mode == "single":
            rep = solve_single_tree(inst, params)
        elif mode == "multi":
            rep = solve_multi_tree(inst, params)
        elif mode == "f3":
            rep = solve_f3(inst, params)
        elif mode == "brute":
            sol = brute_force(inst)
            ms = 1000.0 * (time.monotonic() - t0)
            return BenchRow(
                entry.name, entry.n, entry.p, entry.s, mode, limit,
                Status.OPTIMAL.value, 0, 0, ms, sol.value, sol.value, 0.0,
            )
        else:
            raise ValueError(f"unknown mode {mode!r}")
        return BenchRow(
            entry.name, entry.n, entry.p, entry.s, mode, limit,
            rep.status.value, rep.cuts_added, rep.nodes_explored,
            rep.wall_time_ms, rep.lower_bound, rep.upper_bound,
            gap_percent(rep.lower_bound, rep.upper_bound),
        )
    except Exception as exc:  # noqa: BLE001 - a bad row must not sink the run
        return BenchRow(
            entry.name, entry.n, entry.p, entry.s, mode, limit,
            "error", 0, 0, 0.0, math.nan, math.nan, math.nan, error=str(exc),
        )


def run_suite(
    entries: Sequence[SuiteEntry],
    manifest_path: str,
    modes: Sequence[str],
    limits: Sequence[Optional[float]],
    jobs: int = 1,
    echo=None,
) -> list[BenchRow]:
    tasks = [
        (entry, manifest_path, mode, limit)
        for entry in entries
        for mode in modes
        for limit in limits
    ]
    rows: list[Optional[BenchRow]] = [None] * len(tasks)
    if jobs <= 1:
        for i, t in enumerate(tasks):
            rows[i] = run_one(*t)
            if echo:
                echo(rows[i])
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = {pool.submit(run_one, *t): i for i, t in enumerate(tasks)}
            for fut in concurrent.futures.as_completed(futs):
                i = futs[fut]
                rows[i] = fut.result()
                if echo:
                    echo(rows[i])
    return [r for r in rows if r is not None]


_ROW_FIELDS = [
    "instance", "n", "p", "s", "mode", "time_limit_s", "status",
    "cuts", "nodes", "time_ms", "lb", "ub", "gap_percent", "error",
]


def write_rows_csv(rows: Sequence[BenchRow], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_ROW_FIELDS)
        for r in rows:
            d = dataclasses.asdict(r)
            w.writerow([_cell(d[f]) for f in _ROW_FIELDS])


@dataclasses.dataclass
class AggRow:
    n: int
    p: int
    mode: str
    time_limit_s: Optional[float]
    instances: int
    num_opt: int
    avg_gap_percent: float
    min_cuts: int
    max_cuts: int
    avg_cuts: float
    min_time_ms: float
    max_time_ms: float
    avg_time_ms: float


def aggregate(rows: Sequence[BenchRow]) -> list[AggRow]:
    groups: dict[tuple, list[BenchRow]] = {}
    for r in rows:
        if r.status == "error":
            continue
        groups.setdefault((r.n, r.p, r.mode, r.time_limit_s), []).append(r)
    out = []
    for key in sorted(groups, key=lambda k: (k[0], k[1], k[2], k[3] or 0.0)):
        g = groups[key]
        cuts = [r.cuts for r in g]
        times = [r.time_ms for r in g]
        out.append(
            AggRow(
                n=key[0], p=key[1], mode=key[2], time_limit_s=key[3],
                instances=len(g),
                num_opt=sum(r.status == Status.OPTIMAL.value for r in g),
                avg_gap_percent=sum(r.gap_percent for r in g) / len(g),
                min_cuts=min(cuts), max_cuts=max(cuts),
                avg_cuts=sum(cuts) / len(cuts),
                min_time_ms=min(times), max_time_ms=max(times),
                avg_time_ms=sum(times) / len(times),
            )
        )
    return out


def write_aggregate_csv(aggs: Sequence[AggRow], path) -> None:
    fields = [f.name for f in dataclasses.fields(AggRow)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(fields)
        for a in aggs:
            d = dataclasses.asdict(a)
            w.writerow([_cell(d[f]) for f in fields])


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.10g}"
    return v
