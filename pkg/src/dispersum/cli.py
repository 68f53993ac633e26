"""Command-line front end: solve, gen, bench.

Exit codes for ``solve``: 0 optimal, 2 time limit, 1 any error.  All other
subcommands use 0/1.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import __version__
from .baselines import brute_force, solve_f3
from .bench import aggregate, run_suite, write_aggregate_csv, write_rows_csv
from .diagnostics import cut_strength
from .engine import Progress, SolveParams, solve_multi_tree, solve_single_tree
from .geometry import certify_cnd
from .instances import (
    GenSpec,
    SuiteEntry,
    generate,
    read_instance,
    read_manifest,
    resolve_p,
    write_instance,
    write_manifest,
)
from .model import Instance, SolveReport, Status

CND_AUTO_LIMIT = 500  # above this n the pre-solve check only runs on request


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed the usage message
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="dispersum",
        description="Exact solver for the p-dispersion-sum problem",
    )
    ap.add_argument("--version", action="version", version=f"dispersum {__version__}")
    sub = ap.add_subparsers(required=True, metavar="command")

    sp = sub.add_parser("solve", help="solve one instance file")
    sp.add_argument("--instance", required=True, help="triplet or points file")
    sp.add_argument("--p", type=int, default=None, help="selection size (default: ceil(n/10))")
    sp.add_argument("--r", type=float, default=1.0, help="distance power in (0, 2]")
    sp.add_argument("--mode", choices=["single", "multi", "f3", "brute"], default="single")
    sp.add_argument("--time-limit", type=float, default=None, help="seconds")
    sp.add_argument("--gap", type=float, default=None, help="absolute gap tolerance")
    sp.add_argument("--json", default=None, help="write the full report here")
    sp.add_argument("--verify-cnd", action="store_true",
                    help=f"force the CND pre-check (auto only up to n={CND_AUTO_LIMIT})")
    sp.add_argument("--cut-strength", action="store_true",
                    help="append elimination-count diagnostics to the report")
    sp.add_argument("--progress", action="store_true", help="log progress lines")
    sp.set_defaults(func=cmd_solve)

    gp = sub.add_parser("gen", help="generate GKD-style instances plus a suite manifest")
    gp.add_argument("--n", required=True, help="point count, comma list allowed (e.g. 25,50)")
    gp.add_argument("--s", default="2", help="coordinate dimension, comma list allowed")
    gp.add_argument("--seed", type=int, default=1, help="base seed; instance i uses seed+i")
    gp.add_argument("--count", type=int, default=1, help="instances per configuration")
    gp.add_argument("--r", type=float, default=1.0)
    gp.add_argument("--p-rule", default="ceil10",
                    help="ceil10 | 2ceil10 | an explicit integer; comma list allowed")
    gp.add_argument("--out-dir", required=True)
    gp.add_argument("--format", choices=["points", "triplet"], default="points")
    gp.set_defaults(func=cmd_gen)

    bp = sub.add_parser("bench", help="run a suite manifest across solver modes")
    bp.add_argument("--suite", required=True, help="manifest JSON from 'gen'")
    bp.add_argument("--modes", default="single", help="comma list from single,multi,f3,brute")
    bp.add_argument("--time-limit", default="10", help="seconds, comma list allowed")
    bp.add_argument("--csv", required=True, help="row CSV; aggregate/figures derive from it")
    bp.add_argument("--jobs", type=int, default=1)
    bp.add_argument("--no-figures", action="store_true", help="skip the PNG summaries")
    bp.set_defaults(func=cmd_bench)
    return ap


# --------------------------------------------------------------------------


def cmd_solve(args) -> int:
    inst = read_instance(args.instance, p=args.p, r=args.r)
    if args.p is None:
        inst = Instance(q=inst.q, p=resolve_p(inst.n, "ceil10"), r=inst.r,
                        points=inst.points, name=inst.name)

    if args.verify_cnd or (inst.n <= CND_AUTO_LIMIT and args.mode in ("single", "multi")):
        cert = certify_cnd(inst.q)
        if not cert.is_cnd:
            print(
                "warning: matrix is not conditionally negative definite "
                f"(max projected eigenvalue {cert.max_projected_eigenvalue:.3e} "
                f"> tol {cert.tolerance:.3e}); optimality is not guaranteed",
                file=sys.stderr,
            )

    params = SolveParams(time_limit=args.time_limit)
    if args.gap is not None:
        params.gap_abs = args.gap
    if args.progress:
        params.progress = _print_progress

    if args.mode == "single":
        rep = solve_single_tree(inst, params)
    elif args.mode == "multi":
        rep = solve_multi_tree(inst, params)
    elif args.mode == "f3":
        rep = solve_f3(inst, params)
    else:
        sol = brute_force(inst)
        rep = SolveReport(
            status=Status.OPTIMAL, incumbent=sol, lower_bound=sol.value,
            upper_bound=sol.value, cuts_added=0, nodes_explored=0,
            lp_solves=0, wall_time_ms=0.0,
        )

    _print_summary(inst, rep)

    if args.json:
        doc = rep.to_json_dict()
        doc["instance"] = {"name": inst.name, "n": inst.n, "p": inst.p, "r": inst.r}
        if args.cut_strength:
            doc["cut_strength"] = _strength_table(inst, rep)
        with open(args.json, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
    elif args.cut_strength:
        for row in _strength_table(inst, rep):
            print(
                f"cut k={row['k']:>4}  ratio={row['ratio']:.4f}  "
                f"radius={row['radius']}  eliminated={row['eliminated']}"
            )

    return {Status.OPTIMAL: 0, Status.TIME_LIMIT: 2, Status.INFEASIBLE: 1}[rep.status]


def _strength_table(inst: Instance, rep: SolveReport) -> list[dict]:
    if len(rep.cut_log) < 2:
        return []
    last = rep.cut_log[-1]
    out = []
    for e in rep.cut_log[:-1]:
        try:
            cs = cut_strength(inst, e, last)
        except ValueError:
            continue  # zero gradient: stationarity already certified the solve
        out.append(
            {"k": cs.k, "l": cs.l, "ratio": cs.ratio,
             "radius": cs.radius, "eliminated": cs.eliminated}
        )
    return out


def _print_progress(ev: Progress) -> None:
    ub = "inf" if math.isinf(ev.ub) else f"{ev.ub:.6f}"
    print(
        f"[{ev.time_s:8.2f}s] lb={ev.lb:.6f} ub={ub} nodes={ev.nodes} cuts={ev.cuts}",
        file=sys.stderr,
    )


def _print_summary(inst: Instance, rep: SolveReport) -> None:
    print(f"instance : {inst.name or '(unnamed)'}  n={inst.n} p={inst.p} r={inst.r:g}")
    print(f"status   : {rep.status.value}")
    if rep.incumbent is not None:
        print(f"value    : {rep.incumbent.value:.10g}")
        sel = " ".join(str(i) for i in rep.incumbent.selected)
        print(f"selected : {sel}")
    print(f"bounds   : lb={rep.lower_bound:.10g} ub={rep.upper_bound:.10g}")
    print(f"counters : cuts={rep.cuts_added} nodes={rep.nodes_explored} lps={rep.lp_solves}")
    print(f"time     : {rep.wall_time_ms / 1000.0:.3f} s")


# --------------------------------------------------------------------------


def cmd_gen(args) -> int:
    ns = _int_list(args.n, "--n")
    ss = _int_list(args.s, "--s")
    rules = []
    for tok in str(args.p_rule).split(","):
        tok = tok.strip()
        if tok in ("ceil10", "2ceil10"):
            rules.append(tok)
        else:
            try:
                rules.append(int(tok))
            except ValueError:
                raise ValueError(f"--p-rule: unknown rule {tok!r}") from None
    if args.count < 1:
        raise ValueError("--count must be at least 1")

    os.makedirs(args.out_dir, exist_ok=True)
    entries = []
    written: set[str] = set()
    for n in ns:
        for s in ss:
            for i in range(args.count):
                seed = args.seed + i
                for rule in rules:
                    spec = GenSpec(n=n, s=s, seed=seed, p_rule=rule, r=args.r)
                    inst = generate(spec)
                    fname = spec.file_stem() + ".txt"
                    fpath = os.path.join(args.out_dir, fname)
                    if fname not in written:
                        write_instance(inst, fpath, args.format)
                        written.add(fname)
                    entries.append(
                        SuiteEntry(
                            name=spec.instance_name(), path=fname, fmt=args.format,
                            n=n, s=s, p=spec.p, r=args.r, seed=seed,
                            p_rule=str(rule),
                        )
                    )
    manifest = os.path.join(args.out_dir, "suite.json")
    write_manifest(entries, manifest)
    print(f"wrote {len(written)} instance file(s), {len(entries)} suite entries")
    print(f"manifest: {manifest}")
    return 0


def _int_list(text: str, flag: str) -> list[int]:
    out = []
    for tok in str(text).split(","):
        try:
            v = int(tok.strip())
        except ValueError:
            raise ValueError(f"{flag}: {tok!r} is not an integer") from None
        if v < 1:
            raise ValueError(f"{flag}: {v} must be positive")
        out.append(v)
    return out


# --------------------------------------------------------------------------


def cmd_bench(args) -> int:
    entries = read_manifest(args.suite)
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for m in modes:
        if m not in ("single", "multi", "f3", "brute"):
            raise ValueError(f"--modes: unknown mode {m!r}")
    limits = [float(t.strip()) for t in str(args.time_limit).split(",") if t.strip()]

    def echo(row):
        print(
            f"{row.instance:>34} {row.mode:>6} limit={row.time_limit_s} "
            f"-> {row.status} lb={row.lb:.6g} cuts={row.cuts} "
            f"nodes={row.nodes} {row.time_ms / 1000.0:.2f}s"
            + (f"  [{row.error}]" if row.error else "")
        )

    rows = run_suite(entries, args.suite, modes, limits, jobs=args.jobs, echo=echo)
    write_rows_csv(rows, args.csv)
    stem = os.path.splitext(args.csv)[0]
    agg_path = stem + "_summary.csv"
    write_aggregate_csv(aggregate(rows), agg_path)
    print(f"rows     : {os.path.abspath(args.csv)}")
    print(f"aggregate: {os.path.abspath(agg_path)}")
    if not args.no_figures:
        from .plots import render_bench_figures

        for p in render_bench_figures(rows, stem):
            print(f"figure   : {p}")
    n_err = sum(r.status == "error" for r in rows)
    if n_err:
        print(f"warning: {n_err} row(s) errored", file=sys.stderr)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
