"""Command-line front end: ``tandemscale <subcommand> ...``.

Every result file carries a run manifest (subcommand, parameters, seed,
package version and SHA-256 digests of input files).  JSON outputs hold it
under ``"manifest"``; CSV outputs start with a ``# manifest: {...}`` line;
trace files hold it in their header line.  Nothing time-dependent is
recorded, so identical invocations give byte-identical output.

Exit codes: 0 success, 1 audit violations, 2 usage or configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

from . import __version__
from . import workload
from .engine import cost, simulate
from .offline import closed_form_lb, empirical_ratios, enhanced_opt, worst_case_ratio_bound
from .policies import POLICIES, make_policy
from .potential import audit_all
from .power import PowerFunction
from .stochastic import NetworkConfig, simulate_network

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
THREADS_ENV = "TANDEMSCALE_THREADS"

SWEEP_COLUMNS = ["n", "K", "pattern", "policy", "seed", "jobs", "alg_cost", "opt_e",
                 "closed_form", "vs_opt_e", "vs_closed_form", "finalbound_slack"]


class UsageError(ValueError):
    pass


# ----------------------------------------------------------------------
# manifest and output helpers
# ----------------------------------------------------------------------
def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def run_manifest(subcommand: str, params: dict, seed=None, inputs=()) -> dict:
    return {
        "subcommand": subcommand,
        "params": params,
        "seed": seed,
        "version": __version__,
        "inputs": {str(p): sha256_file(p) for p in inputs},
    }


def _json_text(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def _csv_text(manifest: dict, header, rows) -> str:
    buf = io.StringIO()
    buf.write("# manifest: " + json.dumps(manifest, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _write(text: str, path: Optional[str]) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _params(args, *skip) -> dict:
    drop = {"func", "command"} | set(skip)
    return {k: v for k, v in sorted(vars(args).items()) if k not in drop}


def _power(text: str) -> PowerFunction:
    try:
        return PowerFunction.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_trace(path: str):
    return workload.parse(path)


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------
def cmd_gen_trace(args) -> int:
    if args.pattern == "batch":
        if args.n is None:
            raise UsageError("batch needs --n")
        trace = workload.gen_batch(args.n, args.t0, args.k)
    elif args.pattern == "trickle":
        trace = workload.gen_trickle_then_burst(args.gap, args.burst, args.k)
    else:
        if args.rate is None or args.horizon is None:
            raise UsageError("poisson needs --rate and --horizon")
        trace = workload.gen_poisson(args.rate, args.horizon, args.seed, args.k)
    meta = {"manifest": run_manifest("gen-trace", _params(args, "output"), args.seed)}
    _write(workload.dumps(trace, meta), args.output)
    return EXIT_OK


def cmd_simulate(args) -> int:
    pf = _power(args.power)
    policy = make_policy(args.policy, pf)
    trace = _load_trace(args.trace)
    traj = simulate(trace, policy)
    rep = cost(traj)
    man = run_manifest("simulate", _params(args, "output", "trajectory"), None, [args.trace])
    row = [args.policy, trace.n, trace.servers, rep.flow_time, rep.energy, rep.total]
    _write(_csv_text(man, ["policy", "n", "K", "flow_time", "energy", "total"], [row]),
           args.output)
    if args.trajectory:
        body = traj.to_json()
        body["manifest"] = man
        Path(args.trajectory).write_text(_json_text(body))
    return EXIT_OK


def cmd_audit(args) -> int:
    pf = _power(args.power)
    trace = _load_trace(args.trace)
    traj = simulate(trace, make_policy("proposed", pf))
    opt = enhanced_opt(trace, pf)
    result = audit_all(traj, opt, c=args.c)
    result["manifest"] = run_manifest("audit", _params(args, "output"), None, [args.trace])
    _write(_json_text(result), args.output)
    return EXIT_OK if result["passed"] else EXIT_VIOLATION


def cmd_optbound(args) -> int:
    pf = _power(args.power)
    trace = _load_trace(args.trace)
    opt = enhanced_opt(trace, pf)
    body = {
        "opt_e": opt.to_json(),
        "closed_form": closed_form_lb(trace.n, trace.servers, pf),
        "worst_case_ratio_bound": worst_case_ratio_bound(pf),
    }
    if args.policy:
        alg = cost(simulate(trace, make_policy(args.policy, pf))).total
        body["policy"] = args.policy
        body["alg_cost"] = alg
        body["ratios"] = empirical_ratios(trace, pf, alg, opt)
    body["manifest"] = run_manifest("optbound", _params(args, "output"), None, [args.trace])
    _write(_json_text(body), args.output)
    return EXIT_OK


def cmd_stochastic(args) -> int:
    cfg = NetworkConfig.loads(Path(args.config).read_text())
    report = simulate_network(cfg, args.horizon, args.warmup, args.seed)
    man = run_manifest("stochastic", _params(args, "output"), args.seed, [args.config])
    if args.format == "csv":
        buf = io.StringIO()
        buf.write("# manifest: " + json.dumps(man, sort_keys=True) + "\n")
        buf.write(report.to_csv())
        _write(buf.getvalue(), args.output)
    else:
        body = report.to_json()
        body["manifest"] = man
        _write(_json_text(body), args.output)
    return EXIT_OK


def _sweep_trace(pattern: str, n: int, K: int, seed: int, grid: dict):
    if pattern == "batch":
        return workload.gen_batch(n, 0.0, K)
    if pattern == "trickle":
        tr = workload.gen_trickle_then_burst(float(grid.get("gap", 0.75)), max(n - 2, 0), K)
        return workload.Trace(tr.arrivals[:n], K)
    if pattern == "poisson":
        rate = float(grid.get("rate", 1.0))
        # a long enough window, then keep the first n arrivals
        horizon = 2.0 * n / rate + 10.0 / rate
        tr = workload.gen_poisson(rate, horizon, seed, K)
        return workload.Trace(tr.arrivals[:n], K)
    raise UsageError(f"unknown pattern {pattern!r}")


def sweep_row(point: tuple) -> list:
    n, K, pattern, policy, seed, grid = point
    pf = PowerFunction.parse(grid.get("power", "1,2"))
    trace = _sweep_trace(pattern, n, K, seed, grid)
    alg = cost(simulate(trace, make_policy(policy, pf))).total
    r = empirical_ratios(trace, pf, alg)
    return [n, K, pattern, policy, seed, trace.n, alg, r["opt_e"], r["closed_form"],
            r["vs_opt_e"], r["vs_closed_form"], r["finalbound_slack"]]


def sweep_points(grid: dict) -> list:
    try:
        axes = [list(grid.get("n", [])), list(grid.get("K", [])),
                list(grid.get("pattern", ["batch"])), list(grid.get("policy", ["proposed"])),
                list(grid.get("seeds", [0]))]
    except TypeError:
        raise UsageError("grid axes must be lists") from None
    for p in axes[2]:
        if p not in ("batch", "trickle", "poisson"):
            raise UsageError(f"unknown pattern {p!r}")
    for p in axes[3]:
        if p not in POLICIES:
            raise UsageError(f"unknown policy {p!r}")
    for v in axes[0] + axes[1]:
        if isinstance(v, bool) or not isinstance(v, int) or v < 0:
            raise UsageError(f"grid sizes must be nonnegative integers, got {v!r}")
    if any(k < 1 for k in axes[1]):
        raise UsageError("K values must be >= 1")
    _power(grid.get("power", "1,2"))
    return [(*pt, grid) for pt in itertools.product(*axes)]


def sweep_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        val = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    return max(1, val)


def run_sweep(grid: dict, threads: int = 1) -> list:
    points = sweep_points(grid)
    if threads > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(points))) as pool:
            return list(pool.map(sweep_row, points))
    return [sweep_row(p) for p in points]


def cmd_sweep(args) -> int:
    try:
        grid = json.loads(Path(args.spec).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"sweep spec is not valid JSON: {exc}") from None
    if not isinstance(grid, dict):
        raise UsageError("sweep spec must be a JSON object")
    rows = run_sweep(grid, sweep_threads())
    man = run_manifest("sweep", _params(args, "output"), None, [args.spec])
    _write(_csv_text(man, SWEEP_COLUMNS, rows), args.output)
    return EXIT_OK


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------
def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tandemscale",
                                 description="Speed scaling experiments for tandem servers.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-trace", help="write an arrival trace (JSON lines)")
    g.add_argument("pattern", choices=["batch", "trickle", "poisson"])
    g.add_argument("--k", type=int, required=True, help="number of tandem servers")
    g.add_argument("--n", type=int, help="batch size")
    g.add_argument("--t0", type=float, default=0.0, help="batch release time")
    g.add_argument("--gap", type=float, default=0.75, help="trickle: second arrival time")
    g.add_argument("--burst", type=int, default=20, help="trickle: burst size")
    g.add_argument("--rate", type=float, help="poisson arrival rate")
    g.add_argument("--horizon", type=float, help="poisson time window")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output")
    g.set_defaults(func=cmd_gen_trace)

    s = sub.add_parser("simulate", help="run a policy; cost CSV and optional trajectory JSON")
    s.add_argument("trace")
    s.add_argument("--policy", default="proposed", choices=sorted(POLICIES))
    s.add_argument("--power", default="1,2", help="c,alpha[,cap]")
    s.add_argument("--trajectory", help="write the trajectory JSON here")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_simulate)

    a = sub.add_parser("audit", help="potential-function audits of the proposed policy")
    a.add_argument("trace")
    a.add_argument("--power", default="1,2")
    a.add_argument("--c", type=float, default=6.0, help="potential scale")
    a.add_argument("-o", "--output")
    a.set_defaults(func=cmd_audit)

    o = sub.add_parser("optbound", help="relaxed offline optimum and lower bounds")
    o.add_argument("trace")
    o.add_argument("--power", default="1,2")
    o.add_argument("--policy", choices=sorted(POLICIES), help="also report this policy's ratios")
    o.add_argument("-o", "--output")
    o.set_defaults(func=cmd_optbound)

    st = sub.add_parser("stochastic", help="layered Poisson network: closed forms and simulation")
    st.add_argument("config")
    st.add_argument("--horizon", type=float, default=1e5)
    st.add_argument("--warmup", type=float, help="default: 10%% of the horizon")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--format", choices=["json", "csv"], default="json")
    st.add_argument("-o", "--output")
    st.set_defaults(func=cmd_stochastic)

    w = sub.add_parser("sweep", help="ratio CSV over a JSON grid of (n, K, pattern, policy)")
    w.add_argument("spec")
    w.add_argument("-o", "--output")
    w.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)  # exits with 2 on bad flags
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        # trace, config and power errors are all ValueError subclasses
        print(f"tandemscale {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
