"""Command-line entry point.

Subcommands: simulate, compare, generate-trace, verify, report.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .domain import ClusterSpec, ConfigurationError, InvariantError, JobSpec, SlotConfig
from .simulator import (
    POLICIES,
    SimConfig,
    default_horizon,
    metrics,
    report_to_json,
    rounds_to_csv,
    run,
)
from .workload import (
    default_cluster,
    demo_cluster,
    demo_jobs,
    generate_trace,
    load_cluster,
    load_trace,
    save_trace,
)


def _add_workload_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--trace", help="trace CSV to simulate")
    src.add_argument("--demo", action="store_true",
                     help="built-in 3-job demo workload")
    src.add_argument("--synthetic", type=int, metavar="N",
                     help="generate an N-job synthetic trace")
    p.add_argument("--cluster", help="cluster JSON (default: built-in cluster "
                                     "matching the workload choice)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hours-scale", type=float, default=1.0,
                   help="scale synthetic job sizes (GPU-hours)")
    p.add_argument("--slot-seconds", type=float, default=360.0)
    p.add_argument("--horizon", type=int,
                   help="slots to simulate (default: 10x summed serial time)")
    p.add_argument("--restart-penalty", type=float, default=10.0,
                   help="seconds lost when a job's placement changes")
    p.add_argument("--comm-cost-factor", type=float, default=0.1)
    p.add_argument("--fork-count", type=int, default=3,
                   help="copies per job for the forking policy")


def _load_workload(args) -> tuple[list[JobSpec], ClusterSpec]:
    if args.trace:
        trace = load_trace(args.trace)
        cluster = load_cluster(args.cluster) if args.cluster else default_cluster()
    elif args.demo:
        trace = demo_jobs(iters_per_epoch=500)
        cluster = load_cluster(args.cluster) if args.cluster else demo_cluster()
    else:
        trace = generate_trace(args.synthetic, seed=args.seed,
                               hours_scale=args.hours_scale)
        cluster = load_cluster(args.cluster) if args.cluster else default_cluster()
    return trace, cluster


def _sim_config(args, policy: str, trace: Sequence[JobSpec]) -> SimConfig:
    slot = SlotConfig(
        slot_seconds=args.slot_seconds,
        horizon=args.horizon or default_horizon(
            trace, SlotConfig(slot_seconds=args.slot_seconds)
        ),
    )
    return SimConfig(
        policy=policy,
        slot=slot,
        restart_penalty_s=args.restart_penalty,
        comm_cost_factor=args.comm_cost_factor,
        fork_count=args.fork_count,
        seed=args.seed,
    )


def _print_metrics(policy: str, m: dict[str, float]) -> None:
    print(
        f"{policy:>12}  ttd={m['ttd_slots']:.0f} slots"
        f"  mean_jct={m['mean_jct_slots']:.2f}"
        f"  median_jct={m['median_jct_slots']:.2f}"
        f"  gru={m['gru']:.3f}  cru={m['cru']:.3f}"
        f"  done={m['completed']:.0f}/{m['total_jobs']:.0f}"
    )


def cmd_simulate(args) -> int:
    trace, cluster = _load_workload(args)
    config = _sim_config(args, args.policy, trace)
    report = run(trace, cluster, config)
    _print_metrics(args.policy, metrics(report))
    if report.incomplete:
        print(f"warning: {len(report.incomplete)} jobs unfinished at the "
              f"horizon ({config.slot.horizon} slots)", file=sys.stderr)
    if args.out_json:
        with open(args.out_json, "w") as fh:
            fh.write(report_to_json(report))
    if args.out_csv:
        rounds_to_csv(report, args.out_csv)
    return 0


def cmd_compare(args) -> int:
    trace, cluster = _load_workload(args)
    policies = args.policies.split(",") if args.policies else list(POLICIES)
    results = {}
    for policy in policies:
        config = _sim_config(args, policy.strip(), trace)
        report = run(trace, cluster, config)
        m = metrics(report)
        results[policy] = m
        _print_metrics(policy, m)
    if args.out_json:
        with open(args.out_json, "w") as fh:
            json.dump(results, fh, indent=2)
    return 0


def cmd_generate_trace(args) -> int:
    trace = generate_trace(
        args.n_jobs,
        seed=args.seed,
        mean_interarrival_slots=args.mean_interarrival,
        hours_scale=args.hours_scale,
    )
    save_trace(trace, args.out)
    print(f"wrote {len(trace)} jobs to {args.out}")
    return 0


def cmd_verify(args) -> int:
    problems: list[str] = []
    try:
        trace = load_trace(args.trace)
    except (ConfigurationError, InvariantError, OSError, ValueError) as exc:
        print(f"trace: {exc}", file=sys.stderr)
        return 1
    cluster = load_cluster(args.cluster) if args.cluster else default_cluster()
    for job in trace:
        if len(job.throughput) != cluster.n_types:
            problems.append(
                f"job {job.id}: {len(job.throughput)} throughput entries, "
                f"cluster has {cluster.n_types} GPU types"
            )
            continue
        runnable = [
            r for r in job.runnable_types if cluster.total_of_type(r) > 0
        ]
        if not runnable:
            problems.append(f"job {job.id}: no runnable GPU type in cluster")
        if job.workers > cluster.total_gpus():
            problems.append(
                f"job {job.id}: demands {job.workers} workers, cluster has "
                f"{cluster.total_gpus()} GPUs"
            )
    for p in problems:
        print(p, file=sys.stderr)
    if problems:
        return 1
    print(f"ok: {len(trace)} jobs runnable on {cluster.n_nodes} nodes / "
          f"{cluster.total_gpus()} GPUs")
    return 0


def cmd_report(args) -> int:
    with open(args.json_file) as fh:
        payload = json.load(fh)
    m = payload.get("metrics", {})
    print(f"policy: {payload.get('policy')}")
    for key in ("ttd_slots", "mean_jct_slots", "median_jct_slots", "gru",
                "cru", "completed", "total_jobs"):
        if m.get(key) is not None:
            print(f"  {key}: {m[key]:.4f}")
    incomplete = payload.get("incomplete", [])
    if incomplete:
        print(f"  unfinished jobs: {len(incomplete)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hetsched",
        description="Trace-driven simulator for GPU-cluster schedulers",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one policy over a workload")
    _add_workload_args(p)
    p.add_argument("--policy", choices=POLICIES, default="hadar")
    p.add_argument("--out-json", help="write the full report as JSON")
    p.add_argument("--out-csv", help="write the per-round trail as CSV")
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("compare", help="run several policies on one workload")
    _add_workload_args(p)
    p.add_argument("--policies", help="comma-separated policy ids "
                                      f"(default: all of {','.join(POLICIES)})")
    p.add_argument("--out-json")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("generate-trace", help="write a synthetic trace CSV")
    p.add_argument("--n-jobs", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mean-interarrival", type=float, default=0.0,
                   help="mean arrival gap in slots (0: all arrive at t=0)")
    p.add_argument("--hours-scale", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_generate_trace)

    p = sub.add_parser("verify", help="check a trace/cluster pair is runnable")
    p.add_argument("--trace", required=True)
    p.add_argument("--cluster")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("report", help="summarize a JSON report file")
    p.add_argument("json_file")
    p.set_defaults(fn=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigurationError, InvariantError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
