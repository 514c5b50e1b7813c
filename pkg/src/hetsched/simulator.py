"""Discrete-time trace-driven simulator.

One round per slot: build the queue of arrived unfinished jobs, ask the
policy for an allocation, re-validate it (policies are not trusted), charge
a restart penalty to any job whose placement changed since the previous
round, then advance progress.  Busy-time accounting feeds the GPU and
cluster utilization metrics.
"""

from __future__ import annotations

import csv
import json
import math
import statistics
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from .baselines import FifoGang, GavelProxy, TiresiasLike
from .domain import (
    AllocationMatrix,
    ClusterSpec,
    ConfigurationError,
    InvariantError,
    JobSpec,
    JobState,
    SlotConfig,
    apply_round_progress,
    bottleneck_throughput,
    validate,
)
from .hadar import HadarScheduler
from .pricing import UtilityFn, compute_bounds, effective_throughput_utility


POLICIES = ("hadar", "hadare", "fifo", "tiresias", "gavel-proxy")


class InstanceTooLargeError(ConfigurationError):
    """The exact offline optimum was asked for a non-tiny instance."""


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to reproduce one run."""

    policy: str
    slot: SlotConfig = SlotConfig()
    restart_penalty_s: float = 10.0
    comm_cost_factor: float = 0.1
    fork_count: int = 3  # used by the forking policy only
    seed: int = 0

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ConfigurationError(
                f"unknown policy {self.policy!r}; choose from {POLICIES}"
            )
        if not 0 <= self.restart_penalty_s < self.slot.slot_seconds:
            raise ConfigurationError(
                "restart penalty must be shorter than a slot"
            )
        if self.fork_count < 1:
            raise ConfigurationError("fork_count must be >= 1")


@dataclass(frozen=True)
class RoundRecord:
    """What happened in one simulated slot."""

    t: int
    queue_len: int
    placements: dict[int, tuple[tuple[tuple[int, int], int], ...]]
    busy_gpu_seconds: tuple[float, ...]  # per GPU type
    busy_node_seconds: tuple[float, ...]  # per node
    completions: tuple[int, ...]
    decision_seconds: float


@dataclass(frozen=True)
class SimReport:
    """Full outcome of a run plus the per-round trail."""

    policy: str
    slot: SlotConfig
    cluster: ClusterSpec
    rounds: tuple[RoundRecord, ...]
    final_states: dict[int, JobState]
    jct_slots: dict[int, int]  # completed jobs only
    incomplete: tuple[int, ...]  # job ids unfinished at the horizon

    @property
    def ttd_slots(self) -> int:
        """Total time to drain: latest finish boundary (horizon if unfinished)."""
        if self.incomplete:
            return self.slot.horizon
        if not self.jct_slots:
            return 0
        return max(s.finish_time for s in self.final_states.values()
                   if s.finish_time is not None)


def make_policy(
    config: SimConfig,
    cluster: ClusterSpec,
    trace: Sequence[JobSpec],
    util: Optional[UtilityFn] = None,
):
    """Instantiate the round scheduler named by ``config.policy``.

    The forking policy reuses the price-based scheduler; the trace passed in
    must already be the forked one in that case.
    """
    if config.policy == "fifo":
        return FifoGang(cluster)
    if config.policy == "tiresias":
        # promotion threshold: median total GPU-service demand, in GPU-slots
        services = sorted(
            j.total_iters / (min(j.throughput[r] for r in j.runnable_types)
                             * config.slot.slot_seconds)
            for j in trace
        )
        threshold = statistics.median(services) if services else 1.0
        return TiresiasLike(cluster, threshold_gpu_slots=threshold)
    if config.policy == "gavel-proxy":
        return GavelProxy(cluster)
    util = util or effective_throughput_utility(config.slot)
    bounds = compute_bounds(trace, cluster, util, config.slot)
    scheduler = HadarScheduler(
        cluster, bounds, util, config.slot,
        comm_cost_factor=config.comm_cost_factor,
    )

    class _Adapter:
        inner = scheduler

        def schedule_round(self, queue, t):
            return scheduler.schedule_round(queue, t).to_allocation()

    return _Adapter()


def default_horizon(trace: Sequence[JobSpec], slot: SlotConfig) -> int:
    """Ten times the summed serial durations (each job alone on its best type)."""
    total = 0.0
    for job in trace:
        best = max(job.throughput)
        if best <= 0:
            raise ConfigurationError(f"job {job.id} cannot run anywhere")
        total += math.ceil(
            job.total_iters / (best * job.workers * slot.slot_seconds)
        )
    return max(1, int(10 * total))


def run(
    trace: Sequence[JobSpec],
    cluster: ClusterSpec,
    config: SimConfig,
    util: Optional[UtilityFn] = None,
) -> SimReport:
    """Simulate the whole trace to completion or the horizon."""
    if config.policy == "hadare":
        from .hadare import run_hadare

        return run_hadare(trace, cluster, config, util)

    policy = make_policy(config, cluster, trace, util)
    states: dict[int, JobState] = {j.id: JobState.fresh(j) for j in trace}
    specs = {j.id: j for j in trace}
    prev_key: dict[int, Optional[tuple]] = {j.id: None for j in trace}
    records: list[RoundRecord] = []
    slot = config.slot

    t = 0
    while t < slot.horizon:
        unfinished = [s for s in states.values() if not s.finished]
        if not unfinished:
            break
        queue = [s for s in unfinished if s.spec.arrival <= t]
        if not queue:
            t = min(s.spec.arrival for s in unfinished)  # idle gap, skip ahead
            continue

        started = time.perf_counter()
        alloc = policy.schedule_round(queue, t)
        decision_seconds = time.perf_counter() - started

        bad = validate(alloc, cluster, specs.values(), t)
        if bad:
            raise InvariantError(
                f"policy {config.policy} produced an infeasible round at t={t}: "
                + "; ".join(v.detail for v in bad[:3])
            )

        busy_gpu = [0.0] * cluster.n_types
        busy_node = [0.0] * cluster.n_nodes
        completions: list[int] = []
        placements: dict[int, tuple] = {}

        for state in queue:
            j = state.spec.id
            placement = alloc.placement(j)
            key = tuple(sorted(placement.items())) if placement else None
            if placement and key != prev_key[j]:
                state = _with_penalty(state, config.restart_penalty_s)
                states[j] = state
            prev_key[j] = key
            if not placement:
                continue
            placements[j] = key

            before = state.remaining_iters
            new_state = apply_round_progress(state, alloc, slot, t)
            states[j] = new_state
            done = before - new_state.remaining_iters
            rate = bottleneck_throughput(state.spec, placement)
            active = min(
                slot.slot_seconds,
                state.restart_penalty_pending + done / (rate * state.spec.workers),
            )
            for (h, r), w in placement.items():
                busy_gpu[r] += active * w
                busy_node[h] = max(busy_node[h], active)
            if new_state.finished:
                completions.append(j)

        records.append(
            RoundRecord(
                t=t,
                queue_len=len(queue),
                placements=placements,
                busy_gpu_seconds=tuple(busy_gpu),
                busy_node_seconds=tuple(busy_node),
                completions=tuple(sorted(completions)),
                decision_seconds=decision_seconds,
            )
        )
        t += 1

    jct = {
        j: s.finish_time - s.spec.arrival
        for j, s in states.items()
        if s.finish_time is not None
    }
    incomplete = tuple(sorted(j for j, s in states.items() if not s.finished))
    return SimReport(
        policy=config.policy,
        slot=slot,
        cluster=cluster,
        rounds=tuple(records),
        final_states=dict(states),
        jct_slots=jct,
        incomplete=incomplete,
    )


def _with_penalty(state: JobState, penalty_s: float) -> JobState:
    from dataclasses import replace

    return replace(state, restart_penalty_pending=penalty_s)


# ------------------------------------------------------------------------- #
# Metrics


def metrics(report: SimReport) -> dict[str, float]:
    """Summary statistics for one run.

    GPU utilization (GRU) is busy GPU-seconds over total GPU-seconds until
    drain; cluster utilization (CRU) is busy node-seconds over total
    node-seconds until drain.  JCTs are in slots.
    """
    slot = report.slot
    ttd = report.ttd_slots
    wall = max(1, ttd) * slot.slot_seconds
    busy_gpu = sum(sum(r.busy_gpu_seconds) for r in report.rounds)
    busy_node = sum(sum(r.busy_node_seconds) for r in report.rounds)
    jcts = sorted(report.jct_slots.values())
    return {
        "ttd_slots": float(ttd),
        "ttd_seconds": ttd * slot.slot_seconds,
        "mean_jct_slots": statistics.fmean(jcts) if jcts else float("nan"),
        "median_jct_slots": float(statistics.median(jcts)) if jcts else float("nan"),
        "gru": busy_gpu / (report.cluster.total_gpus() * wall),
        "cru": busy_node / (report.cluster.n_nodes * wall),
        "completed": float(len(jcts)),
        "total_jobs": float(len(report.final_states)),
        "mean_decision_seconds": (
            statistics.fmean(r.decision_seconds for r in report.rounds)
            if report.rounds else 0.0
        ),
    }


def completion_curve(report: SimReport) -> list[tuple[int, float]]:
    """(slot boundary, fraction of jobs completed by then) step points."""
    total = len(report.final_states)
    points = []
    done = 0
    for f in sorted(report.jct_slots.keys(), key=lambda j: report.final_states[j].finish_time):
        done += 1
        points.append((report.final_states[f].finish_time, done / total))
    return points


# ------------------------------------------------------------------------- #
# Exact offline optimum (tiny instances only)


def offline_opt(
    trace: Sequence[JobSpec],
    cluster: ClusterSpec,
    slot: SlotConfig,
    horizon: int,
    util: Optional[UtilityFn] = None,
) -> float:
    """Maximum total utility achievable with full future knowledge.

    Depth-first search over slots with memoization on (slot, remaining work).
    Exponential: guarded to tiny instances and raises InstanceTooLargeError
    otherwise.
    """
    if (
        len(trace) > 4
        or cluster.n_nodes > 3
        or cluster.n_types > 2
        or any(c > 2 for n in cluster.nodes for c in n.capacity)
        or horizon > 8
    ):
        raise InstanceTooLargeError(
            "offline_opt supports at most 4 jobs, 3 nodes, 2 GPU types, "
            "per-slot capacities of 2, and an 8-slot horizon"
        )
    util = util or effective_throughput_utility(slot)
    jobs = sorted(trace, key=lambda j: j.id)
    R = cluster.n_types
    caps = tuple(
        cluster.capacity(h, r)
        for h in range(cluster.n_nodes)
        for r in range(cluster.n_types)
    )

    def placements_for(job: JobSpec, free: tuple[int, ...]) -> list[tuple[int, ...]]:
        cells = [
            k for k in range(len(free))
            if job.throughput[k % R] > 0 and free[k] > 0
        ]
        out: list[tuple[int, ...]] = []

        def build(i: int, need: int, acc: list[int]) -> None:
            if need == 0:
                vec = [0] * len(free)
                for k, w in zip(cells, acc):
                    vec[k] = w
                out.append(tuple(vec))
                return
            if i == len(cells):
                return
            for w in range(min(free[cells[i]], need), -1, -1):
                acc.append(w)
                build(i + 1, need - w, acc)
                acc.pop()

        build(0, job.workers, [])
        return out

    memo: dict[tuple, float] = {}

    def search(t: int, remaining: tuple[float, ...]) -> float:
        if t >= horizon or all(x <= 0 for x in remaining):
            return 0.0
        key = (t, tuple(round(x, 9) for x in remaining))
        hit = memo.get(key)
        if hit is not None:
            return hit

        best = 0.0

        def assign(i: int, free: tuple[int, ...], rem: list[float],
                   gained: float) -> None:
            nonlocal best
            if i == len(jobs):
                best = max(best, gained + search(t + 1, tuple(rem)))
                return
            assign(i + 1, free, rem, gained)  # job idles this slot
            job = jobs[i]
            if rem[i] <= 0 or t < job.arrival:
                return
            for vec in placements_for(job, free):
                rate = min(
                    job.throughput[k % R] for k, w in enumerate(vec) if w
                )
                done = rate * job.workers * slot.slot_seconds
                old = rem[i]
                rem[i] = max(0.0, old - done)
                extra = (
                    util(job, max(1.0, (t + 1) - job.arrival))
                    if rem[i] == 0.0 else 0.0
                )
                assign(
                    i + 1,
                    tuple(f - w for f, w in zip(free, vec)),
                    rem,
                    gained + extra,
                )
                rem[i] = old

        assign(0, caps, [j if j > 0 else 0.0 for j in remaining], 0.0)
        memo[key] = best
        return best

    return search(0, tuple(j.total_iters for j in jobs))


# ------------------------------------------------------------------------- #
# Serialization


def report_to_json(report: SimReport) -> str:
    """Machine-readable summary: metrics, per-job outcomes, completion curve."""
    m = metrics(report)
    payload = {
        "policy": report.policy,
        "slot_seconds": report.slot.slot_seconds,
        "horizon": report.slot.horizon,
        "metrics": {k: (None if math.isnan(v) else v) for k, v in m.items()},
        "incomplete": list(report.incomplete),
        "jobs": {
            str(j): {
                "arrival": s.spec.arrival,
                "finish": s.finish_time,
                "jct_slots": report.jct_slots.get(j),
            }
            for j, s in sorted(report.final_states.items())
        },
        "completion_curve": completion_curve(report),
    }
    return json.dumps(payload, indent=2)


def rounds_to_csv(report: SimReport, path: str) -> None:
    """Per-round trail: one row per simulated slot.

    Columns: t, queue_len, allocated_jobs (count), completions
    (semicolon-joined ids), decision_seconds, busy_gpu_seconds_<type label>
    one column per GPU type, busy_node_seconds (summed over nodes).
    """
    labels = [g.label for g in report.cluster.gpu_types]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["t", "queue_len", "allocated_jobs", "completions",
             "decision_seconds"]
            + [f"busy_gpu_seconds_{lab}" for lab in labels]
            + ["busy_node_seconds"]
        )
        for r in report.rounds:
            writer.writerow(
                [r.t, r.queue_len, len(r.placements),
                 ";".join(str(j) for j in r.completions),
                 f"{r.decision_seconds:.6f}"]
                + [f"{b:.3f}" for b in r.busy_gpu_seconds]
                + [f"{sum(r.busy_node_seconds):.3f}"]
            )
