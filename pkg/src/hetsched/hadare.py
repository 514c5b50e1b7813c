"""Job forking on top of the price-based scheduler.

Each submitted job is split into n copies that train independently on
disjoint step ranges and are merged afterwards by a steps-weighted parameter
average.  Copies are ordinary jobs to the scheduler; a tracker maps copy
completions back to the parent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

from .domain import ClusterSpec, InvariantError, JobSpec, JobState, SlotConfig
from .pricing import UtilityFn


def divide_steps(total_steps: int, n: int) -> list[int]:
    """Split ``total_steps`` into n near-equal positive-or-zero integer parts
    (earlier copies take the remainder)."""
    if n < 1:
        raise InvariantError("need at least one copy")
    if total_steps < 0:
        raise InvariantError("negative step count")
    base, rem = divmod(total_steps, n)
    return [base + (1 if i < rem else 0) for i in range(n)]


def fork(job: JobSpec, n: int, max_job_count: int) -> list[JobSpec]:
    """The n copies of ``job``; copy i gets id max_job_count * (i+1) + job.id
    so copy ids never collide with original ids or with other parents' copies.
    """
    if max_job_count <= job.id:
        raise InvariantError("max_job_count must exceed every original job id")
    steps = divide_steps(int(round(job.total_iters)), n)
    copies = []
    for i, s in enumerate(steps):
        copies.append(
            replace(
                job,
                id=max_job_count * (i + 1) + job.id,
                epochs=1,
                iters_per_epoch=max(1, s),
                parent_id=job.id,
            )
        )
    return copies


@dataclass(frozen=True)
class ForkSet:
    """The copies one parent job was split into."""

    parent_id: int
    copy_ids: tuple[int, ...]
    steps: tuple[int, ...]  # steps assigned to each copy


@dataclass
class TrackerState:
    """Steps completed per copy for one parent; the parent is done when every
    copy is."""

    fork_set: ForkSet
    steps_done: dict[int, int] = field(default_factory=dict)
    finish_time: Optional[int] = None

    def record(self, copy_id: int, steps: int, t: int) -> None:
        if copy_id not in self.fork_set.copy_ids:
            raise InvariantError(f"copy {copy_id} not in fork set")
        self.steps_done[copy_id] = self.steps_done.get(copy_id, 0) + steps
        if self.complete and self.finish_time is None:
            self.finish_time = t

    @property
    def complete(self) -> bool:
        return all(
            self.steps_done.get(c, 0) >= s
            for c, s in zip(self.fork_set.copy_ids, self.fork_set.steps)
        )


def aggregate_and_consolidate(
    parameter_sets: Sequence[Sequence[float]], steps: Sequence[int]
) -> list[float]:
    """Merge copy parameter vectors by a steps-weighted average."""
    if len(parameter_sets) != len(steps) or not parameter_sets:
        raise InvariantError("one weight per parameter set required")
    total = sum(steps)
    if total <= 0:
        raise InvariantError("total steps must be positive")
    dim = len(parameter_sets[0])
    if any(len(p) != dim for p in parameter_sets):
        raise InvariantError("parameter sets must share a dimension")
    out = [0.0] * dim
    for params, s in zip(parameter_sets, steps):
        for k, v in enumerate(params):
            out[k] += v * (s / total)
    return out


@dataclass(frozen=True)
class ThroughputEstimate:
    """Offline throughput estimate for a model/GPU pair from hardware figures.

    ``pmi``: processed items per second of raw compute; ``batch_size`` items
    per iteration; ``pcie_gbps`` relative transfer speed; ``model_weight_gb``
    and ``dataset_gb`` scale the per-iteration data movement down.
    """

    pmi: float
    batch_size: float
    pcie_gbps: float
    model_weight_gb: float
    dataset_gb: float

    def iters_per_second(self) -> float:
        if min(self.pmi, self.batch_size, self.pcie_gbps) <= 0:
            raise InvariantError("pmi, batch size and pcie must be positive")
        if min(self.model_weight_gb, self.dataset_gb) <= 0:
            raise InvariantError("model weight and dataset size must be positive")
        return (self.pmi * self.batch_size * self.pcie_gbps) / (
            self.model_weight_gb * self.dataset_gb
        )


def estimate_throughput(pmi: float, batch_size: float, pcie_gbps: float,
                        model_weight_gb: float, dataset_gb: float) -> float:
    return ThroughputEstimate(
        pmi, batch_size, pcie_gbps, model_weight_gb, dataset_gb
    ).iters_per_second()


def cru(busy_node_seconds: float, rounds: int, n_nodes: int,
        slot_seconds: float) -> float:
    """Cluster utilization: busy node-seconds over available node-seconds."""
    if rounds < 1 or n_nodes < 1 or slot_seconds <= 0:
        raise InvariantError("rounds, nodes and slot length must be positive")
    return busy_node_seconds / (rounds * n_nodes * slot_seconds)


def run_forked_batch(
    job_steps: int | Sequence[int],
    n_copies: int,
    node_rates: Sequence[float],
    slot_seconds: float,
) -> tuple[int, float, float, list[int]]:
    """Closed-loop schedule of a job batch on dedicated single-GPU nodes.

    Jobs run one after another (no overlap between jobs).  Each job is
    forked into ``n_copies`` working copies, of which at most one per node
    runs concurrently on the fastest nodes; the job retires the moment the
    copies' aggregate completed steps reach the job's step target, so
    copies beyond the node count never shorten the schedule.

    Returns (rounds used, busy node-seconds, cluster utilization, copies
    running per round).
    """
    if isinstance(job_steps, int):
        job_steps = [job_steps]
    if n_copies < 1 or not node_rates or not job_steps:
        raise InvariantError("need at least one job, one copy and one node")
    if any(x <= 0 for x in node_rates):
        raise InvariantError("node rates must be positive")
    active = min(n_copies, len(node_rates))
    fastest = sorted(node_rates, reverse=True)[:active]
    rounds = 0
    busy = 0.0
    occupancy: list[int] = []
    for steps in job_steps:
        remaining = float(steps)
        while remaining > 0:
            rounds += 1
            occupancy.append(active)
            for rate in fastest:
                done = min(remaining, rate * slot_seconds)
                remaining -= done
                busy += done / rate
                if remaining <= 0:
                    break
    return rounds, busy, cru(busy, rounds, len(node_rates), slot_seconds), occupancy


# ------------------------------------------------------------------------- #


def fork_trace(trace: Sequence[JobSpec], n: int) -> tuple[list[JobSpec], dict[int, ForkSet]]:
    """Fork every job in the trace; returns the copy trace and the fork sets."""
    max_job_count = max(j.id for j in trace) + 1
    copies: list[JobSpec] = []
    sets: dict[int, ForkSet] = {}
    for job in trace:
        forked = fork(job, n, max_job_count)
        copies.extend(forked)
        sets[job.id] = ForkSet(
            parent_id=job.id,
            copy_ids=tuple(c.id for c in forked),
            steps=tuple(c.iters_per_epoch for c in forked),
        )
    return copies, sets


def run_hadare(
    trace: Sequence[JobSpec],
    cluster: ClusterSpec,
    config,
    util: Optional[UtilityFn] = None,
):
    """Run the price-based scheduler on the forked trace, then fold copy
    completions back into parent-level results."""
    from .simulator import SimReport, run

    copies, sets = fork_trace(trace, config.fork_count)
    inner = replace(config, policy="hadar")
    copy_report = run(copies, cluster, inner, util)

    final: dict[int, JobState] = {}
    jct: dict[int, int] = {}
    incomplete: list[int] = []
    for job in trace:
        fs = sets[job.id]
        copy_states = [copy_report.final_states[c] for c in fs.copy_ids]
        remaining = sum(s.remaining_iters for s in copy_states)
        finish = None
        if all(s.finish_time is not None for s in copy_states):
            finish = max(s.finish_time for s in copy_states)
            jct[job.id] = finish - job.arrival
        else:
            incomplete.append(job.id)
        final[job.id] = JobState(
            spec=job, remaining_iters=remaining, finish_time=finish
        )

    return SimReport(
        policy="hadare",
        slot=config.slot,
        cluster=cluster,
        rounds=copy_report.rounds,
        final_states=final,
        jct_slots=jct,
        incomplete=tuple(sorted(incomplete)),
    )
