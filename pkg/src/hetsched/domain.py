"""Core value types for jobs, clusters, allocations, and round-based time.

All types are immutable after construction and all operations are pure
functions, so values can be shared freely between threads and simulations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional


class InvariantError(Exception):
    """Raised when an operation is applied to data violating a type invariant."""


class ConfigurationError(Exception):
    """Raised for inconsistent configuration (negative slot length, id clashes...)."""


@dataclass(frozen=True)
class GpuType:
    """One accelerator type, identified by a dense integer index."""

    id: int
    label: str


@dataclass(frozen=True)
class NodeSpec:
    """A cluster node with a per-GPU-type capacity vector."""

    id: int
    capacity: tuple[int, ...]  # indexed by GpuType.id

    def total(self) -> int:
        return sum(self.capacity)


@dataclass(frozen=True)
class ClusterSpec:
    """An ordered set of nodes sharing one GPU-type vocabulary."""

    gpu_types: tuple[GpuType, ...]
    nodes: tuple[NodeSpec, ...]

    def __post_init__(self) -> None:
        if not self.nodes:
            raise InvariantError("cluster must have at least one node")
        labels = [g.label for g in self.gpu_types]
        if len(set(labels)) != len(labels):
            raise InvariantError("GPU type labels must be unique")
        for i, g in enumerate(self.gpu_types):
            if g.id != i:
                raise InvariantError("GPU type ids must be dense 0..R-1")
        for node in self.nodes:
            if len(node.capacity) != len(self.gpu_types):
                raise InvariantError(
                    f"node {node.id} capacity vector length != number of GPU types"
                )
            if any(c < 0 for c in node.capacity):
                raise InvariantError(f"node {node.id} has negative capacity")
        if self.total_gpus() == 0:
            raise InvariantError("cluster has no GPUs at all")

    @property
    def n_types(self) -> int:
        return len(self.gpu_types)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def capacity(self, h: int, r: int) -> int:
        return self.nodes[h].capacity[r]

    def total_gpus(self) -> int:
        return sum(n.total() for n in self.nodes)

    def total_of_type(self, r: int) -> int:
        return sum(n.capacity[r] for n in self.nodes)


@dataclass(frozen=True)
class JobSpec:
    """Static description of a training job.

    ``throughput[r]`` is iterations/second when running on type-r GPUs;
    0 means the job cannot run on that type and it must never be allocated.
    """

    id: int
    arrival: int  # slot index
    workers: int
    epochs: int
    iters_per_epoch: int
    throughput: tuple[float, ...]
    parent_id: Optional[int] = None

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise InvariantError(f"job {self.id}: workers must be >= 1")
        if self.epochs < 1 or self.iters_per_epoch < 1:
            raise InvariantError(f"job {self.id}: epochs and iters/epoch must be >= 1")
        if any(x < 0 for x in self.throughput):
            raise InvariantError(f"job {self.id}: negative throughput")

    @property
    def total_iters(self) -> float:
        return float(self.epochs * self.iters_per_epoch)

    @property
    def runnable_types(self) -> tuple[int, ...]:
        return tuple(r for r, x in enumerate(self.throughput) if x > 0)


# Placement maps (node, type) -> worker count for one job in one round.
Placement = Mapping[tuple[int, int], int]


@dataclass(frozen=True)
class AllocationMatrix:
    """Per-round assignment w[(j, h, r)] of type-r GPUs on node h to job j."""

    entries: Mapping[tuple[int, int, int], int] = field(default_factory=dict)

    @staticmethod
    def from_placements(placements: Mapping[int, Placement]) -> "AllocationMatrix":
        entries = {}
        for j, placement in placements.items():
            for (h, r), w in placement.items():
                if w > 0:
                    entries[(j, h, r)] = w
        return AllocationMatrix(entries)

    def placement(self, j: int) -> dict[tuple[int, int], int]:
        return {
            (h, r): w for (jj, h, r), w in self.entries.items() if jj == j and w > 0
        }

    def workers_for(self, j: int) -> int:
        return sum(w for (jj, _, _), w in self.entries.items() if jj == j)

    def types_used(self, j: int) -> set[int]:
        return {r for (jj, _, r), w in self.entries.items() if jj == j and w > 0}

    def nodes_used(self, j: int) -> set[int]:
        return {h for (jj, h, _), w in self.entries.items() if jj == j and w > 0}

    def jobs(self) -> set[int]:
        return {j for (j, _, _), w in self.entries.items() if w > 0}

    def used(self, h: int, r: int) -> int:
        return sum(w for (_, hh, rr), w in self.entries.items() if hh == h and rr == r)

    def is_empty(self) -> bool:
        return not any(w > 0 for w in self.entries.values())


@dataclass(frozen=True)
class JobState:
    """Dynamic progress of a job across rounds."""

    spec: JobSpec
    remaining_iters: float
    finish_time: Optional[int] = None  # slot-boundary time, set when remaining hits 0
    last_placement: Optional[tuple[tuple[tuple[int, int], int], ...]] = None
    restart_penalty_pending: float = 0.0  # seconds lost at next allocated round

    @staticmethod
    def fresh(spec: JobSpec) -> "JobState":
        return JobState(spec=spec, remaining_iters=spec.total_iters)

    @property
    def finished(self) -> bool:
        return self.remaining_iters <= 0.0

    def placement_key(self) -> Optional[tuple[tuple[tuple[int, int], int], ...]]:
        return self.last_placement


@dataclass(frozen=True)
class SlotConfig:
    """Round length in seconds and the simulation horizon in slots."""

    slot_seconds: float = 360.0
    horizon: int = 10_000

    def __post_init__(self) -> None:
        if self.slot_seconds <= 0:
            raise ConfigurationError("slot_seconds must be positive")
        if self.horizon < 1:
            raise ConfigurationError("horizon must be >= 1")


@dataclass(frozen=True)
class Violation:
    """One broken scheduling constraint, identified by name and offender."""

    constraint: str  # "capacity" | "gang" | "before-arrival" | "unrunnable-type"
    job: Optional[int]
    node: Optional[int]
    gpu_type: Optional[int]
    detail: str


def bottleneck_throughput(job: JobSpec, alloc: AllocationMatrix | Placement) -> float:
    """Iterations/second for ``job`` under ``alloc``: the min throughput across
    allocated GPU types (synchronization makes the slowest device govern).

    Returns 0 for an empty allocation. Raises if a type the job cannot run on
    was allocated.
    """
    if isinstance(alloc, AllocationMatrix):
        types = alloc.types_used(job.id)
    else:
        types = {r for (_, r), w in alloc.items() if w > 0}
    if not types:
        return 0.0
    rates = []
    for r in types:
        if r >= len(job.throughput) or job.throughput[r] <= 0:
            raise InvariantError(
                f"job {job.id} allocated GPU type {r} it cannot run on"
            )
        rates.append(job.throughput[r])
    return min(rates)


def apply_round_progress(
    state: JobState,
    alloc: AllocationMatrix,
    slot: SlotConfig,
    t: int,
) -> JobState:
    """Advance one round: decrement remaining iterations by rate * workers *
    effective slot seconds, consuming any pending restart penalty.

    The job finishes the instant remaining hits 0; resources are still held
    for the full slot. ``finish_time`` is the slot-boundary time t+1.
    """
    placement = alloc.placement(state.spec.id)
    if not placement:
        return state
    x = bottleneck_throughput(state.spec, placement)
    workers = sum(placement.values())
    effective = slot.slot_seconds - state.restart_penalty_pending
    if effective < 0:
        raise ConfigurationError(
            f"restart penalty {state.restart_penalty_pending}s exceeds slot length"
        )
    progress = x * workers * effective
    remaining = max(0.0, state.remaining_iters - progress)
    return replace(
        state,
        remaining_iters=remaining,
        finish_time=(t + 1) if remaining == 0.0 else None,
        last_placement=tuple(sorted(placement.items())),
        restart_penalty_pending=0.0,
    )


def validate(
    alloc: AllocationMatrix,
    cluster: ClusterSpec,
    jobs: Iterable[JobSpec],
    t: int,
) -> list[Violation]:
    """Check the gang (all-or-nothing) and per-node capacity constraints.

    Returns an empty list iff the allocation is feasible; violations are data,
    not exceptions.
    """
    violations: list[Violation] = []
    by_job = {j.id: j for j in jobs}

    for (j, h, r), w in alloc.entries.items():
        if w < 0:
            violations.append(
                Violation("capacity", j, h, r, f"negative worker count {w}")
            )
        if h >= cluster.n_nodes or r >= cluster.n_types:
            violations.append(
                Violation("capacity", j, h, r, "allocation outside cluster shape")
            )

    for h in range(cluster.n_nodes):
        for r in range(cluster.n_types):
            used = alloc.used(h, r)
            cap = cluster.capacity(h, r)
            if used > cap:
                violations.append(
                    Violation(
                        "capacity", None, h, r,
                        f"{used} workers on node {h} type {r} exceeds capacity {cap}",
                    )
                )

    for j in alloc.jobs():
        spec = by_job.get(j)
        if spec is None:
            violations.append(Violation("gang", j, None, None, "unknown job id"))
            continue
        total = alloc.workers_for(j)
        if total not in (0, spec.workers):
            violations.append(
                Violation(
                    "gang", j, None, None,
                    f"job {j} got {total} workers, demand is {spec.workers}",
                )
            )
        if t < spec.arrival:
            violations.append(
                Violation(
                    "before-arrival", j, None, None,
                    f"job {j} allocated at slot {t} before arrival {spec.arrival}",
                )
            )
        for r in alloc.types_used(j):
            if r >= len(spec.throughput) or spec.throughput[r] <= 0:
                violations.append(
                    Violation(
                        "unrunnable-type", j, None, r,
                        f"job {j} cannot run on GPU type {r}",
                    )
                )
    return violations


def estimate_slots_to_finish(remaining_iters: float, rate: float, workers: int,
                             slot_seconds: float) -> int:
    """Optimistic number of slots to finish at a constant allocation."""
    if remaining_iters <= 0:
        return 0
    if rate <= 0 or workers <= 0:
        raise ConfigurationError("cannot estimate finish with zero throughput")
    return int(math.ceil(remaining_iters / (rate * workers * slot_seconds)))
