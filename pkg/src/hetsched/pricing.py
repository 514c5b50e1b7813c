"""Dual-price bookkeeping: utility bounds, the exponential marginal price
function, job payoff, and the competitive-ratio constant.

All durations are in slot units; a duration below one slot is clamped to one
slot so the effective-throughput utility stays finite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from .domain import ClusterSpec, InvariantError, JobSpec, SlotConfig


class UnschedulableJobError(Exception):
    """A job has no GPU type it can run on, so no price bounds exist for it."""


# A utility function maps (job, duration in slots) to a non-negative utility,
# non-increasing in the duration.
UtilityFn = Callable[[JobSpec, float], float]


def effective_throughput_utility(slot: SlotConfig) -> UtilityFn:
    """Average iterations/second over the job lifetime: total work divided by
    the completion duration in seconds."""

    def utility(job: JobSpec, duration_slots: float) -> float:
        d = max(1.0, duration_slots)
        return job.total_iters / (d * slot.slot_seconds)

    return utility


@dataclass(frozen=True)
class UtilityBounds:
    """Per-type price band [u_min, u_max] plus the per-job extreme completion
    times (in slots) and the scaling factor used to set the band floor."""

    u_max: tuple[float, ...]  # per GPU type
    u_min: tuple[float, ...]
    t_min: dict[int, float] = field(default_factory=dict)  # job id -> slots
    t_max: dict[int, float] = field(default_factory=dict)
    eta: float = 1.0

    def __post_init__(self) -> None:
        if self.eta <= 0:
            raise InvariantError("eta must be positive")
        for r, (lo, hi) in enumerate(zip(self.u_min, self.u_max)):
            if hi > 0 and not (hi >= lo > 0):
                raise InvariantError(
                    f"type {r}: need u_max >= u_min > 0, got [{lo}, {hi}]"
                )


def compute_bounds(
    jobs: Sequence[JobSpec],
    cluster: ClusterSpec,
    util: UtilityFn,
    slot: SlotConfig,
) -> UtilityBounds:
    """Derive the price band for every GPU type from the workload.

    For each job, the fastest (slowest) completion time assumes all workers
    run on its best (worst) runnable type.  The per-unit utility ceiling for
    type r is the best utility-at-fastest-finish per demanded worker among
    jobs runnable on r; the floor is the worst utility-at-horizon per
    (worker x runnable-type x slowest-time) unit, scaled down by 4*eta.
    """
    if not jobs:
        raise UnschedulableJobError("cannot compute bounds for an empty workload")
    R = cluster.n_types
    T = float(slot.horizon)
    total_caps = float(cluster.total_gpus())

    t_min: dict[int, float] = {}
    t_max: dict[int, float] = {}
    demand: dict[int, float] = {}  # job id -> t_max * workers * #runnable types
    for job in jobs:
        runnable = job.runnable_types
        if not runnable:
            raise UnschedulableJobError(f"job {job.id} has zero throughput everywhere")
        best = max(job.throughput[r] for r in runnable)
        worst = min(job.throughput[r] for r in runnable)
        t_min[job.id] = max(1.0, job.total_iters / (job.workers * best) / slot.slot_seconds)
        t_max[job.id] = max(1.0, job.total_iters / (job.workers * worst) / slot.slot_seconds)
        demand[job.id] = t_max[job.id] * job.workers * len(runnable)

    # Scaling factor: smallest value keeping the initial dual objective below
    # a quarter of any job's per-demand utility floor, horizon included.
    eta = T * total_caps / min(demand.values())

    floor = min(
        util(job, max(1.0, T - job.arrival)) / demand[job.id] for job in jobs
    ) / (4.0 * eta)

    u_max = []
    u_min = []
    for r in range(R):
        runnable_jobs = [j for j in jobs if r in j.runnable_types]
        if not runnable_jobs or cluster.total_of_type(r) == 0:
            u_max.append(0.0)
            u_min.append(0.0)
            continue
        ceiling = max(
            util(j, max(1.0, t_min[j.id] - j.arrival)) / j.workers
            for j in runnable_jobs
        )
        u_max.append(ceiling)
        u_min.append(floor)
    return UtilityBounds(
        u_max=tuple(u_max), u_min=tuple(u_min), t_min=t_min, t_max=t_max, eta=eta
    )


def price(bounds: UtilityBounds, r: int, used: int, capacity: int) -> float:
    """Marginal unit price for type-r GPUs at the given usage level.

    Rises exponentially from u_min (empty) to u_max (full), so early
    admissions are cheap and a full server prices everyone else out.
    """
    if capacity <= 0:
        raise InvariantError(f"type {r} absent (capacity 0), price undefined")
    if not 0 <= used <= capacity:
        raise InvariantError(f"usage {used} outside [0, {capacity}]")
    lo, hi = bounds.u_min[r], bounds.u_max[r]
    if lo <= 0:
        raise InvariantError(f"type {r} has no runnable jobs, price undefined")
    return lo * (hi / lo) ** (used / capacity)


class PriceState:
    """Per-(node, type) usage counters driving the marginal prices.

    Single-writer: mutated only by the scheduler inside a round.
    """

    def __init__(self, cluster: ClusterSpec, bounds: UtilityBounds) -> None:
        self.cluster = cluster
        self.bounds = bounds
        self.used: dict[tuple[int, int], int] = {
            (h, r): 0
            for h in range(cluster.n_nodes)
            for r in range(cluster.n_types)
        }

    def price(self, h: int, r: int) -> float:
        return price(self.bounds, r, self.used[(h, r)], self.cluster.capacity(h, r))

    def charge(self, h: int, r: int, workers: int) -> None:
        new = self.used[(h, r)] + workers
        if new > self.cluster.capacity(h, r):
            raise InvariantError(f"over-allocating ({h},{r})")
        self.used[(h, r)] = new

    def release_all(self) -> None:
        for key in self.used:
            self.used[key] = 0


def payoff(
    job: JobSpec,
    schedule_cost: float,
    est_finish: float,
    util: UtilityFn,
) -> float:
    """Job utility at the estimated finish minus the priced resource cost.

    The caller admits the job iff the result is positive.
    """
    if est_finish < job.arrival:
        raise InvariantError("estimated finish before arrival")
    return util(job, est_finish - job.arrival) - schedule_cost


def alpha(bounds: UtilityBounds) -> float:
    """Competitive-ratio constant: max over types of max(1, ln(u_max/u_min))."""
    best = 1.0
    for lo, hi in zip(bounds.u_min, bounds.u_max):
        if lo > 0 and hi > 0:
            best = max(best, math.log(hi / lo))
    return best


def initial_dual_value(bounds: UtilityBounds, cluster: ClusterSpec,
                       slot: SlotConfig) -> float:
    """Dual objective at zero allocation: horizon * sum of floor prices * caps."""
    per_round = sum(
        bounds.u_min[r] * cluster.capacity(h, r)
        for h in range(cluster.n_nodes)
        for r in range(cluster.n_types)
        if bounds.u_min[r] > 0
    )
    return slot.horizon * per_round
