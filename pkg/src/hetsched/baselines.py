"""Baseline round schedulers: FIFO with gang placement, a least-attained-
service policy with a two-queue promotion threshold, and a heterogeneity-
aware proxy that serves the least-progressed job on its best available type.

All three expose ``schedule_round(queue, t) -> AllocationMatrix`` over the
arrived, unfinished job states, like the price-based scheduler.
"""

from __future__ import annotations

from typing import Optional, Sequence

from .domain import AllocationMatrix, ClusterSpec, JobState, Placement


def _greedy_fill(
    workers: int,
    cells: Sequence[tuple[int, int]],
    free: dict[tuple[int, int], int],
) -> Optional[dict[tuple[int, int], int]]:
    """Take ``workers`` units walking ``cells`` in order; None if short."""
    units: dict[tuple[int, int], int] = {}
    need = workers
    for cell in cells:
        if need == 0:
            break
        take = min(free[cell], need)
        if take > 0:
            units[cell] = units.get(cell, 0) + take
            need -= take
    if need > 0:
        return None
    for cell, w in units.items():
        free[cell] -= w
    return units


def _cells_fastest_first(state: JobState, cluster: ClusterSpec) -> list[tuple[int, int]]:
    spec = state.spec
    order = sorted(spec.runnable_types, key=lambda r: (-spec.throughput[r], r))
    return [(h, r) for r in order for h in range(cluster.n_nodes)]


def _free_map(cluster: ClusterSpec) -> dict[tuple[int, int], int]:
    return {
        (h, r): cluster.capacity(h, r)
        for h in range(cluster.n_nodes)
        for r in range(cluster.n_types)
    }


class FifoGang:
    """Strict arrival-order admission with head-of-line blocking.

    Running jobs keep their placement until they finish; the queue head is
    admitted only if its full gang fits, and nothing behind it jumps ahead.
    """

    def __init__(self, cluster: ClusterSpec) -> None:
        self.cluster = cluster
        self._running: dict[int, dict[tuple[int, int], int]] = {}

    def schedule_round(self, queue: Sequence[JobState], t: int) -> AllocationMatrix:
        active = {s.spec.id for s in queue}
        self._running = {j: p for j, p in self._running.items() if j in active}

        free = _free_map(self.cluster)
        for placement in self._running.values():
            for cell, w in placement.items():
                free[cell] -= w

        placements: dict[int, Placement] = dict(self._running)
        for state in sorted(queue, key=lambda s: (s.spec.arrival, s.spec.id)):
            if state.spec.id in self._running:
                continue
            units = _greedy_fill(
                state.spec.workers, _cells_fastest_first(state, self.cluster), free
            )
            if units is None:
                break  # head-of-line blocking
            placements[state.spec.id] = units
            self._running[state.spec.id] = units
        return AllocationMatrix.from_placements(placements)


class TiresiasLike:
    """Preemptive least-attained-service scheduling with two queues.

    Attained service is counted in GPU-slots.  Jobs below the promotion
    threshold form the high-priority queue (FIFO by arrival); the rest are
    ordered by attained service.  Every round reassigns from scratch.
    Heterogeneity-unaware: GPUs are taken in plain (node, type) order,
    restricted to types the job can run on at all.
    """

    def __init__(self, cluster: ClusterSpec, threshold_gpu_slots: float = 8.0) -> None:
        self.cluster = cluster
        self.threshold = threshold_gpu_slots
        self._attained: dict[int, float] = {}

    def _priority(self, state: JobState) -> tuple:
        a = self._attained.get(state.spec.id, 0.0)
        demoted = a >= self.threshold
        if demoted:
            return (1, a, state.spec.arrival, state.spec.id)
        return (0, state.spec.arrival, state.spec.id, 0)

    def schedule_round(self, queue: Sequence[JobState], t: int) -> AllocationMatrix:
        free = _free_map(self.cluster)
        placements: dict[int, Placement] = {}
        for state in sorted(queue, key=self._priority):
            runnable = set(state.spec.runnable_types)
            cells = [
                (h, r)
                for h in range(self.cluster.n_nodes)
                for r in range(self.cluster.n_types)
                if r in runnable
            ]
            units = _greedy_fill(state.spec.workers, cells, free)
            if units is None:
                continue
            placements[state.spec.id] = units
            self._attained[state.spec.id] = (
                self._attained.get(state.spec.id, 0.0) + state.spec.workers
            )
        return AllocationMatrix.from_placements(placements)


class GavelProxy:
    """Job-level-heterogeneity proxy: every placement uses exactly one GPU
    type per round, so cross-type synchronization slowdown never occurs but
    jobs whose workers do not fit on a single type must wait.

    Jobs are served in arrival order; each is placed on its fastest type
    that still has a full gang's worth of free units, otherwise it is
    skipped this round (later jobs may still be served).
    """

    def __init__(self, cluster: ClusterSpec) -> None:
        self.cluster = cluster

    def schedule_round(self, queue: Sequence[JobState], t: int) -> AllocationMatrix:
        free = _free_map(self.cluster)
        placements: dict[int, Placement] = {}

        for state in sorted(
            queue, key=lambda s: (s.spec.arrival, s.spec.id)
        ):
            spec = state.spec
            order = sorted(
                spec.runnable_types, key=lambda r: (-spec.throughput[r], r)
            )
            units = None
            for r in order:
                cells = [(h, r) for h in range(self.cluster.n_nodes)]
                if sum(free[c] for c in cells) < spec.workers:
                    continue
                units = _greedy_fill(spec.workers, cells, free)
                break
            if units is not None:
                placements[spec.id] = units
        return AllocationMatrix.from_placements(placements)
