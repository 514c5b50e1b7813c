"""Round scheduler built on dual prices: a memoized select-or-skip recursion
over the job queue, with a placement builder producing consolidated and
spread candidates priced at the current marginal prices.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .domain import (
    AllocationMatrix,
    ClusterSpec,
    ConfigurationError,
    JobState,
    SlotConfig,
    estimate_slots_to_finish,
)
from .pricing import UtilityBounds, UtilityFn, price


PlacementTuple = tuple[tuple[tuple[int, int], int], ...]  # sorted ((h, r), w)


@dataclass(frozen=True)
class CandidatePlacement:
    """One gang placement for a single job, priced for this round."""

    units: PlacementTuple
    cost: float  # price cost, communication surcharge included
    mu: float  # payoff at the estimated finish
    consolidated: bool

    def nodes_used(self) -> set[int]:
        return {h for (h, _), w in self.units if w > 0}


@dataclass(frozen=True)
class DpDecision:
    """The jobs selected this round with their placements and totals."""

    selections: tuple[tuple[int, CandidatePlacement], ...] = ()
    total_cost: float = 0.0
    total_payoff: float = 0.0

    def job_ids(self) -> list[int]:
        return [j for j, _ in self.selections]

    def to_allocation(self) -> AllocationMatrix:
        return AllocationMatrix.from_placements(
            {j: dict(c.units) for j, c in self.selections}
        )


_EMPTY = DpDecision()


def estimate_finish(state: JobState, placement: PlacementTuple | dict,
                    slot: SlotConfig, t: int) -> int:
    """Slot-boundary finish time assuming the placement persists (optimistic)."""
    units = dict(placement)
    if state.remaining_iters <= 0:
        return t
    types = {r for (_, r), w in units.items() if w > 0}
    rates = [state.spec.throughput[r] for r in types]
    if not rates or min(rates) <= 0:
        raise ConfigurationError("cannot estimate finish for zero-throughput placement")
    workers = sum(units.values())
    return t + estimate_slots_to_finish(
        state.remaining_iters, min(rates), workers, slot.slot_seconds
    )


class HadarScheduler:
    """Price-guided round scheduler.

    One round runs single-threaded and deterministically: usage counters are
    released at round start (preempted jobs are re-queued and re-admitted),
    then the select-or-skip recursion maximizes the total payoff of the
    admitted set under the current prices, memoized on (queue index, free
    capacity vector).  Ties prefer admission.
    """

    def __init__(
        self,
        cluster: ClusterSpec,
        bounds: UtilityBounds,
        util: UtilityFn,
        slot: SlotConfig,
        comm_cost_factor: float = 0.1,
        dp_window: int = 16,
    ) -> None:
        if dp_window < 1:
            raise ConfigurationError("dp_window must be >= 1")
        self.cluster = cluster
        self.bounds = bounds
        self.util = util
        self.slot = slot
        self.comm_cost_factor = comm_cost_factor
        self.dp_window = dp_window
        self._hr = [
            (h, r)
            for h in range(cluster.n_nodes)
            for r in range(cluster.n_types)
        ]
        self._caps = tuple(cluster.capacity(h, r) for h, r in self._hr)
        # Marginal price at every integer usage level, fixed for the run.
        self._price_table: list[list[float]] = []
        for (h, r), cap in zip(self._hr, self._caps):
            if cap == 0 or bounds.u_min[r] <= 0:
                self._price_table.append([])
            else:
                self._price_table.append(
                    [price(bounds, r, g, cap) for g in range(cap + 1)]
                )
        # Per-job descending-throughput type order, computed once per job.
        self._type_order: dict[int, tuple[int, ...]] = {}
        # (type order, gang size, free vector) -> priced raw placements.
        self._placement_cache: dict[tuple, tuple] = {}
        # instrumentation
        self.dp_calls = 0
        self.find_alloc_calls = 0

    # ------------------------------------------------------------------ #

    def _types_for(self, state: JobState) -> tuple[int, ...]:
        order = self._type_order.get(state.spec.id)
        if order is None:
            order = tuple(
                sorted(
                    state.spec.runnable_types,
                    key=lambda r: (-state.spec.throughput[r], r),
                )
            )
            self._type_order[state.spec.id] = order
        return order

    def _unit_cost(self, slot_index: int, free_here: int) -> float:
        used = self._caps[slot_index] - free_here
        return self._price_table[slot_index][used]

    def find_alloc(
        self, state: JobState, free: tuple[int, ...], t: int
    ) -> Optional[CandidatePlacement]:
        """Best placement for one job at the current free capacities.

        Builds a consolidated candidate (fewest nodes, filling each node with
        the job's fastest types first) and a spread candidate (fastest types
        first across all nodes); prices both, adds the communication
        surcharge to multi-node placements, and returns the higher-payoff one
        iff that payoff is positive.  Ties keep the consolidated candidate.
        """
        self.find_alloc_calls += 1
        spec = state.spec
        W = spec.workers
        type_order = self._types_for(state)

        # The raw placements depend only on (type order, gang size, free
        # vector), so they are shared across jobs and DP states.
        cache_key = (type_order, W, free)
        candidates = self._placement_cache.get(cache_key)
        if candidates is None:
            candidates = self._build_candidates(type_order, W, free)
            self._placement_cache[cache_key] = candidates

        best: Optional[CandidatePlacement] = None
        for key, cost, used_types, consolidated in candidates:
            min_rate = min(spec.throughput[r] for r in used_types)
            slots = estimate_slots_to_finish(
                state.remaining_iters, min_rate, W, self.slot.slot_seconds
            )
            # a job that cannot finish by the horizon earns no utility
            if t + slots > self.slot.horizon:
                continue
            mu = self.util(spec, max(1.0, (t + slots) - spec.arrival)) - cost
            if best is None or mu > best.mu:
                best = CandidatePlacement(key, cost, mu, consolidated)
        if best is None or best.mu <= 0:
            return None
        return best

    def _build_candidates(
        self, type_order: tuple[int, ...], W: int, free: tuple[int, ...]
    ) -> tuple:
        """Priced consolidated/spread placements for one gang size at one
        free-capacity vector: tuples (units, cost, min throughput, flag)."""
        R = self.cluster.n_types
        H = self.cluster.n_nodes

        def idx(h: int, r: int) -> int:
            return h * R + r

        free_runnable = [
            sum(free[idx(h, r)] for r in type_order) for h in range(H)
        ]
        if sum(free_runnable) < W:
            return ()

        candidates = []

        # Consolidated: nodes by descending usable capacity, fill each fully.
        node_order = sorted(range(H), key=lambda h: (-free_runnable[h], h))
        units: dict[tuple[int, int], int] = {}
        need = W
        for h in node_order:
            if need == 0:
                break
            for r in type_order:
                take = min(free[idx(h, r)], need)
                if take > 0:
                    units[(h, r)] = take
                    need -= take
                if need == 0:
                    break
        if need == 0:
            candidates.append((units, True))

        # Spread: fastest types first, walking nodes in id order.
        units2: dict[tuple[int, int], int] = {}
        need = W
        for r in type_order:
            for h in range(H):
                take = min(free[idx(h, r)], need)
                if take > 0:
                    units2[(h, r)] = units2.get((h, r), 0) + take
                    need -= take
                if need == 0:
                    break
            if need == 0:
                break
        if need == 0:
            candidates.append((units2, False))

        out = []
        for units, consolidated in candidates:
            cost = sum(
                self._unit_cost(idx(h, r), free[idx(h, r)]) * w
                for (h, r), w in units.items()
            )
            nodes = {h for (h, _), w in units.items() if w > 0}
            if len(nodes) > 1:
                cost += self.comm_cost_factor * cost * (len(nodes) - 1)
            key = tuple(sorted(units.items()))
            used_types = tuple(sorted({r for (_, r), w in units.items() if w > 0}))
            out.append((key, cost, used_types, consolidated))
        return tuple(out)

    # ------------------------------------------------------------------ #

    def schedule_round(self, queue: Sequence[JobState], t: int) -> DpDecision:
        """Admit and place a subset of the queued jobs for round t.

        The queue must contain only arrived, unfinished jobs; it is processed
        in (arrival, id) order so runs are deterministic.  Queues up to
        ``dp_window`` jobs are solved exactly; longer queues are solved as a
        sequence of exact window-sized chunks, each priced at the capacity the
        earlier chunks left free (an admission window: the select-or-skip
        trade-off is only explored within a chunk).
        """
        ordered = sorted(queue, key=lambda s: (s.spec.arrival, s.spec.id))
        if len(ordered) <= self.dp_window:
            return self._solve_chunk(ordered, tuple(self._caps), t)

        selections: tuple = ()
        total_cost = 0.0
        total_payoff = 0.0
        free = list(self._caps)
        R = self.cluster.n_types
        for lo in range(0, len(ordered), self.dp_window):
            chunk = ordered[lo:lo + self.dp_window]
            if sum(free) < min(s.spec.workers for s in chunk):
                continue
            decision = self._solve_chunk(chunk, tuple(free), t)
            if not decision.selections:
                continue
            selections += decision.selections
            total_cost += decision.total_cost
            total_payoff += decision.total_payoff
            for _, cand in decision.selections:
                for (h, r), w in cand.units:
                    free[h * R + r] -= w
        return DpDecision(
            selections=selections,
            total_cost=total_cost,
            total_payoff=total_payoff,
        )

    def _solve_chunk(
        self, ordered: Sequence[JobState], free0: tuple[int, ...], t: int
    ) -> DpDecision:
        """Exact select-or-skip recursion over one arrival-ordered chunk."""
        memo: dict[tuple[int, tuple[int, ...]], DpDecision] = {}
        n = len(ordered)
        if sys.getrecursionlimit() < 2 * n + 100:
            sys.setrecursionlimit(2 * n + 1000)
        # Smallest gang size in the queue suffix: lets the recursion stop as
        # soon as no remaining job could possibly fit.
        min_suffix = [0] * (n + 1)
        min_suffix[n] = 1 << 30
        for i in range(n - 1, -1, -1):
            min_suffix[i] = min(min_suffix[i + 1], ordered[i].spec.workers)

        def dp(i: int, free: tuple[int, ...]) -> DpDecision:
            if i >= n or sum(free) < min_suffix[i]:
                return _EMPTY
            entry_key = (i, free)
            hit = memo.get(entry_key)
            if hit is not None:
                return hit
            # Jobs with no feasible positive-payoff placement contribute
            # nothing; hop over them without spawning per-index states.
            cand = None
            while i < n and sum(free) >= min_suffix[i]:
                self.dp_calls += 1
                cand = self.find_alloc(ordered[i], free, t)
                if cand is not None:
                    break
                i += 1
            if cand is None:
                memo[entry_key] = _EMPTY
                return _EMPTY
            state = ordered[i]
            skipped = dp(i + 1, free)
            free_after = list(free)
            for (h, r), w in cand.units:
                free_after[h * self.cluster.n_types + r] -= w
            rest = dp(i + 1, tuple(free_after))
            select_payoff = cand.mu + rest.total_payoff
            # ties prefer admission: it raises utilization
            if select_payoff >= skipped.total_payoff:
                result = DpDecision(
                    selections=((state.spec.id, cand),) + rest.selections,
                    total_cost=cand.cost + rest.total_cost,
                    total_payoff=select_payoff,
                )
            else:
                result = skipped
            memo[entry_key] = result
            if i != entry_key[0]:
                memo[(i, free)] = result
            return result

        return dp(0, free0)
