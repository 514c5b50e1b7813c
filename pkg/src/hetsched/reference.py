"""Independent brute-force references for tiny instances.

These deliberately re-derive the documented behavior with different code
structure (mask enumeration instead of recursion, direct price calls instead
of tables) so they can serve as oracles for the memoized implementations.
They are exponential and must only be used on tiny inputs.
"""

from __future__ import annotations

import itertools
import math
from typing import Optional, Sequence

from .domain import ClusterSpec, JobSpec, JobState, SlotConfig
from .pricing import UtilityBounds, UtilityFn, price


def _reference_placement(
    state: JobState,
    free: dict[tuple[int, int], int],
    cluster: ClusterSpec,
    bounds: UtilityBounds,
    util: UtilityFn,
    slot: SlotConfig,
    t: int,
    comm_cost_factor: float,
) -> Optional[tuple[tuple[tuple[int, int], int], ...]]:
    """Re-derivation of the candidate-placement rules, returning
    (units, cost, mu) packed as (units_tuple, cost, mu) or None."""
    spec = state.spec
    W = spec.workers
    type_order = sorted(spec.runnable_types, key=lambda r: (-spec.throughput[r], r))

    per_node_free = {}
    for h in range(cluster.n_nodes):
        per_node_free[h] = sum(free[(h, r)] for r in type_order)
    if sum(per_node_free.values()) < W:
        return None

    raw_candidates = []

    # fewest-nodes candidate
    units = {}
    need = W
    for h in sorted(per_node_free, key=lambda h: (-per_node_free[h], h)):
        for r in type_order:
            if need == 0:
                break
            take = min(free[(h, r)], need)
            if take:
                units[(h, r)] = take
                need -= take
        if need == 0:
            break
    if need == 0:
        raw_candidates.append(units)

    # fastest-types-first candidate
    units = {}
    need = W
    for r, h in itertools.product(type_order, range(cluster.n_nodes)):
        if need == 0:
            break
        take = min(free[(h, r)], need)
        if take:
            units[(h, r)] = units.get((h, r), 0) + take
            need -= take
    if need == 0:
        raw_candidates.append(units)

    best = None
    for units in raw_candidates:
        cost = 0.0
        for (h, r), w in units.items():
            used = cluster.capacity(h, r) - free[(h, r)]
            cost += price(bounds, r, used, cluster.capacity(h, r)) * w
        nodes = {h for (h, _), w in units.items() if w}
        if len(nodes) > 1:
            cost += comm_cost_factor * cost * (len(nodes) - 1)
        rate = min(spec.throughput[r] for (_, r), w in units.items() if w)
        slots = int(math.ceil(
            state.remaining_iters / (rate * W * slot.slot_seconds)
        )) if state.remaining_iters > 0 else 0
        if t + slots > slot.horizon:  # cannot finish by the deadline
            continue
        mu = util(spec, max(1.0, (t + slots) - spec.arrival)) - cost
        if best is None or mu > best[2]:
            best = (tuple(sorted(units.items())), cost, mu)
    if best is None or best[2] <= 0:
        return None
    return best


def brute_force_round(
    queue: Sequence[JobState],
    cluster: ClusterSpec,
    bounds: UtilityBounds,
    util: UtilityFn,
    slot: SlotConfig,
    t: int,
    comm_cost_factor: float = 0.1,
):
    """Exhaustive select-or-skip enumeration over the whole queue.

    Walks every admission mask in most-significant-bit-first order, which
    reproduces the documented tie-break (prefer selecting the earlier job).
    Returns (selected ids, placements dict, total_cost, total_payoff).
    """
    ordered = sorted(queue, key=lambda s: (s.spec.arrival, s.spec.id))
    n = len(ordered)
    if n > 12:
        raise ValueError("brute_force_round is for tiny queues only")

    best = None  # (payoff, mask, cost, placements)
    for mask in range(2 ** n):
        free = {
            (h, r): cluster.capacity(h, r)
            for h in range(cluster.n_nodes)
            for r in range(cluster.n_types)
        }
        placements = {}
        mus = []
        costs = []
        feasible = True
        for i in range(n):
            if not (mask >> (n - 1 - i)) & 1:
                continue
            got = _reference_placement(
                ordered[i], free, cluster, bounds, util, slot, t,
                comm_cost_factor,
            )
            if got is None:
                feasible = False
                break
            units, cost, mu = got
            placements[ordered[i].spec.id] = units
            mus.append(mu)
            costs.append(cost)
            for (h, r), w in units:
                free[(h, r)] -= w
        if not feasible:
            continue
        # accumulate back-to-front so float rounding matches the recursion
        payoff = 0.0
        cost_total = 0.0
        for mu, c in zip(reversed(mus), reversed(costs)):
            payoff = mu + payoff
            cost_total = c + cost_total
        key = (payoff, mask)
        if best is None or key > (best[0], best[1]):
            best = (payoff, mask, cost_total, placements)

    payoff, mask, cost_total, placements = best
    selected = [
        ordered[i].spec.id for i in range(n) if (mask >> (n - 1 - i)) & 1
    ]
    return selected, placements, cost_total, payoff


# --------------------------------------------------------------------- #
# Second, independently-encoded offline optimum (forward value iteration).


def _all_gang_placements(job: JobSpec, free: tuple[int, ...],
                         cluster: ClusterSpec) -> list[tuple[int, ...]]:
    """Every feasible gang placement as a flat (h*R + r) count vector."""
    cells = [
        (h, r)
        for h in range(cluster.n_nodes)
        for r in range(cluster.n_types)
        if job.throughput[r] > 0
    ]
    R = cluster.n_types
    options = []
    ranges = [range(min(free[h * R + r], job.workers) + 1) for h, r in cells]
    for combo in itertools.product(*ranges):
        if sum(combo) != job.workers:
            continue
        vec = [0] * (cluster.n_nodes * R)
        for (h, r), w in zip(cells, combo):
            vec[h * R + r] = w
        options.append(tuple(vec))
    return options


def offline_opt_forward(
    trace: Sequence[JobSpec],
    cluster: ClusterSpec,
    slot: SlotConfig,
    horizon: int,
    util: UtilityFn,
) -> float:
    """Offline optimum by forward value iteration over remaining-work states.

    State: per-job remaining iterations; value: accumulated utility of jobs
    already finished.  Kept as a dict swept slot by slot.
    """
    R = cluster.n_types
    flat_caps = tuple(
        cluster.capacity(h, r)
        for h in range(cluster.n_nodes)
        for r in range(cluster.n_types)
    )
    jobs = sorted(trace, key=lambda j: j.id)
    init = tuple(round(j.total_iters, 9) for j in jobs)
    states: dict[tuple[float, ...], float] = {init: 0.0}

    for t in range(horizon):
        nxt: dict[tuple[float, ...], float] = {}

        def joint(i: int, rem: list[float], free: list[int], gained: float,
                  base: float) -> None:
            if i == len(jobs):
                key = tuple(round(x, 9) for x in rem)
                val = base + gained
                if val > nxt.get(key, -1.0):
                    nxt[key] = val
                return
            job = jobs[i]
            # always allowed: leave the job idle this slot
            joint(i + 1, rem, free, gained, base)
            if rem[i] <= 0 or t < job.arrival:
                return
            for vec in _all_gang_placements(job, tuple(free), cluster):
                if any(v > f for v, f in zip(vec, free)):
                    continue
                rate = min(
                    job.throughput[k % R] for k, v in enumerate(vec) if v
                )
                done = rate * job.workers * slot.slot_seconds
                new_rem = max(0.0, rem[i] - done)
                extra = 0.0
                if new_rem == 0.0:
                    extra = util(job, max(1.0, (t + 1) - job.arrival))
                rem[i], old = new_rem, rem[i]
                free2 = [f - v for f, v in zip(free, vec)]
                joint(i + 1, rem, free2, gained + extra, base)
                rem[i] = old

        for state, value in states.items():
            joint(0, list(state), list(flat_caps), 0.0, value)
        states = nxt

    return max(states.values()) if states else 0.0
