"""Price-guided round scheduler: placement candidates, the select-or-skip
recursion, and equivalence with the brute-force reference on tiny queues."""

import random

import pytest

from hetsched.domain import JobState, SlotConfig
from hetsched.hadar import HadarScheduler, estimate_finish
from hetsched.pricing import compute_bounds, effective_throughput_utility
from hetsched.reference import brute_force_round
from hetsched.workload import demo_cluster, demo_jobs

from helpers import random_tiny_cluster, random_tiny_jobs, tiny_slot


def make_scheduler(cluster, jobs, slot, **kwargs) -> HadarScheduler:
    util = effective_throughput_utility(slot)
    bounds = compute_bounds(jobs, cluster, util, slot)
    return HadarScheduler(cluster, bounds, util, slot, **kwargs)


def fresh_queue(jobs):
    return [JobState.fresh(j) for j in jobs]


class TestFindAlloc:
    def test_gang_size_respected(self):
        cluster = demo_cluster()
        jobs = demo_jobs(iters_per_epoch=500)
        slot = SlotConfig(slot_seconds=360.0, horizon=50)
        sched = make_scheduler(cluster, jobs, slot)
        free = tuple(
            cluster.capacity(h, r)
            for h in range(cluster.n_nodes)
            for r in range(cluster.n_types)
        )
        for state in fresh_queue(jobs):
            cand = sched.find_alloc(state, free, 0)
            assert cand is not None
            assert sum(w for _, w in cand.units) == state.spec.workers

    def test_never_uses_unrunnable_type(self):
        rng = random.Random(5)
        for _ in range(50):
            cluster = random_tiny_cluster(rng)
            jobs = random_tiny_jobs(rng, cluster)
            slot = tiny_slot(rng)
            sched = make_scheduler(cluster, jobs, slot)
            free = tuple(sched._caps)
            for state in fresh_queue(jobs):
                cand = sched.find_alloc(state, free, 0)
                if cand is None:
                    continue
                for (h, r), w in cand.units:
                    assert state.spec.throughput[r] > 0
                    assert w <= cluster.capacity(h, r)

    def test_infeasible_when_capacity_short(self):
        cluster = demo_cluster()
        jobs = demo_jobs(iters_per_epoch=500)
        slot = SlotConfig(slot_seconds=360.0, horizon=50)
        sched = make_scheduler(cluster, jobs, slot)
        empty = tuple(0 for _ in sched._caps)
        assert sched.find_alloc(fresh_queue(jobs)[0], empty, 0) is None

    def test_positive_payoff_required(self):
        cluster = demo_cluster()
        jobs = demo_jobs(iters_per_epoch=500)
        slot = SlotConfig(slot_seconds=360.0, horizon=50)
        sched = make_scheduler(cluster, jobs, slot)
        free = tuple(sched._caps)
        cand = sched.find_alloc(fresh_queue(jobs)[0], free, 0)
        assert cand is not None and cand.mu > 0


class TestEstimateFinish:
    def test_bottleneck_rate_governs(self):
        cluster = demo_cluster()
        jobs = demo_jobs(iters_per_epoch=500)
        slot = SlotConfig(slot_seconds=360.0, horizon=50)
        state = fresh_queue(jobs)[0]  # X = (40, 20, 30), W = 3
        placement = {(0, 0): 2, (2, 2): 1}  # mixes types 0 and 2 -> rate 30
        t = 2
        expected = t + -(-state.remaining_iters // (30.0 * 3 * 360.0))
        assert estimate_finish(state, placement, slot, t) == expected

    def test_finished_job_finishes_now(self):
        cluster = demo_cluster()
        jobs = demo_jobs()
        slot = SlotConfig()
        state = JobState(spec=jobs[0], remaining_iters=0.0)
        assert estimate_finish(state, {(0, 0): 3}, slot, 7) == 7


class TestScheduleRound:
    def test_round_respects_capacity_and_gangs(self):
        rng = random.Random(11)
        for _ in range(100):
            cluster = random_tiny_cluster(rng)
            jobs = random_tiny_jobs(rng, cluster)
            slot = tiny_slot(rng)
            sched = make_scheduler(cluster, jobs, slot)
            decision = sched.schedule_round(fresh_queue(jobs), 0)
            used = {}
            by_id = {j.id: j for j in jobs}
            for j, cand in decision.selections:
                assert cand.mu > 0
                assert sum(w for _, w in cand.units) == by_id[j].workers
                for (h, r), w in cand.units:
                    used[(h, r)] = used.get((h, r), 0) + w
            for (h, r), w in used.items():
                assert w <= cluster.capacity(h, r)

    def test_deterministic(self):
        cluster = demo_cluster()
        jobs = demo_jobs(iters_per_epoch=500)
        slot = SlotConfig(slot_seconds=360.0, horizon=50)
        a = make_scheduler(cluster, jobs, slot).schedule_round(fresh_queue(jobs), 0)
        b = make_scheduler(cluster, jobs, slot).schedule_round(fresh_queue(jobs), 0)
        assert a == b

    def test_chunked_equals_exact_when_chunk_covers_queue(self):
        cluster = demo_cluster()
        jobs = demo_jobs(iters_per_epoch=500)
        slot = SlotConfig(slot_seconds=360.0, horizon=50)
        wide = make_scheduler(cluster, jobs, slot, dp_window=16)
        narrow = make_scheduler(cluster, jobs, slot, dp_window=3)
        assert (wide.schedule_round(fresh_queue(jobs), 0)
                == narrow.schedule_round(fresh_queue(jobs), 0))

    def test_matches_brute_force_on_random_tiny_instances(self):
        rng = random.Random(7)
        mismatches = 0
        for _ in range(60):
            cluster = random_tiny_cluster(rng)
            jobs = random_tiny_jobs(rng, cluster)
            slot = tiny_slot(rng)
            util = effective_throughput_utility(slot)
            bounds = compute_bounds(jobs, cluster, util, slot)
            sched = HadarScheduler(cluster, bounds, util, slot)
            queue = fresh_queue(jobs)
            t = rng.randint(0, 2)
            decision = sched.schedule_round(queue, t)
            sel, placements, cost, payoff = brute_force_round(
                queue, cluster, bounds, util, slot, t
            )
            if (sorted(decision.job_ids()) != sorted(sel)
                    or decision.total_cost != cost
                    or decision.total_payoff != payoff):
                mismatches += 1
        assert mismatches == 0

    def test_counters_advance(self):
        cluster = demo_cluster()
        jobs = demo_jobs(iters_per_epoch=500)
        slot = SlotConfig(slot_seconds=360.0, horizon=50)
        sched = make_scheduler(cluster, jobs, slot)
        sched.schedule_round(fresh_queue(jobs), 0)
        assert sched.dp_calls > 0
        assert sched.find_alloc_calls >= sched.dp_calls


class TestDemoFixture:
    def test_first_round_admits_all_three_jobs(self):
        cluster = demo_cluster()
        jobs = demo_jobs(iters_per_epoch=500)
        slot = SlotConfig(slot_seconds=360.0, horizon=100)
        sched = make_scheduler(cluster, jobs, slot)
        decision = sched.schedule_round(fresh_queue(jobs), 0)
        # 6 GPUs, gangs of 3+2+2 = 7: at most two jobs can coexist
        assert 1 <= len(decision.selections) <= 2
        alloc = decision.to_allocation()
        assert not alloc.is_empty()
