"""Core value types: invariants, progress accounting, validation."""

import math

import pytest

from hetsched.domain import (
    AllocationMatrix,
    ClusterSpec,
    ConfigurationError,
    GpuType,
    InvariantError,
    JobSpec,
    JobState,
    NodeSpec,
    SlotConfig,
    apply_round_progress,
    bottleneck_throughput,
    estimate_slots_to_finish,
    validate,
)


def small_cluster() -> ClusterSpec:
    return ClusterSpec(
        gpu_types=(GpuType(0, "a"), GpuType(1, "b")),
        nodes=(NodeSpec(0, (2, 1)), NodeSpec(1, (0, 2))),
    )


def job(jid=1, workers=2, throughput=(2.0, 1.0), arrival=0, epochs=1,
        iters=100) -> JobSpec:
    return JobSpec(id=jid, arrival=arrival, workers=workers, epochs=epochs,
                   iters_per_epoch=iters, throughput=throughput)


class TestConstruction:
    def test_cluster_shape_accessors(self):
        c = small_cluster()
        assert c.n_nodes == 2
        assert c.n_types == 2
        assert c.total_gpus() == 5
        assert c.total_of_type(0) == 2
        assert c.capacity(1, 1) == 2

    def test_duplicate_labels_rejected(self):
        with pytest.raises(InvariantError):
            ClusterSpec(
                gpu_types=(GpuType(0, "a"), GpuType(1, "a")),
                nodes=(NodeSpec(0, (1, 1)),),
            )

    def test_non_dense_type_ids_rejected(self):
        with pytest.raises(InvariantError):
            ClusterSpec(
                gpu_types=(GpuType(1, "a"), GpuType(0, "b")),
                nodes=(NodeSpec(0, (1, 1)),),
            )

    def test_capacity_vector_length_mismatch_rejected(self):
        with pytest.raises(InvariantError):
            ClusterSpec(
                gpu_types=(GpuType(0, "a"),),
                nodes=(NodeSpec(0, (1, 1)),),
            )

    def test_empty_cluster_rejected(self):
        with pytest.raises(InvariantError):
            ClusterSpec(
                gpu_types=(GpuType(0, "a"),),
                nodes=(NodeSpec(0, (0,)),),
            )

    def test_job_invariants(self):
        with pytest.raises(InvariantError):
            job(workers=0)
        with pytest.raises(InvariantError):
            job(epochs=0)
        with pytest.raises(InvariantError):
            job(throughput=(-1.0, 1.0))

    def test_runnable_types_skips_zero(self):
        assert job(throughput=(0.0, 3.0)).runnable_types == (1,)

    def test_slot_config_invariants(self):
        with pytest.raises(ConfigurationError):
            SlotConfig(slot_seconds=0.0)
        with pytest.raises(ConfigurationError):
            SlotConfig(horizon=0)


class TestAllocationMatrix:
    def test_from_placements_drops_zero_entries(self):
        m = AllocationMatrix.from_placements({1: {(0, 0): 2, (0, 1): 0}})
        assert m.entries == {(1, 0, 0): 2}
        assert m.workers_for(1) == 2
        assert m.types_used(1) == {0}
        assert m.nodes_used(1) == {0}
        assert m.jobs() == {1}
        assert not m.is_empty()

    def test_used_sums_across_jobs(self):
        m = AllocationMatrix.from_placements(
            {1: {(0, 0): 1}, 2: {(0, 0): 1, (1, 1): 2}}
        )
        assert m.used(0, 0) == 2
        assert m.used(1, 1) == 2


class TestBottleneck:
    def test_min_across_used_types(self):
        j = job(throughput=(4.0, 1.0))
        alloc = AllocationMatrix.from_placements({1: {(0, 0): 1, (0, 1): 1}})
        assert bottleneck_throughput(j, alloc) == 1.0

    def test_empty_allocation_is_zero(self):
        assert bottleneck_throughput(job(), AllocationMatrix()) == 0.0

    def test_unrunnable_type_raises(self):
        j = job(throughput=(4.0, 0.0))
        alloc = AllocationMatrix.from_placements({1: {(0, 1): 2}})
        with pytest.raises(InvariantError):
            bottleneck_throughput(j, alloc)


class TestProgress:
    def test_progress_is_rate_workers_seconds(self):
        # 100 iters at 2 it/s x 2 workers x 10 s = 40 iters per round
        j = job(throughput=(2.0, 1.0), iters=100)
        slot = SlotConfig(slot_seconds=10.0, horizon=10)
        alloc = AllocationMatrix.from_placements({1: {(0, 0): 2}})
        s = apply_round_progress(JobState.fresh(j), alloc, slot, 0)
        assert s.remaining_iters == 100 - 2.0 * 2 * 10.0
        assert s.finish_time is None

    def test_finish_at_slot_boundary(self):
        j = job(throughput=(10.0, 1.0), iters=100)
        slot = SlotConfig(slot_seconds=10.0, horizon=10)
        alloc = AllocationMatrix.from_placements({1: {(0, 0): 2}})
        s = apply_round_progress(JobState.fresh(j), alloc, slot, 3)
        assert s.finished
        assert s.finish_time == 4

    def test_restart_penalty_consumes_slot_time(self):
        j = job(throughput=(2.0, 1.0), iters=1000)
        slot = SlotConfig(slot_seconds=10.0, horizon=10)
        alloc = AllocationMatrix.from_placements({1: {(0, 0): 2}})
        fresh = JobState.fresh(j)
        from dataclasses import replace
        penalized = replace(fresh, restart_penalty_pending=3.0)
        a = apply_round_progress(fresh, alloc, slot, 0)
        b = apply_round_progress(penalized, alloc, slot, 0)
        lost = a.remaining_iters - b.remaining_iters
        assert lost == -(2.0 * 2 * 3.0)
        assert b.restart_penalty_pending == 0.0

    def test_unallocated_job_unchanged(self):
        j = job()
        s = JobState.fresh(j)
        assert apply_round_progress(s, AllocationMatrix(), SlotConfig(), 0) is s


class TestValidate:
    def test_feasible_allocation_passes(self):
        c = small_cluster()
        alloc = AllocationMatrix.from_placements({1: {(0, 0): 2}})
        assert validate(alloc, c, [job()], 0) == []

    def test_capacity_violation(self):
        c = small_cluster()
        alloc = AllocationMatrix.from_placements({1: {(0, 0): 3}})
        kinds = {v.constraint for v in validate(alloc, c, [job(workers=3)], 0)}
        assert "capacity" in kinds

    def test_gang_violation_partial_allocation(self):
        c = small_cluster()
        alloc = AllocationMatrix.from_placements({1: {(0, 0): 1}})
        kinds = {v.constraint for v in validate(alloc, c, [job(workers=2)], 0)}
        assert "gang" in kinds

    def test_before_arrival(self):
        c = small_cluster()
        alloc = AllocationMatrix.from_placements({1: {(0, 0): 2}})
        kinds = {v.constraint for v in validate(alloc, c, [job(arrival=5)], 0)}
        assert "before-arrival" in kinds

    def test_unrunnable_type(self):
        c = small_cluster()
        alloc = AllocationMatrix.from_placements({1: {(1, 1): 2}})
        j = job(throughput=(1.0, 0.0))
        kinds = {v.constraint for v in validate(alloc, c, [j], 0)}
        assert "unrunnable-type" in kinds

    def test_unknown_job(self):
        c = small_cluster()
        alloc = AllocationMatrix.from_placements({99: {(0, 0): 1}})
        kinds = {v.constraint for v in validate(alloc, c, [job()], 0)}
        assert "gang" in kinds


class TestEstimate:
    def test_exact_division(self):
        assert estimate_slots_to_finish(100.0, 2.0, 5, 10.0) == 1

    def test_ceiling(self):
        assert estimate_slots_to_finish(101.0, 2.0, 5, 10.0) == 2

    def test_finished_is_zero(self):
        assert estimate_slots_to_finish(0.0, 2.0, 5, 10.0) == 0

    def test_zero_rate_raises(self):
        with pytest.raises(ConfigurationError):
            estimate_slots_to_finish(1.0, 0.0, 5, 10.0)
