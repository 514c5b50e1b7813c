"""Shared builders for randomized tiny scheduling instances."""

import random

from hetsched.domain import (
    ClusterSpec,
    GpuType,
    JobSpec,
    NodeSpec,
    SlotConfig,
)

LABELS = ("a", "b", "c")


def random_tiny_cluster(rng: random.Random, max_nodes=3, max_types=2,
                        max_cap=2) -> ClusterSpec:
    n_types = rng.randint(1, max_types)
    n_nodes = rng.randint(1, max_nodes)
    types = tuple(GpuType(i, LABELS[i]) for i in range(n_types))
    nodes = []
    for h in range(n_nodes):
        caps = tuple(rng.randint(0, max_cap) for _ in range(n_types))
        nodes.append(NodeSpec(h, caps))
    if all(n.total() == 0 for n in nodes):
        nodes[0] = NodeSpec(0, tuple(max(1, c) for c in nodes[0].capacity))
    return ClusterSpec(types, tuple(nodes))


def random_tiny_jobs(rng: random.Random, cluster: ClusterSpec, max_jobs=4,
                     max_arrival=0) -> list[JobSpec]:
    n_jobs = rng.randint(1, max_jobs)
    total = cluster.total_gpus()
    jobs = []
    for j in range(1, n_jobs + 1):
        workers = rng.randint(1, max(1, min(3, total)))
        throughput = tuple(
            rng.choice((0.0, rng.uniform(0.5, 8.0)))
            for _ in range(cluster.n_types)
        )
        if all(x == 0.0 for x in throughput):
            throughput = (rng.uniform(0.5, 8.0),) + throughput[1:]
        jobs.append(
            JobSpec(
                id=j,
                arrival=rng.randint(0, max_arrival) if max_arrival else 0,
                workers=workers,
                epochs=rng.randint(1, 3),
                iters_per_epoch=rng.randint(1, 40),
                throughput=throughput,
            )
        )
    return jobs


def tiny_slot(rng: random.Random) -> SlotConfig:
    return SlotConfig(slot_seconds=rng.choice((1.0, 2.0, 5.0)),
                      horizon=rng.randint(4, 8))
