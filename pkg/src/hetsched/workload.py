"""Workload and cluster construction plus on-disk formats.

Traces are CSV (one row per job, one throughput column per GPU type);
clusters are JSON.  Synthetic traces draw job sizes from four GPU-hour
buckets with a production-like skew toward small jobs.
"""

from __future__ import annotations

import csv
import json
import math
import random
from typing import Optional, Sequence

from .domain import (
    ClusterSpec,
    ConfigurationError,
    GpuType,
    JobSpec,
    NodeSpec,
    SlotConfig,
)

GPU_LABELS = ("v100", "p100", "k80")

# iterations/second per GPU for a handful of model families, indexed like
# GPU_LABELS.  Derived from relative speed figures of the three generations.
MODEL_ZOO: dict[str, tuple[float, float, float]] = {
    "resnet50": (8.0, 3.2, 1.1),
    "vgg16": (4.5, 1.6, 0.5),
    "inception3": (6.0, 2.4, 0.8),
    "lstm": (10.0, 4.5, 1.8),
    "transformer": (7.0, 2.6, 0.0),  # needs >= 16 GB memory, no k80
}

# (bucket name, low GPU-hours, high GPU-hours, sampling weight)
SIZE_BUCKETS = (
    ("small", 0.05, 1.0, 0.55),
    ("medium", 1.0, 10.0, 0.30),
    ("large", 10.0, 50.0, 0.10),
    ("xlarge", 60.0, 100.0, 0.05),
)

ITERS_PER_EPOCH = 100


def default_cluster(nodes_per_type: int = 5, gpus_per_node: int = 4) -> ClusterSpec:
    """Homogeneous-node cluster: ``nodes_per_type`` nodes of each GPU type."""
    types = tuple(GpuType(i, lab) for i, lab in enumerate(GPU_LABELS))
    nodes = []
    for r in range(len(types)):
        for _ in range(nodes_per_type):
            cap = [0] * len(types)
            cap[r] = gpus_per_node
            nodes.append(NodeSpec(len(nodes), tuple(cap)))
    return ClusterSpec(types, tuple(nodes))


def demo_cluster() -> ClusterSpec:
    """Three mixed nodes: 2 of the fastest type, 3 mid, 1 slow."""
    types = tuple(GpuType(i, lab) for i, lab in enumerate(GPU_LABELS))
    nodes = (
        NodeSpec(0, (2, 0, 0)),
        NodeSpec(1, (0, 3, 0)),
        NodeSpec(2, (0, 0, 1)),
    )
    return ClusterSpec(types, nodes)


def demo_jobs(iters_per_epoch: int = 1, scale: float = 1.0) -> list[JobSpec]:
    """Three jobs with deliberately non-obvious best placements.

    Job 1 is fastest on the top-end type but tolerable on the slow one;
    job 2 prefers the mid type; job 3 is nearly unusable on the mid type.
    Throughputs are iterations/second scaled by ``scale``.
    """
    rows = [
        (1, 3, 80, (40.0, 20.0, 30.0)),
        (2, 2, 30, (5.0, 15.0, 5.0)),
        (3, 2, 50, (10.0, 2.0, 20.0)),
    ]
    return [
        JobSpec(
            id=j,
            arrival=0,
            workers=w,
            epochs=e,
            iters_per_epoch=iters_per_epoch,
            throughput=tuple(x * scale for x in xs),
        )
        for j, w, e, xs in rows
    ]


def generate_trace(
    n_jobs: int,
    seed: int = 0,
    mean_interarrival_slots: float = 0.0,
    hours_scale: float = 1.0,
    slot: Optional[SlotConfig] = None,
) -> list[JobSpec]:
    """Synthetic trace: model family, worker count, and GPU-hour bucket from
    one seeded generator.

    By default every job is available at time 0; a positive
    ``mean_interarrival_slots`` switches to Poisson arrivals.
    ``hours_scale`` shrinks the sampled GPU-hours uniformly, which keeps the
    size distribution's shape while making desk-scale runs finish quickly.
    """
    if n_jobs < 1:
        raise ConfigurationError("n_jobs must be >= 1")
    slot = slot or SlotConfig()
    rng = random.Random(seed)
    names = sorted(MODEL_ZOO)
    weights = [w for _, _, _, w in SIZE_BUCKETS]
    jobs: list[JobSpec] = []
    arrival = 0.0
    for j in range(1, n_jobs + 1):
        model = names[rng.randrange(len(names))]
        throughput = MODEL_ZOO[model]
        workers = rng.choice((1, 1, 2, 2, 4, 8))
        _, lo, hi, _ = rng.choices(SIZE_BUCKETS, weights=weights)[0]
        gpu_hours = rng.uniform(lo, hi) * hours_scale
        best = max(throughput)
        total_iters = max(
            ITERS_PER_EPOCH, gpu_hours * 3600.0 * best * workers
        )
        epochs = max(1, round(total_iters / ITERS_PER_EPOCH))
        jobs.append(
            JobSpec(
                id=j,
                arrival=int(arrival),
                workers=workers,
                epochs=epochs,
                iters_per_epoch=ITERS_PER_EPOCH,
                throughput=throughput,
            )
        )
        if mean_interarrival_slots > 0:
            arrival += rng.expovariate(1.0 / mean_interarrival_slots)
    return jobs


# ------------------------------------------------------------------------- #
# On-disk formats


def save_trace(jobs: Sequence[JobSpec], path: str,
               labels: Sequence[str] = GPU_LABELS) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["id", "arrival", "workers", "epochs", "iters_per_epoch"]
            + [f"x_{lab}" for lab in labels]
            + ["parent_id"]
        )
        for j in jobs:
            if len(j.throughput) != len(labels):
                raise ConfigurationError(
                    f"job {j.id} throughput length != number of GPU types"
                )
            writer.writerow(
                [j.id, j.arrival, j.workers, j.epochs, j.iters_per_epoch]
                + [repr(x) for x in j.throughput]
                + ["" if j.parent_id is None else j.parent_id]
            )


def load_trace(path: str) -> list[JobSpec]:
    jobs: list[JobSpec] = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ConfigurationError(f"{path}: empty trace file")
        x_cols = [c for c in reader.fieldnames if c.startswith("x_")]
        if not x_cols:
            raise ConfigurationError(f"{path}: no throughput columns (x_*)")
        for row in reader:
            parent = row.get("parent_id", "")
            jobs.append(
                JobSpec(
                    id=int(row["id"]),
                    arrival=int(row["arrival"]),
                    workers=int(row["workers"]),
                    epochs=int(row["epochs"]),
                    iters_per_epoch=int(row["iters_per_epoch"]),
                    throughput=tuple(float(row[c]) for c in x_cols),
                    parent_id=int(parent) if parent else None,
                )
            )
    ids = [j.id for j in jobs]
    if len(set(ids)) != len(ids):
        raise ConfigurationError(f"{path}: duplicate job ids")
    return jobs


def save_cluster(cluster: ClusterSpec, path: str) -> None:
    payload = {
        "gpu_types": [g.label for g in cluster.gpu_types],
        "nodes": [list(n.capacity) for n in cluster.nodes],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)


def load_cluster(path: str) -> ClusterSpec:
    with open(path) as fh:
        payload = json.load(fh)
    try:
        types = tuple(
            GpuType(i, lab) for i, lab in enumerate(payload["gpu_types"])
        )
        nodes = tuple(
            NodeSpec(h, tuple(int(c) for c in caps))
            for h, caps in enumerate(payload["nodes"])
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"{path}: malformed cluster file: {exc}")
    return ClusterSpec(types, nodes)


def arrival_slots_from_seconds(arrival_s: float, slot: SlotConfig) -> int:
    """Quantize a wall-clock arrival to the first slot boundary at or after it."""
    return int(math.ceil(arrival_s / slot.slot_seconds))
