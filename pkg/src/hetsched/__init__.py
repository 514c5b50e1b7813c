"""Heterogeneity-aware GPU-cluster scheduling in a trace-driven simulator.

The package couples a price-guided online scheduler (and a job-forking
variant) with classic baselines inside one discrete-time round engine, plus
workload generation, metrics, and a CLI.
"""

from .domain import (
    AllocationMatrix,
    ClusterSpec,
    GpuType,
    JobSpec,
    JobState,
    NodeSpec,
    SlotConfig,
)
from .simulator import SimConfig, SimReport, metrics, offline_opt, run

__all__ = [
    "AllocationMatrix",
    "ClusterSpec",
    "GpuType",
    "JobSpec",
    "JobState",
    "NodeSpec",
    "SlotConfig",
    "SimConfig",
    "SimReport",
    "metrics",
    "offline_opt",
    "run",
]

__version__ = "0.1.0"
