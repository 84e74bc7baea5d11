"""contbench: define, deploy, repeat, and replicate Edge-to-Cloud experiments.

Experiments are described by three testbed-agnostic YAML documents, deployed
through a pluggable provider layer (with a deterministic built-in simulator),
executed phase by phase on a virtual clock, archived reproducibly, shared
through a versioned artifact repository, and scored for replication accuracy
between independent campaigns.
"""

__version__ = "0.1.0"

from .config import (
    ExperimentConfig,
    LayersServicesConfig,
    NetworkConfig,
    ValidationIssue,
    WorkflowConfig,
    load_experiment,
    make_experiment,
    validate,
)
from .metrics import MetricQuad, ReplicabilityReport, mean_ci95, rep_accuracy
from .netem import LinkModel, LinkTable, build_links, sample_transfer_time, transfer_time
from .providers import (
    DEFAULT_PROFILES,
    DeploymentPlan,
    Host,
    HostProfile,
    ResourceGrant,
    ResourceRequest,
    SimulatedProvider,
    map_services,
)
from .workload import ProcessingSample, WorkloadSpec, run_workload, simulate_image_pipeline

__all__ = [
    "DEFAULT_PROFILES",
    "DeploymentPlan",
    "ExperimentConfig",
    "Host",
    "HostProfile",
    "LayersServicesConfig",
    "LinkModel",
    "LinkTable",
    "MetricQuad",
    "NetworkConfig",
    "ProcessingSample",
    "ReplicabilityReport",
    "ResourceGrant",
    "ResourceRequest",
    "SimulatedProvider",
    "ValidationIssue",
    "WorkflowConfig",
    "WorkloadSpec",
    "build_links",
    "load_experiment",
    "make_experiment",
    "map_services",
    "mean_ci95",
    "rep_accuracy",
    "run_workload",
    "sample_transfer_time",
    "simulate_image_pipeline",
    "transfer_time",
    "validate",
]
