"""Built-in benchmark: edge devices ship images to a cloud classifier.

Two processing approaches are modeled. Cloud-centric sends the raw image and
does all work on the server; hybrid compresses on the edge device first,
trading edge compute for transmitted bytes:

    hybrid        t = raw/compress_rate + transfer(ceil(raw*ratio))
                      + raw/decompress_rate + inference
    cloud_centric t = transfer(raw) + inference

Compression is modeled (size times ratio, time from the profile's
throughput), not performed with a real codec, so expected values have exact
closed forms. CPU and memory on the device are modeled too: a per-profile
baseline plus seeded jitter, with a small constant extra for the hybrid
approach's compression work, kept below the jitter band.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from typing import Iterator, Mapping

from . import netem
from .config import Selector
from .providers import DeploymentPlan, Host, HostProfile


class WorkloadError(ValueError):
    pass


APPROACHES = ("cloud_centric", "hybrid")

#: Modeled extra CPU load (percentage points) of compressing on the device.
COMPRESS_CPU_PCT = 0.2
#: Half-width of the uniform jitter applied to modeled CPU samples.
CPU_JITTER_PCT = 0.5


@dataclass(frozen=True)
class WorkloadSpec:
    approach: str
    image_size_bytes: int
    compression_ratio: float = 0.8  # compressed/raw
    count: int = 100
    interval_s: float = 30.0
    size_jitter_bytes: int = 0  # image sizes drawn uniformly in base +- jitter
    device_selector: str = "edge.*"
    server_selector: str = "cloud.*"

    def __post_init__(self):
        if self.approach not in APPROACHES:
            raise WorkloadError(f"unknown approach {self.approach!r} (expected one of {APPROACHES})")
        if self.image_size_bytes < 1:
            raise WorkloadError("image_size must be >= 1 byte")
        if not 0.0 < self.compression_ratio <= 1.0:
            raise WorkloadError(f"compression_ratio must be in (0, 1], got {self.compression_ratio}")
        if self.count < 1:
            raise WorkloadError("count must be >= 1")
        if self.size_jitter_bytes < 0 or self.size_jitter_bytes >= self.image_size_bytes:
            raise WorkloadError("size jitter must be in [0, image_size)")

    @classmethod
    def from_params(cls, params: Mapping[str, str]) -> "WorkloadSpec":
        """Build from a service's ``params`` map (all values are strings)."""
        try:
            return cls(
                approach=params.get("approach", "cloud_centric"),
                image_size_bytes=int(params.get("image_size", "40000")),
                compression_ratio=float(params.get("compression_ratio", "0.8")),
                count=int(params.get("count", "100")),
                interval_s=float(params.get("interval", "30")),
                size_jitter_bytes=int(params.get("image_size_jitter", "0")),
                device_selector=params.get("devices", "edge.*"),
                server_selector=params.get("server", "cloud.*"),
            )
        except ValueError as exc:
            if isinstance(exc, WorkloadError):
                raise
            raise WorkloadError(f"bad workload parameter: {exc}") from None


def is_workload_service(params: Mapping[str, str]) -> bool:
    return "approach" in params


@dataclass(frozen=True)
class ProcessingSample:
    """Timing decomposition of one image through the pipeline."""

    repetition: int
    t_preprocess_s: float
    t_transfer_s: float
    t_postprocess_s: float
    total_s: float
    bytes_sent: int


@dataclass(frozen=True)
class MetricSample:
    """One measured value; the flat unit written to samples.csv."""

    metric: str
    host: str
    repetition: int
    value: float
    unit: str


def derive_seed(seed: int, *tags) -> int:
    """Stable per-purpose sub-seed so independent streams never overlap."""
    material = ":".join([str(seed), *map(str, tags)]).encode()
    return int.from_bytes(hashlib.sha256(material).digest()[:8], "big")


def _image_size(spec: WorkloadSpec, seed: int, device_id: str, repetition: int) -> int:
    if spec.size_jitter_bytes == 0:
        return spec.image_size_bytes
    rng = random.Random(derive_seed(seed, "image-size", device_id, repetition))
    return spec.image_size_bytes + rng.randint(-spec.size_jitter_bytes, spec.size_jitter_bytes)


def simulate_image_pipeline(
    spec: WorkloadSpec,
    edge: HostProfile,
    cloud: HostProfile,
    link: netem.LinkModel,
    repetition: int,
    seed: int = 0,
    device_id: str = "device",
) -> ProcessingSample:
    """One image through the pipeline; deterministic given (spec, seed, repetition)."""
    raw = _image_size(spec, seed, device_id, repetition)
    if spec.approach == "hybrid":
        t_pre = raw / edge.compress_rate
        bytes_sent = math.ceil(raw * spec.compression_ratio)
        t_post = raw / cloud.decompress_rate + cloud.inference_time_s
    else:
        t_pre = 0.0
        bytes_sent = raw
        t_post = cloud.inference_time_s
    t_transfer = netem.transfer_time(bytes_sent, link)
    total = t_pre + t_transfer + t_post
    return ProcessingSample(repetition, t_pre, t_transfer, t_post, total, bytes_sent)


def device_samples(
    spec: WorkloadSpec,
    device: Host,
    server: Host,
    links: netem.LinkTable,
    repetition: int,
    seed: int,
) -> tuple[ProcessingSample, list[MetricSample]]:
    """Pipeline sample plus the metric rows it contributes for one repetition."""
    link = links.lookup(device, server)
    sample = simulate_image_pipeline(
        spec, device.profile, server.profile, link, repetition, seed, device_id=device.id
    )
    # Jitter is keyed by host and repetition, not by approach, so paired runs
    # see the same noise realization and differ only by the compression load.
    cpu_rng = random.Random(derive_seed(seed, "cpu", device.id, repetition))
    cpu = device.profile.cpu_baseline_pct + cpu_rng.uniform(-CPU_JITTER_PCT, CPU_JITTER_PCT)
    if spec.approach == "hybrid":
        cpu += COMPRESS_CPU_PCT
    metrics = [
        MetricSample("processing_time_s", device.qualified_name, repetition, sample.total_s, "s"),
        MetricSample("bytes_to_cloud", device.qualified_name, repetition, float(sample.bytes_sent), "B"),
        MetricSample("cpu_pct", device.qualified_name, repetition, cpu, "pct"),
        MetricSample("mem_gb", device.qualified_name, repetition, device.profile.mem_working_set_gb, "GB"),
    ]
    return sample, metrics


def _plan_roles(spec: WorkloadSpec, plan: DeploymentPlan) -> tuple[tuple[Host, ...], Host]:
    devices = plan.select(Selector.parse(spec.device_selector))
    servers = plan.select(Selector.parse(spec.server_selector))
    if not devices:
        raise WorkloadError(f"no device hosts match {spec.device_selector!r}")
    if len(servers) != 1:
        raise WorkloadError(
            f"expected exactly one server host matching {spec.server_selector!r}, got {len(servers)}"
        )
    return devices, servers[0]


def run_workload(spec: WorkloadSpec, plan: DeploymentPlan, seed: int = 0) -> list[MetricSample]:
    """Run ``spec.count`` repetitions over the plan's devices, standalone.

    Devices share the server without queuing contention; each repetition is
    computed independently, matching the long send interval that motivates
    the model.
    """
    if plan.links is None:
        raise WorkloadError("deployment plan has no link table; attach one with netem.attach_links")
    devices, server = _plan_roles(spec, plan)
    out: list[MetricSample] = []
    for repetition in range(spec.count):
        for device in devices:
            _, metrics = device_samples(spec, device, server, plan.links, repetition, seed)
            out.extend(metrics)
    return out


def iter_device_pipelines(
    spec: WorkloadSpec, plan: DeploymentPlan, seed: int = 0
) -> Iterator[tuple[Host, int, ProcessingSample]]:
    """Yield (device, repetition, sample) in deterministic order."""
    devices, server = _plan_roles(spec, plan)
    for repetition in range(spec.count):
        for device in devices:
            sample, _ = device_samples(spec, device, server, plan.links, repetition, seed)
            yield device, repetition, sample
