"""Testbed providers: lease compute resources and map services onto hosts.

A provider grants hosts for (environment, profile, quantity) requests behind
a uniform acquire/release interface. The built-in simulated provider is
deterministic given a seed and enforces per-profile capacity; drivers for
real testbeds are registered but deliberately stubbed, because they need
site accounts and credentials that a desk-scale replication does not have.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

from .config import LayersServicesConfig


class ProviderError(RuntimeError):
    """Resource acquisition or mapping failed."""


class CapacityError(ProviderError):
    pass


class UnknownGrantError(ProviderError):
    pass


class NotConfiguredError(ProviderError):
    pass


@dataclass(frozen=True)
class HostProfile:
    """Hardware profile plus the calibrated throughput model of a machine class.

    Core count, frequency, and memory describe the physical box. The
    compress/decompress/inference fields are explicit calibration values used
    by the pipeline model; the CPU baseline and memory working set feed the
    resource-consumption model. All of them can be overridden via a catalog
    file rather than being baked in.
    """

    name: str
    cpu_cores: int
    cpu_hz: float
    mem_bytes: int
    compress_rate: float  # bytes/second of compression work
    decompress_rate: float  # bytes/second of decompression work
    inference_time_s: float  # fixed per-image model inference cost
    cpu_baseline_pct: float = 2.0
    mem_working_set_gb: float = 0.5

    def __post_init__(self):
        for fname in ("cpu_cores", "cpu_hz", "mem_bytes", "compress_rate", "decompress_rate", "inference_time_s"):
            if getattr(self, fname) <= 0:
                raise ValueError(f"profile {self.name!r}: {fname} must be > 0")


@dataclass(frozen=True)
class Host:
    """One granted machine; layer/service binding is filled in by map_services."""

    id: str
    profile: HostProfile
    address: str
    layer: str = ""
    service: str = ""
    instance_index: int = -1

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.layer, self.service, self.instance_index)

    @property
    def qualified_name(self) -> str:
        return f"{self.layer}.{self.service}.{self.instance_index}"


@dataclass(frozen=True)
class ResourceRequest:
    environment: str
    profile: str
    quantity: int
    lease_duration_s: float = 3600.0

    def __post_init__(self):
        if self.quantity < 1:
            raise ProviderError(f"request for profile {self.profile!r}: quantity must be >= 1")


@dataclass(frozen=True)
class ResourceGrant:
    grant_id: str
    hosts: tuple[Host, ...]
    expires_at: float


# Numeric hardware fields follow the published machine descriptions
# (rpi3: 4x1.2GHz/1GB, rpi4: 4x1.5GHz/8GB, dahu: 16x2.1GHz/192GB,
# skylake: 12x2.6GHz/192GB). Throughput fields are calibration defaults:
# rpi4 = 1.25x rpi3, proportional to the 1.5/1.2 GHz clock ratio.
DEFAULT_PROFILES: dict[str, HostProfile] = {
    p.name: p
    for p in (
        HostProfile("rpi3", 4, 1.2e9, 1_000_000_000, 1.00e6, 2.0e6, 0.50, cpu_baseline_pct=4.3, mem_working_set_gb=0.38),
        HostProfile("rpi4", 4, 1.5e9, 8_000_000_000, 1.25e6, 2.5e6, 0.40, cpu_baseline_pct=5.0, mem_working_set_gb=1.1),
        HostProfile("dahu", 16, 2.1e9, 192_000_000_000, 8.0e6, 4.0e6, 0.05, cpu_baseline_pct=2.0, mem_working_set_gb=4.0),
        HostProfile("skylake", 12, 2.6e9, 192_000_000_000, 9.0e6, 5.0e6, 0.04, cpu_baseline_pct=2.0, mem_working_set_gb=4.0),
    )
}

_REQUIRED_PROFILE_FIELDS = (
    "cpu_cores",
    "cpu_hz",
    "mem_bytes",
    "compress_rate",
    "decompress_rate",
    "inference_time_s",
)
_PROFILE_FIELDS = _REQUIRED_PROFILE_FIELDS + ("cpu_baseline_pct", "mem_working_set_gb")


def load_profiles(path: Path | str) -> dict[str, HostProfile]:
    """Load a profile catalog from a ``profiles.yaml`` file.

    Entries override or extend the defaults, so a catalog only needs to list
    what differs.
    """
    raw = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(raw, dict):
        raise ProviderError(f"profile catalog {path} must be a mapping")
    catalog = dict(DEFAULT_PROFILES)
    for name, fields in raw.items():
        if not isinstance(fields, dict):
            raise ProviderError(f"profile {name!r} must be a mapping of fields")
        base = catalog.get(name)
        values: dict[str, Any] = (
            {f: getattr(base, f) for f in _PROFILE_FIELDS} if base else {}
        )
        for key, value in fields.items():
            if key not in _PROFILE_FIELDS:
                raise ProviderError(f"profile {name!r}: unknown field {key!r}")
            values[key] = value
        missing = [f for f in _REQUIRED_PROFILE_FIELDS if f not in values]
        if missing:
            raise ProviderError(f"profile {name!r}: missing fields {missing}")
        try:
            # YAML 1.1 reads bare exponents like 2.0e6 as strings; coerce
            values = {f: float(v) for f, v in values.items()}
        except (TypeError, ValueError) as exc:
            raise ProviderError(f"profile {name!r}: non-numeric field ({exc})") from None
        values["cpu_cores"] = int(values["cpu_cores"])
        values["mem_bytes"] = int(values["mem_bytes"])
        catalog[str(name)] = HostProfile(name=str(name), **values)
    return catalog


class Provider:
    """Uniform acquire/release interface over heterogeneous testbeds."""

    kind = "abstract"

    def __init__(self, catalog: Mapping[str, HostProfile] | None = None):
        self.catalog: dict[str, HostProfile] = dict(catalog or DEFAULT_PROFILES)

    def acquire(self, request: ResourceRequest) -> ResourceGrant:
        raise NotImplementedError

    def release(self, grant: ResourceGrant) -> None:
        raise NotImplementedError


class SimulatedProvider(Provider):
    """Deterministic in-memory provider with per-profile capacity.

    Given the same seed and catalog it always grants the same host ids and
    addresses, which makes whole deployment plans reproducible byte for byte.
    Pool mutations are serialized behind a lock so concurrent acquire/release
    keep the capacity accounting consistent.
    """

    kind = "simulated"

    DEFAULT_CAPACITY = 16

    def __init__(
        self,
        catalog: Mapping[str, HostProfile] | None = None,
        capacity: int | Mapping[str, int] | None = None,
        seed: int = 0,
    ):
        super().__init__(catalog)
        if capacity is None:
            capacity = self.DEFAULT_CAPACITY
        if isinstance(capacity, int):
            self._capacity = {name: capacity for name in self.catalog}
        else:
            self._capacity = {name: capacity.get(name, self.DEFAULT_CAPACITY) for name in self.catalog}
        self._free = dict(self._capacity)
        self._seed = seed
        self._salt = hashlib.sha256(f"simulated:{seed}".encode()).hexdigest()[:6]
        self._next_host = {name: 0 for name in self.catalog}
        self._next_grant = 0
        self._live: dict[str, ResourceGrant] = {}
        self._lock = threading.Lock()

    def acquire(self, request: ResourceRequest) -> ResourceGrant:
        profile = self.catalog.get(request.profile)
        if profile is None:
            raise ProviderError(f"unknown profile {request.profile!r}")
        with self._lock:
            free = self._free[request.profile]
            if request.quantity > free:
                raise CapacityError(
                    f"profile {request.profile!r}: requested {request.quantity}, "
                    f"only {free} available (short by {request.quantity - free})"
                )
            self._free[request.profile] = free - request.quantity
            hosts = []
            for _ in range(request.quantity):
                n = self._next_host[request.profile]
                self._next_host[request.profile] = n + 1
                hosts.append(
                    Host(
                        id=f"{request.profile}-{n:03d}",
                        profile=profile,
                        address=f"sim-{self._salt}-{request.profile}-{n:03d}.test",
                    )
                )
            self._next_grant += 1
            grant = ResourceGrant(
                grant_id=f"grant-{self._salt}-{self._next_grant:04d}",
                hosts=tuple(hosts),
                expires_at=request.lease_duration_s,
            )
            self._live[grant.grant_id] = grant
            return grant

    def release(self, grant: ResourceGrant) -> None:
        with self._lock:
            if grant.grant_id not in self._live:
                raise UnknownGrantError(f"grant {grant.grant_id!r} is unknown or already released")
            del self._live[grant.grant_id]
            for host in grant.hosts:
                self._free[host.profile.name] += 1

    def free_capacity(self, profile: str) -> int:
        with self._lock:
            return self._free[profile]


class MockProvider(Provider):
    """Unbounded provider for tests; no capacity accounting beyond grant tracking."""

    kind = "mock"

    def __init__(self, catalog: Mapping[str, HostProfile] | None = None):
        super().__init__(catalog)
        self._n = 0
        self._live: set[str] = set()
        self._lock = threading.Lock()

    def acquire(self, request: ResourceRequest) -> ResourceGrant:
        profile = self.catalog.get(request.profile)
        if profile is None:
            raise ProviderError(f"unknown profile {request.profile!r}")
        with self._lock:
            hosts = []
            for _ in range(request.quantity):
                hosts.append(Host(f"mock-{self._n:03d}", profile, f"mock-{self._n:03d}.test"))
                self._n += 1
            grant = ResourceGrant(f"mock-grant-{self._n:04d}", tuple(hosts), request.lease_duration_s)
            self._live.add(grant.grant_id)
            return grant

    def release(self, grant: ResourceGrant) -> None:
        with self._lock:
            if grant.grant_id not in self._live:
                raise UnknownGrantError(f"grant {grant.grant_id!r} is unknown or already released")
            self._live.remove(grant.grant_id)


class StubProvider(Provider):
    """Placeholder for real testbed drivers that need site credentials."""

    def __init__(self, kind: str, catalog: Mapping[str, HostProfile] | None = None):
        super().__init__(catalog)
        self.kind = kind

    def acquire(self, request: ResourceRequest) -> ResourceGrant:
        raise NotConfiguredError(
            f"provider {self.kind!r} is not configured in this build; "
            "use 'simulated' or 'mock', or install site credentials"
        )

    def release(self, grant: ResourceGrant) -> None:
        raise NotConfiguredError(f"provider {self.kind!r} is not configured in this build")


STUB_PROVIDER_KINDS = ("grid5000", "fit_iotlab", "chameleon", "chi_edge")


def make_provider(
    kind: str,
    catalog: Mapping[str, HostProfile] | None = None,
    seed: int = 0,
    capacity: int | Mapping[str, int] | None = None,
) -> Provider:
    if kind == "simulated":
        return SimulatedProvider(catalog, capacity=capacity, seed=seed)
    if kind == "mock":
        return MockProvider(catalog)
    if kind in STUB_PROVIDER_KINDS:
        return StubProvider(kind, catalog)
    raise ProviderError(f"unknown provider {kind!r}")


# ---------------------------------------------------------------------------
# service -> host mapping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeploymentPlan:
    """Binding of every service instance to exactly one granted host."""

    assignments: Mapping[tuple[str, str, int], Host]
    links: Any = None  # LinkTable, attached by netem.build_links

    @property
    def hosts(self) -> tuple[Host, ...]:
        return tuple(self.assignments.values())

    def host_for(self, layer: str, service: str, instance: int = 0) -> Host:
        return self.assignments[(layer, service, instance)]

    def layer_hosts(self, layer: str) -> tuple[Host, ...]:
        return tuple(h for h in self.hosts if h.layer == layer)

    def select(self, selector) -> tuple[Host, ...]:
        return tuple(h for h in self.hosts if selector.matches(h.layer, h.service, h.instance_index))

    def to_json(self) -> str:
        payload = {
            h.qualified_name: {
                "id": h.id,
                "profile": h.profile.name,
                "address": h.address,
            }
            for h in self.hosts
        }
        return json.dumps(payload, sort_keys=True, indent=2)


def map_services(cfg: LayersServicesConfig, grants: Iterable[ResourceGrant]) -> DeploymentPlan:
    """Assign hosts to service instances, first-fit in declaration order.

    Hosts are consumed from the grants in order, matched by profile. The
    result is deterministic: same config and same grants, same plan.
    """
    pools: dict[str, list[Host]] = {}
    for grant in grants:
        for host in grant.hosts:
            pools.setdefault(host.profile.name, []).append(host)

    assignments: dict[tuple[str, str, int], Host] = {}
    used: set[str] = set()
    for layer in cfg.layers:
        for svc in layer.services:
            pool = pools.get(svc.profile, [])
            if len(pool) < svc.quantity:
                raise ProviderError(
                    f"service {layer.name}.{svc.name} needs {svc.quantity} host(s) with "
                    f"profile {svc.profile!r}, only {len(pool)} granted"
                )
            for idx in range(svc.quantity):
                raw = pool.pop(0)
                if raw.id in used:
                    raise ProviderError(f"host {raw.id!r} granted twice")
                used.add(raw.id)
                assignments[(layer.name, svc.name, idx)] = replace(
                    raw, layer=layer.name, service=svc.name, instance_index=idx
                )
    return DeploymentPlan(assignments)


def requests_for(cfg: LayersServicesConfig, lease_duration_s: float = 3600.0) -> list[ResourceRequest]:
    """Group the config's services into one request per (environment, profile)."""
    grouped: dict[tuple[str, str], int] = {}
    for _, svc in cfg.iter_services():
        key = (svc.environment, svc.profile)
        grouped[key] = grouped.get(key, 0) + svc.quantity
    return [
        ResourceRequest(environment=env, profile=profile, quantity=qty, lease_duration_s=lease_duration_s)
        for (env, profile), qty in grouped.items()
    ]
