"""Experiment definition documents: layers/services, network rules, workflow phases.

An experiment is described by three YAML documents:

    layers_services.yaml   which services run on which abstract layer, and
                           which testbed environment provides the machines
    network.yaml           delay / bandwidth / loss constraints between layers
    workflow.yaml          prepare -> launch -> finalize task phases

The network and workflow documents are testbed agnostic: they never name an
environment or provider, so the same experiment can be replayed on a
different infrastructure by editing only ``layers_services.yaml``.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping

import yaml

LAYERS_SERVICES_FILE = "layers_services.yaml"
NETWORK_FILE = "network.yaml"
WORKFLOW_FILE = "workflow.yaml"

DOCUMENT_NAMES = (LAYERS_SERVICES_FILE, NETWORK_FILE, WORKFLOW_FILE)


class ConfigError(ValueError):
    """A document cannot be parsed into a valid configuration."""

    def __init__(self, message: str, location: str = ""):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


@dataclass(frozen=True)
class ValidationIssue:
    """One finding from cross-document validation. Errors block deployment."""

    severity: str  # "error" | "warning"
    location: str
    message: str

    def render(self) -> str:
        return f"{self.severity} {self.location}: {self.message}"

    def to_dict(self) -> dict[str, str]:
        return {"severity": self.severity, "location": self.location, "message": self.message}


# ---------------------------------------------------------------------------
# layers & services
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ServiceSpec:
    name: str
    quantity: int
    environment: str
    profile: str
    params: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class LayerSpec:
    name: str
    services: tuple[ServiceSpec, ...]


@dataclass(frozen=True)
class LayersServicesConfig:
    layers: tuple[LayerSpec, ...]
    environments: Mapping[str, Mapping[str, str]]
    globals: Mapping[str, str] = field(default_factory=dict)

    def layer(self, name: str) -> LayerSpec:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise KeyError(name)

    def iter_services(self):
        for layer in self.layers:
            for svc in layer.services:
                yield layer, svc

    def to_dict(self) -> dict[str, Any]:
        return {
            "layers": [
                {
                    "name": layer.name,
                    "services": [
                        {
                            "name": s.name,
                            "quantity": s.quantity,
                            "environment": s.environment,
                            "profile": s.profile,
                            "params": dict(s.params),
                        }
                        for s in layer.services
                    ],
                }
                for layer in self.layers
            ],
            "environments": {k: dict(v) for k, v in self.environments.items()},
            "global": dict(self.globals),
        }


# ---------------------------------------------------------------------------
# network
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NetworkRule:
    """One directed constraint between two layers.

    ``delay_rtt_s`` is the round-trip delay; emulation halves it per
    direction. Parsing expands ``symmetric: true`` rules into both directed
    pairs, so stored rules are always directed.
    """

    src: str
    dst: str
    delay_rtt_s: float
    rate_bps: float
    loss: float = 0.0
    symmetric: bool = False

    def __post_init__(self):
        if self.rate_bps <= 0:
            raise ConfigError(f"rule {self.src}->{self.dst}: rate must be > 0, got {self.rate_bps}")
        if self.delay_rtt_s < 0:
            raise ConfigError(f"rule {self.src}->{self.dst}: delay must be >= 0")
        if not 0.0 <= self.loss < 1.0:
            raise ConfigError(
                f"rule {self.src}->{self.dst}: loss must be in [0, 1), got {self.loss}"
            )


@dataclass(frozen=True)
class NetworkConfig:
    rules: tuple[NetworkRule, ...]

    def rule_for(self, src_layer: str, dst_layer: str) -> NetworkRule | None:
        for rule in self.rules:
            if rule.src == src_layer and rule.dst == dst_layer:
                return rule
        return None

    def to_dict(self) -> dict[str, Any]:
        return {
            "rules": [
                {
                    "src": r.src,
                    "dst": r.dst,
                    "delay": f"{r.delay_rtt_s * 1000:g}ms",
                    "rate": f"{r.rate_bps:g}bit",
                    "loss": r.loss,
                    "symmetric": False,
                }
                for r in self.rules
            ]
        }


# ---------------------------------------------------------------------------
# workflow
# ---------------------------------------------------------------------------


class Phase(str, Enum):
    PREPARE = "prepare"
    LAUNCH = "launch"
    FINALIZE = "finalize"


PHASE_ORDER = (Phase.PREPARE, Phase.LAUNCH, Phase.FINALIZE)

ACTIONS = ("copy_to", "execute", "fetch_results")


@dataclass(frozen=True)
class WorkflowTask:
    id: str
    phase: Phase
    hosts: str  # selector expression, see Selector
    action: str
    args: Mapping[str, str] = field(default_factory=dict)
    depends_on: tuple[str, ...] = ()


@dataclass(frozen=True)
class WorkflowConfig:
    tasks: tuple[WorkflowTask, ...]  # grouped by phase, declaration order within a phase
    repetitions: int = 1
    interval_s: float = 0.0

    def phase_tasks(self, phase: Phase) -> tuple[WorkflowTask, ...]:
        return tuple(t for t in self.tasks if t.phase is phase)

    def to_dict(self) -> dict[str, Any]:
        return {
            "repetitions": self.repetitions,
            "interval": self.interval_s,
            "tasks": [
                {
                    "id": t.id,
                    "phase": t.phase.value,
                    "hosts": t.hosts,
                    "action": t.action,
                    "args": dict(t.args),
                    "depends_on": list(t.depends_on),
                }
                for t in self.tasks
            ],
        }


@dataclass(frozen=True)
class ExperimentConfig:
    """The parsed triple plus the raw documents it came from."""

    layers_services: LayersServicesConfig
    network: NetworkConfig
    workflow: WorkflowConfig
    documents: Mapping[str, str]  # document name -> raw text
    base_dir: Path | None = None  # where the documents were loaded from, if anywhere

    @property
    def digest(self) -> str:
        return config_digest(self.documents)

    @property
    def label(self) -> str:
        return self.layers_services.globals.get("label", "run")

    @property
    def group(self) -> str:
        return self.layers_services.globals.get("group", "default")


# ---------------------------------------------------------------------------
# selectors
# ---------------------------------------------------------------------------


_SELECTOR_RE = re.compile(r"^(\*|[\w-]+)(?:\.(\*|[\w-]+))?(?:\.(\*|\d+))?$")


@dataclass(frozen=True)
class Selector:
    """``layer[.service[.index]]`` with ``*`` wildcards, e.g. ``edge.client.0``."""

    layer: str = "*"
    service: str = "*"
    index: str = "*"

    @classmethod
    def parse(cls, expr: str) -> "Selector":
        m = _SELECTOR_RE.match(expr.strip())
        if not m:
            raise ConfigError(f"bad host selector {expr!r}")
        layer, service, index = m.groups()
        return cls(layer, service or "*", index or "*")

    def matches_service(self, layer: str, service: str) -> bool:
        return self.layer in ("*", layer) and self.service in ("*", service)

    def matches(self, layer: str, service: str, index: int) -> bool:
        return self.matches_service(layer, service) and self.index in ("*", str(index))


# ---------------------------------------------------------------------------
# scalar parsing helpers
# ---------------------------------------------------------------------------


_RATE_RE = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*([kKmMgG]?)bit(?:/s|ps)?\s*$")
_RATE_MULT = {"": 1.0, "k": 1e3, "m": 1e6, "g": 1e9}

_DURATION_RE = re.compile(r"^\s*([0-9]+(?:\.[0-9]+)?)\s*(ms|s)\s*$")


def parse_rate(value: Any) -> float:
    """Bandwidth to bits/second. Accepts numbers (bit/s) or `25Kbit` style suffixes."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    m = _RATE_RE.match(str(value))
    if not m:
        raise ConfigError(f"cannot parse bandwidth {value!r} (expected e.g. 15Kbit, 1Mbit)")
    return float(m.group(1)) * _RATE_MULT[m.group(2).lower()]


def parse_duration(value: Any, bare_unit: str = "s") -> float:
    """Duration to seconds. Bare numbers are read in ``bare_unit`` (s or ms)."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value) / 1000.0 if bare_unit == "ms" else float(value)
    m = _DURATION_RE.match(str(value))
    if not m:
        raise ConfigError(f"cannot parse duration {value!r} (expected e.g. 150ms, 30s)")
    num = float(m.group(1))
    return num / 1000.0 if m.group(2) == "ms" else num


def _load_yaml(text: str, name: str) -> dict:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" at line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"invalid YAML{line}: {exc}", name) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("document must be a YAML mapping", name)
    return data


def _str_map(raw: Any, location: str) -> dict[str, str]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError("expected a mapping", location)
    return {str(k): _scalar_str(v) for k, v in raw.items()}


def _scalar_str(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


# ---------------------------------------------------------------------------
# parsers
# ---------------------------------------------------------------------------


def parse_layers_services(text: str) -> LayersServicesConfig:
    """Parse the layers & services document.

    Unknown service keys are preserved under ``params`` and unknown top-level
    keys under ``global``, so files written for richer schemas stay loadable.
    """
    doc = LAYERS_SERVICES_FILE
    data = _load_yaml(text, doc)

    raw_envs = data.get("environments")
    if not isinstance(raw_envs, dict) or not raw_envs:
        raise ConfigError("missing required section 'environments'", doc)
    environments = {str(name): _str_map(spec, f"{doc}:environments.{name}") for name, spec in raw_envs.items()}

    raw_layers = data.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ConfigError("missing required section 'layers'", doc)

    layers: list[LayerSpec] = []
    seen_layers: set[str] = set()
    for i, raw_layer in enumerate(raw_layers):
        loc = f"{doc}:layers[{i}]"
        if not isinstance(raw_layer, dict):
            raise ConfigError("layer entry must be a mapping", loc)
        name = str(raw_layer.get("name") or "").strip()
        if not name:
            raise ConfigError("missing required field 'name'", loc)
        if name in seen_layers:
            raise ConfigError(f"duplicate layer {name!r}", loc)
        seen_layers.add(name)

        raw_services = raw_layer.get("services")
        if not isinstance(raw_services, list) or not raw_services:
            raise ConfigError(f"layer {name!r} declares no services", loc)
        services: list[ServiceSpec] = []
        seen_services: set[str] = set()
        for j, raw_svc in enumerate(raw_services):
            sloc = f"{loc}.services[{j}]"
            if not isinstance(raw_svc, dict):
                raise ConfigError("service entry must be a mapping", sloc)
            sname = str(raw_svc.get("name") or "").strip()
            if not sname:
                raise ConfigError("missing required field 'name'", sloc)
            if sname in seen_services:
                raise ConfigError(f"duplicate service {sname!r} in layer {name!r}", sloc)
            seen_services.add(sname)

            quantity = raw_svc.get("quantity", 1)
            if not isinstance(quantity, int) or isinstance(quantity, bool) or quantity < 1:
                raise ConfigError(f"service {sname!r}: quantity must be an integer >= 1", sloc)
            environment = str(raw_svc.get("environment") or "").strip()
            if not environment:
                raise ConfigError(f"service {sname!r}: missing required field 'environment'", sloc)
            if environment not in environments:
                raise ConfigError(
                    f"service {sname!r} references undeclared environment {environment!r}", sloc
                )
            profile = str(raw_svc.get("profile") or "").strip()
            if not profile:
                raise ConfigError(f"service {sname!r}: missing required field 'profile'", sloc)

            params = _str_map(raw_svc.get("params"), f"{sloc}.params")
            for key, value in raw_svc.items():
                if key not in ("name", "quantity", "environment", "profile", "params"):
                    params.setdefault(str(key), _scalar_str(value))
            services.append(ServiceSpec(sname, quantity, environment, profile, params))
        layers.append(LayerSpec(name, tuple(services)))

    globals_ = _str_map(data.get("global"), f"{doc}:global")
    for key, value in data.items():
        if key not in ("layers", "environments", "global"):
            globals_.setdefault(str(key), _scalar_str(value))

    used = {svc.environment for layer in layers for svc in layer.services}
    for env_name in environments:
        if env_name not in used:
            raise ConfigError(f"environment {env_name!r} is not used by any service", doc)

    return LayersServicesConfig(tuple(layers), environments, globals_)


def parse_network(text: str) -> NetworkConfig:
    """Parse the network document, expanding symmetric rules into both directions."""
    doc = NETWORK_FILE
    data = _load_yaml(text, doc)
    raw_rules = data.get("rules", [])
    if raw_rules is None:
        raw_rules = []
    if not isinstance(raw_rules, list):
        raise ConfigError("'rules' must be a list", doc)

    rules: list[NetworkRule] = []
    seen_pairs: set[tuple[str, str]] = set()
    for i, raw in enumerate(raw_rules):
        loc = f"{doc}:rules[{i}]"
        if not isinstance(raw, dict):
            raise ConfigError("rule entry must be a mapping", loc)
        src = str(raw.get("src") or "").strip()
        dst = str(raw.get("dst") or "").strip()
        if not src or not dst:
            raise ConfigError("rule needs both 'src' and 'dst' layer names", loc)
        if "rate" not in raw:
            raise ConfigError("rule missing required field 'rate'", loc)
        try:
            rate = parse_rate(raw["rate"])
            delay = parse_duration(raw.get("delay", 0), bare_unit="ms")
            loss = float(raw.get("loss", 0.0))
            directed = NetworkRule(src, dst, delay, rate, loss)
        except ConfigError as exc:
            raise ConfigError(str(exc), loc) from None
        symmetric = bool(raw.get("symmetric", False))

        expansion = [directed]
        if symmetric and src != dst:
            expansion.append(NetworkRule(dst, src, delay, rate, loss))
        for rule in expansion:
            pair = (rule.src, rule.dst)
            if pair in seen_pairs:
                raise ConfigError(f"more than one rule for pair {rule.src}->{rule.dst}", loc)
            seen_pairs.add(pair)
            rules.append(rule)

    return NetworkConfig(tuple(rules))


def parse_workflow(text: str) -> WorkflowConfig:
    """Parse the workflow document; tasks are grouped prepare -> launch -> finalize."""
    doc = WORKFLOW_FILE
    data = _load_yaml(text, doc)

    repetitions = data.get("repetitions", 1)
    if not isinstance(repetitions, int) or isinstance(repetitions, bool) or repetitions < 1:
        raise ConfigError("'repetitions' must be an integer >= 1", doc)
    try:
        interval = parse_duration(data.get("interval", 0), bare_unit="s")
    except ConfigError as exc:
        raise ConfigError(str(exc), f"{doc}:interval") from None
    if interval < 0:
        raise ConfigError("'interval' must be >= 0", doc)

    raw_tasks = data.get("tasks", [])
    if raw_tasks is None:
        raw_tasks = []
    if not isinstance(raw_tasks, list):
        raise ConfigError("'tasks' must be a list", doc)

    by_phase: dict[Phase, list[WorkflowTask]] = {p: [] for p in PHASE_ORDER}
    declared: dict[str, Phase] = {}
    counters = {p: 0 for p in PHASE_ORDER}
    for i, raw in enumerate(raw_tasks):
        loc = f"{doc}:tasks[{i}]"
        if not isinstance(raw, dict):
            raise ConfigError("task entry must be a mapping", loc)
        phase_name = str(raw.get("phase") or "").strip()
        try:
            phase = Phase(phase_name)
        except ValueError:
            raise ConfigError(f"unknown phase {phase_name!r}", loc) from None
        counters[phase] += 1
        task_id = str(raw.get("id") or f"{phase.value}-{counters[phase]}")
        if task_id in declared:
            raise ConfigError(f"duplicate task id {task_id!r}", loc)

        hosts = str(raw.get("hosts") or "").strip()
        if not hosts:
            raise ConfigError("task missing required field 'hosts'", loc)
        Selector.parse(hosts)  # fail early on bad selector syntax
        action = str(raw.get("action") or "").strip()
        if action not in ACTIONS:
            raise ConfigError(f"unknown action {action!r} (expected one of {', '.join(ACTIONS)})", loc)

        raw_deps = raw.get("depends_on", [])
        if isinstance(raw_deps, str):
            raw_deps = [raw_deps]
        if not isinstance(raw_deps, list):
            raise ConfigError("'depends_on' must be a list of task ids", loc)
        deps: list[str] = []
        for dep in raw_deps:
            dep = str(dep)
            if dep not in declared:
                raise ConfigError(
                    f"task {task_id!r} has forward dependency on {dep!r} "
                    "(dependencies must be declared earlier)",
                    loc,
                )
            if declared[dep] is not phase:
                raise ConfigError(
                    f"task {task_id!r} depends on {dep!r} from a different phase", loc
                )
            deps.append(dep)

        args = _str_map(raw.get("args"), f"{loc}.args")
        for key, value in raw.items():
            if key not in ("id", "phase", "hosts", "action", "args", "depends_on"):
                args.setdefault(str(key), _scalar_str(value))

        declared[task_id] = phase
        by_phase[phase].append(WorkflowTask(task_id, phase, hosts, action, args, tuple(deps)))

    ordered = tuple(t for phase in PHASE_ORDER for t in by_phase[phase])
    return WorkflowConfig(ordered, repetitions, interval)


# ---------------------------------------------------------------------------
# serialization & loading
# ---------------------------------------------------------------------------


def serialize_layers_services(cfg: LayersServicesConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def serialize_network(cfg: NetworkConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def serialize_workflow(cfg: WorkflowConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def config_digest(documents: Mapping[str, str]) -> str:
    """SHA-256 of the canonicalized documents, in fixed file order.

    Canonical form is the parsed YAML re-encoded as sorted compact JSON, so
    formatting-only edits do not change the digest.
    """
    parts = []
    for name in DOCUMENT_NAMES:
        data = yaml.safe_load(documents.get(name, "")) if documents.get(name) else {}
        parts.append(json.dumps(data, sort_keys=True, separators=(",", ":")))
    blob = "\n".join(parts).encode()
    return hashlib.sha256(blob).hexdigest()


def make_experiment(
    layers_services_text: str,
    network_text: str,
    workflow_text: str,
    base_dir: Path | None = None,
) -> ExperimentConfig:
    return ExperimentConfig(
        layers_services=parse_layers_services(layers_services_text),
        network=parse_network(network_text),
        workflow=parse_workflow(workflow_text),
        documents={
            LAYERS_SERVICES_FILE: layers_services_text,
            NETWORK_FILE: network_text,
            WORKFLOW_FILE: workflow_text,
        },
        base_dir=base_dir,
    )


def load_experiment(directory: Path | str) -> ExperimentConfig:
    """Load the three documents from a directory."""
    directory = Path(directory)
    texts = {}
    for name in DOCUMENT_NAMES:
        path = directory / name
        if not path.is_file():
            raise ConfigError(f"missing document {name} in {directory}", name)
        texts[name] = path.read_text()
    return make_experiment(
        texts[LAYERS_SERVICES_FILE], texts[NETWORK_FILE], texts[WORKFLOW_FILE], base_dir=directory
    )


# ---------------------------------------------------------------------------
# cross-document validation
# ---------------------------------------------------------------------------


def validate(cfg: ExperimentConfig, catalog: Mapping[str, Any] | None = None) -> list[ValidationIssue]:
    """Check cross-document references. Empty error list means deployable.

    ``catalog`` is an optional provider profile catalog; when given, service
    profiles are checked against it. Issues are deduplicated and sorted, so
    the result is independent of declaration order (except for findings that
    are themselves about declaration order).
    """
    issues: set[ValidationIssue] = set()
    ls = cfg.layers_services
    layer_names = {layer.name for layer in ls.layers}

    for rule in cfg.network.rules:
        for name in (rule.src, rule.dst):
            if name not in layer_names:
                issues.add(
                    ValidationIssue(
                        "error",
                        f"{NETWORK_FILE}:rules",
                        f"network rule references undeclared layer {name!r}",
                    )
                )

    services = [(layer.name, svc.name) for layer, svc in ls.iter_services()]
    for task in cfg.workflow.tasks:
        sel = Selector.parse(task.hosts)
        if not any(sel.matches_service(layer, svc) for layer, svc in services):
            issues.add(
                ValidationIssue(
                    "error",
                    f"{WORKFLOW_FILE}:tasks",
                    f"task {task.id!r} selector {task.hosts!r} matches no declared service",
                )
            )

    if catalog is not None:
        for layer, svc in ls.iter_services():
            if svc.profile not in catalog:
                issues.add(
                    ValidationIssue(
                        "error",
                        f"{LAYERS_SERVICES_FILE}:layers",
                        f"service {layer.name}.{svc.name} requests unknown profile {svc.profile!r}",
                    )
                )

    for env_name, env in ls.environments.items():
        cred = env.get("credentials")
        if cred:
            cred_path = (cfg.base_dir or Path.cwd()) / cred
            if not Path(cred).is_absolute() and not cred_path.is_file() and not Path(cred).is_file():
                issues.add(
                    ValidationIssue(
                        "error",
                        f"{LAYERS_SERVICES_FILE}:environments.{env_name}",
                        f"credential file {cred!r} not found",
                    )
                )

    if not cfg.workflow.phase_tasks(Phase.LAUNCH):
        issues.add(
            ValidationIssue(
                "warning", f"{WORKFLOW_FILE}:tasks", "launch phase is empty (deploy-only experiment)"
            )
        )

    return sorted(issues, key=lambda i: (i.severity, i.location, i.message))


def validate_documents(
    layers_services_text: str,
    network_text: str,
    workflow_text: str,
    catalog: Mapping[str, Any] | None = None,
) -> tuple[ExperimentConfig | None, list[ValidationIssue]]:
    """Parse and validate, folding parse failures into the issue list."""
    try:
        cfg = make_experiment(layers_services_text, network_text, workflow_text)
    except ConfigError as exc:
        return None, [ValidationIssue("error", exc.location or "parse", str(exc))]
    return cfg, validate(cfg, catalog)
