"""End-to-end orchestration: one experiment run, and multi-run campaigns.

``run_experiment`` is the single chain behind the CLI's ``run`` verb:
validate, lease hosts, map services, build the link table, execute the
workflow, write the results archive, release the lease.

A campaign is a directory of such archives. ``run_standard_campaign``
produces the four-run grid the bundled benchmark is studied with (two
processing approaches at two bandwidths), and ``build_default_pairing``
derives the report rows a replication comparison is scored on.
"""

from __future__ import annotations

import shutil
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import yaml

from . import netem
from .config import (
    ConfigError,
    ExperimentConfig,
    LAYERS_SERVICES_FILE,
    NETWORK_FILE,
    WORKFLOW_FILE,
    load_experiment,
    make_experiment,
    validate,
)
from .engine import ExecutionError, collect_results, execute, load_run_meta
from .metrics import MetricsError, PairSpec
from .providers import HostProfile, Provider, make_provider, map_services, requests_for


def run_experiment(
    cfg: ExperimentConfig,
    seed: int,
    out_root: Path | str,
    provider: Provider | str = "simulated",
    catalog: Mapping[str, HostProfile] | None = None,
    keep_workspace: bool = False,
) -> Path:
    """Run one experiment end to end and return its results directory."""
    if isinstance(provider, str):
        provider = make_provider(provider, catalog=catalog, seed=seed)
    issues = validate(cfg, provider.catalog)
    errors = [i for i in issues if i.severity == "error"]
    if errors:
        raise ConfigError("; ".join(i.render() for i in errors))

    grants = [provider.acquire(req) for req in requests_for(cfg.layers_services)]
    workspace = Path(tempfile.mkdtemp(prefix="contbench-ws-"))
    try:
        plan = netem.attach_links(map_services(cfg.layers_services, grants), cfg.network)
        run = execute(plan, cfg.workflow, seed, config=cfg, workspace=workspace)
        out = collect_results(run, out_root)
        if run.status.value == "failed":
            raise ExecutionError(f"run {run.run_id} failed; partial results in {out}")
        return out
    finally:
        for grant in grants:
            provider.release(grant)
        if not keep_workspace:
            shutil.rmtree(workspace, ignore_errors=True)


# ---------------------------------------------------------------------------
# campaign variants
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Variant:
    """One cell of a campaign grid, patched onto a base experiment."""

    label: str
    group: str
    approach: str
    rate: str  # e.g. "15Kbit"
    edge_profile: str | None = None
    cloud_profile: str | None = None


def variant_documents(base: ExperimentConfig, variant: Variant) -> dict[str, str]:
    """Rewrite the base documents for one campaign cell.

    Patches every workload-carrying service's ``approach`` (and optionally
    profile), the first network rule's ``rate``, and the global label/group.
    """
    ls = yaml.safe_load(base.documents[LAYERS_SERVICES_FILE])
    for layer in ls.get("layers", []):
        for svc in layer.get("services", []):
            params = svc.get("params") or {}
            if "approach" in params:
                params["approach"] = variant.approach
                svc["params"] = params
                if variant.edge_profile:
                    svc["profile"] = variant.edge_profile
            elif variant.cloud_profile:
                svc["profile"] = variant.cloud_profile
    ls.setdefault("global", {})
    ls["global"]["label"] = variant.label
    ls["global"]["group"] = variant.group

    net = yaml.safe_load(base.documents[NETWORK_FILE])
    rules = net.get("rules") or []
    if not rules:
        raise ConfigError("base experiment has no network rule to vary")
    rules[0]["rate"] = variant.rate

    return {
        LAYERS_SERVICES_FILE: yaml.safe_dump(ls, sort_keys=False),
        NETWORK_FILE: yaml.safe_dump(net, sort_keys=False),
        WORKFLOW_FILE: base.documents[WORKFLOW_FILE],
    }


def standard_variants(
    rates: Mapping[str, str] = {"15k": "15Kbit", "25k": "25Kbit"},
    edge_profile: str | None = None,
    cloud_profile: str | None = None,
) -> list[Variant]:
    """The 2x2 grid: {cloud_centric, hybrid} x bandwidth groups."""
    out = []
    for group, rate in rates.items():
        for approach in ("cloud_centric", "hybrid"):
            out.append(
                Variant(
                    label=f"{approach}-{group}",
                    group=group,
                    approach=approach,
                    rate=rate,
                    edge_profile=edge_profile,
                    cloud_profile=cloud_profile,
                )
            )
    return out


def run_campaign(
    base_dir: Path | str,
    out_root: Path | str,
    variants: list[Variant],
    seed: int = 42,
    provider_kind: str = "simulated",
    catalog: Mapping[str, HostProfile] | None = None,
) -> Path:
    """Run every variant of a base experiment into one campaign directory."""
    base = load_experiment(base_dir)
    out_root = Path(out_root)
    out_root.mkdir(parents=True, exist_ok=True)
    for variant in variants:
        docs = variant_documents(base, variant)
        cfg = make_experiment(
            docs[LAYERS_SERVICES_FILE], docs[NETWORK_FILE], docs[WORKFLOW_FILE], base_dir=base.base_dir
        )
        run_experiment(cfg, seed, out_root, provider=provider_kind, catalog=catalog)
    return out_root


def campaign_runs(campaign_dir: Path | str) -> dict[str, dict]:
    """Map run label -> run metadata for every archive in a campaign directory."""
    out: dict[str, dict] = {}
    for child in sorted(Path(campaign_dir).iterdir()):
        if not (child / "run.json").is_file():
            continue
        meta = load_run_meta(child)
        label = meta.get("label", child.name)
        if label in out:
            raise MetricsError(f"campaign {campaign_dir} has two runs labeled {label!r}")
        meta["path"] = str(child)
        out[label] = meta
    return out


def build_default_pairing(
    campaign_a: Path | str, campaign_b: Path | str
) -> dict[str, PairSpec]:
    """Derive the standard report rows from two campaigns' run labels.

    Processing time gets one row per bandwidth group; the data-volume and
    resource metrics are taken from the first group (their orderings do not
    depend on the emulated bandwidth). Treatment 1 is cloud-centric,
    treatment 2 is hybrid.
    """
    runs_a = campaign_runs(campaign_a)
    runs_b = campaign_runs(campaign_b)
    complete: set[str] = set()
    for label, meta in runs_a.items():
        if label not in runs_b:
            continue
        group = meta.get("group", "")
        cc, hy = f"cloud_centric-{group}", f"hybrid-{group}"
        if cc in runs_a and hy in runs_a and cc in runs_b and hy in runs_b:
            complete.add(group)
    groups = sorted(complete)
    if not groups:
        raise MetricsError(
            "campaigns share no complete bandwidth group "
            "(need cloud_centric-<group> and hybrid-<group> runs on both sides)"
        )
    pairing: dict[str, PairSpec] = {}
    for group in groups:
        pairing[f"processing_time_{group}"] = PairSpec(
            "processing_time_s", f"cloud_centric-{group}", f"hybrid-{group}"
        )
    first = groups[0]
    cc, hy = f"cloud_centric-{first}", f"hybrid-{first}"
    pairing["bytes_to_cloud"] = PairSpec("bytes_to_cloud", cc, hy)
    pairing["cpu_pct"] = PairSpec("cpu_pct", cc, hy)
    pairing["mem_gb"] = PairSpec("mem_gb", cc, hy)
    return pairing
