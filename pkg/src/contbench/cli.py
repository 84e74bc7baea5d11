"""Command-line entry point.

Exit codes are stable for scripting: 0 success, 2 validation error,
3 provider error, 4 execution failure, 5 repository error. Results go to
stdout; diagnostics go to stderr as a single ``error <module>: message``
line.
"""

from __future__ import annotations

import json
import statistics
from pathlib import Path

import click

from . import campaign as camp
from . import netem
from .config import DOCUMENT_NAMES, ConfigError, load_experiment, validate, validate_documents
from .engine import ExecutionError, load_run_meta, load_samples
from .metrics import MetricsError, compare_runs, mean_ci95
from .providers import (
    ProviderError,
    load_profiles,
    make_provider,
    map_services,
    requests_for,
)
from .repository import ArtifactStore, RepositoryClient, RepositoryError, create_app
from .repository.pack import metadata_from_archive, pack_directory

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PROVIDER = 3
EXIT_EXECUTION = 4
EXIT_REPOSITORY = 5

_ERROR_CODES = (
    (ConfigError, "config", EXIT_VALIDATION),
    (MetricsError, "metrics", EXIT_VALIDATION),
    (ProviderError, "provider", EXIT_PROVIDER),
    (ExecutionError, "exec", EXIT_EXECUTION),
    (RepositoryError, "repo", EXIT_REPOSITORY),
)


def _fail(exc: Exception) -> "click.exceptions.Exit":
    for etype, module, code in _ERROR_CODES:
        if isinstance(exc, etype):
            click.echo(f"error {module}: {exc}", err=True)
            return click.exceptions.Exit(code)
    click.echo(f"error internal: {exc}", err=True)
    return click.exceptions.Exit(EXIT_EXECUTION)


def _catalog(profiles: str | None):
    return load_profiles(profiles) if profiles else None


@click.group()
def cli():
    """Edge-to-Cloud experiment runner, artifact repository, and replication scorer."""


# ---------------------------------------------------------------------------
# experiment verbs
# ---------------------------------------------------------------------------


@cli.command("validate")
@click.option("--dir", "directory", default=".", show_default=True, help="Experiment directory.")
@click.option("--profiles", default=None, help="Optional profiles.yaml catalog override.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable issue list.")
def validate_cmd(directory: str, profiles: str | None, as_json: bool):
    """Parse and cross-check the three experiment documents."""
    try:
        catalog = _catalog(profiles) or make_provider("simulated").catalog
        texts = []
        for name in DOCUMENT_NAMES:
            path = Path(directory) / name
            if not path.is_file():
                raise ConfigError(f"missing document {name} in {directory}")
            texts.append(path.read_text())
        _, issues = validate_documents(*texts, catalog=catalog)
    except (ConfigError, ProviderError) as exc:
        raise _fail(exc) from None
    if as_json:
        click.echo(json.dumps([i.to_dict() for i in issues], indent=2))
    else:
        for issue in issues:
            click.echo(issue.render())
    errors = [i for i in issues if i.severity == "error"]
    if errors:
        click.echo(f"error config: {len(errors)} validation error(s) in {directory}", err=True)
        raise click.exceptions.Exit(EXIT_VALIDATION)
    if not as_json:
        click.echo(f"ok: {directory} is deployable")


@cli.command()
@click.option("--dir", "directory", default=".", show_default=True)
@click.option("--seed", default=None, type=int, help="Defaults to global.seed in the config.")
@click.option("--provider", "provider_kind", default=None, type=click.Choice(["simulated", "mock"]))
@click.option("--profiles", default=None)
def deploy(directory: str, seed: int | None, provider_kind: str | None, profiles: str | None):
    """Lease hosts, map services, and print the deployment plan (no execution)."""
    try:
        cfg = load_experiment(directory)
        seed = seed if seed is not None else int(cfg.layers_services.globals.get("seed", "0"))
        catalog = _catalog(profiles)
        provider = make_provider(provider_kind or _config_provider_kind(cfg), catalog, seed=seed)
        issues = [i for i in validate(cfg, provider.catalog) if i.severity == "error"]
        if issues:
            raise ConfigError("; ".join(i.render() for i in issues))
        grants = [provider.acquire(req) for req in requests_for(cfg.layers_services)]
        try:
            plan = netem.attach_links(map_services(cfg.layers_services, grants), cfg.network)
            click.echo(plan.to_json())
        finally:
            for grant in grants:
                provider.release(grant)
    except (ConfigError, ProviderError, ExecutionError) as exc:
        raise _fail(exc) from None


def _config_provider_kind(cfg) -> str:
    kinds = {env.get("kind", "simulated") for env in cfg.layers_services.environments.values()}
    if len(kinds) > 1:
        # mixed-testbed experiments lease from several providers; the built-in
        # desk-scale path needs a single kind, so require an explicit flag
        raise ProviderError(f"config uses multiple provider kinds {sorted(kinds)}; pass --provider")
    return kinds.pop()


@cli.command()
@click.option("--dir", "directory", default=".", show_default=True)
@click.option("--seed", default=None, type=int, help="Defaults to global.seed in the config.")
@click.option("--provider", "provider_kind", default=None, type=click.Choice(["simulated", "mock"]))
@click.option("--out", "out_root", default="results", show_default=True)
@click.option("--profiles", default=None)
def run(directory: str, seed: int | None, provider_kind: str | None, out_root: str, profiles: str | None):
    """Run the experiment end to end: validate, lease, execute, collect."""
    try:
        cfg = load_experiment(directory)
        seed = seed if seed is not None else int(cfg.layers_services.globals.get("seed", "0"))
        kind = provider_kind or _config_provider_kind(cfg)
        out = camp.run_experiment(cfg, seed, out_root, provider=kind, catalog=_catalog(profiles))
        click.echo(str(out))
    except (ConfigError, ProviderError, ExecutionError) as exc:
        raise _fail(exc) from None


@cli.command()
@click.option("--run", "run_dir", required=True, help="Results directory of one run.")
@click.option("--metric", default=None, help="Only this metric.")
@click.option("--json", "as_json", is_flag=True)
@click.option("--csv", "as_csv", is_flag=True, help="Figure data as CSV rows.")
def report(run_dir: str, metric: str | None, as_json: bool, as_csv: bool):
    """Summarize a run: per-metric mean and 95% confidence interval."""
    try:
        meta = load_run_meta(run_dir)
        samples = load_samples(run_dir)
    except ExecutionError as exc:
        raise _fail(exc) from None
    by_metric: dict[str, list[float]] = {}
    units: dict[str, str] = {}
    for s in samples:
        if metric and s.metric != metric:
            continue
        by_metric.setdefault(s.metric, []).append(s.value)
        units[s.metric] = s.unit
    if metric and not by_metric:
        click.echo(f"error exec: run has no samples for metric {metric!r}", err=True)
        raise click.exceptions.Exit(EXIT_EXECUTION)

    rows = []
    for name in sorted(by_metric):
        values = by_metric[name]
        if len(values) >= 2:
            stat = mean_ci95(values)
            rows.append((name, stat.mean, stat.ci95_half_width, units[name], stat.n))
        else:
            rows.append((name, statistics.fmean(values), float("nan"), units[name], len(values)))

    if as_json:
        click.echo(
            json.dumps(
                {
                    "run": meta,
                    "metrics": [
                        {"metric": n, "mean": m, "ci95_half_width": hw, "unit": u, "n": k}
                        for n, m, hw, u, k in rows
                    ],
                },
                indent=2,
            )
        )
        return
    if as_csv:
        click.echo("metric,mean,ci95_half_width,unit,n")
        for n, m, hw, u, k in rows:
            click.echo(f"{n},{m!r},{hw!r},{u},{k}")
        return

    click.echo(f"run {meta['run_id']}  label={meta.get('label', '')}  status={meta['status']}")
    width = max((len(r[0]) for r in rows), default=6)
    scale = {u: max(r[1] for r in rows if r[3] == u) for u in {r[3] for r in rows}}
    for n, m, hw, u, k in rows:
        bar = "#" * max(1, round(30 * m / scale[u])) if scale[u] > 0 else ""
        click.echo(f"{n.ljust(width)}  {m:12.4f} ±{hw:10.4f} {u:4} n={k:<4} {bar}")


@cli.command()
@click.option("--a", "campaign_a", required=True, help="Original campaign directory.")
@click.option("--b", "campaign_b", required=True, help="Replication campaign directory.")
@click.option("--json", "as_json", is_flag=True)
def compare(campaign_a: str, campaign_b: str, as_json: bool):
    """Score campaign B as a replication of campaign A."""
    try:
        pairing = camp.build_default_pairing(campaign_a, campaign_b)
        result = compare_runs(campaign_a, campaign_b, pairing)
    except (MetricsError, ExecutionError) as exc:
        raise _fail(exc) from None
    click.echo(result.to_json() if as_json else result.render())


# ---------------------------------------------------------------------------
# repository verbs
# ---------------------------------------------------------------------------


@cli.command()
@click.option("--dir", "directory", required=True)
@click.option("--out", "out_path", required=True)
def package(directory: str, out_path: str):
    """Pack an experiment directory into a normalized .tar.gz artifact."""
    try:
        data = pack_directory(directory)
    except RepositoryError as exc:
        raise _fail(exc) from None
    Path(out_path).write_bytes(data)
    click.echo(f"{out_path} ({len(data)} bytes)")


@cli.command()
@click.option("--file", "file_path", required=True)
@click.option("--url", envvar="CB_REPO_URL", required=True, help="Repository URL [env: CB_REPO_URL].")
@click.option("--token", envvar="CB_REPO_TOKEN", default=None, help="Bearer token [env: CB_REPO_TOKEN].")
@click.option("--artifact", "artifact_id", default=None, help="Add a version to an existing artifact.")
@click.option("--title", default=None, help="Override the artifact title.")
def publish(file_path: str, url: str, token: str | None, artifact_id: str | None, title: str | None):
    """Upload an archive; creates the artifact unless --artifact is given."""
    try:
        data = Path(file_path).read_bytes()
        meta = metadata_from_archive(data)
        with RepositoryClient(url, token) as client:
            if artifact_id is None:
                meta.setdefault("title", Path(file_path).name.removesuffix(".tar.gz"))
                if title:
                    meta["title"] = title
                created = client.create_artifact(**meta)
                artifact_id = created["artifact_id"]
            version = client.add_version(artifact_id, data)
        click.echo(json.dumps({"artifact_id": artifact_id, "version_id": version["version_id"]}))
    except (RepositoryError, OSError) as exc:
        raise _fail(exc if isinstance(exc, RepositoryError) else RepositoryError(str(exc))) from None


@cli.command()
@click.option("--url", envvar="CB_REPO_URL", required=True)
@click.option("--token", envvar="CB_REPO_TOKEN", default=None)
@click.option("--artifact", "artifact_id", required=True)
@click.option("--version", "version_id", required=True, type=int)
@click.option("--workspace", required=True)
@click.option("--run/--no-run", "and_run", default=False, help="Chain into execution if the workspace holds an experiment.")
@click.option("--seed", default=0, type=int)
def launch(url: str, token: str | None, artifact_id: str, version_id: int, workspace: str, and_run: bool, seed: int):
    """Download a version into a fresh local workspace (optionally run it)."""
    ws = Path(workspace)
    try:
        if ws.exists() and any(ws.iterdir()):
            raise RepositoryError(f"workspace {ws} is not empty")
        with RepositoryClient(url, token) as client:
            client.extract_to(artifact_id, version_id, ws)
        click.echo(str(ws))
    except RepositoryError as exc:
        raise _fail(exc) from None
    if and_run:
        try:
            cfg = load_experiment(ws)
            out = camp.run_experiment(cfg, seed, ws / "results")
            click.echo(str(out))
        except (ConfigError, ProviderError, ExecutionError) as exc:
            raise _fail(exc) from None


@cli.command()
@click.option("--root", "root", required=True, help="Repository storage directory.")
@click.option("--addr", default="127.0.0.1:8080", show_default=True)
@click.option("--token", envvar="CB_REPO_TOKEN", default=None)
@click.option("--size-limit", default=None, type=int, help="Archive size limit in bytes.")
@click.option("--workspace", default=None, help="Where launched artifacts are extracted.")
@click.option("--with-ui", is_flag=True, help="Serve the browser portal as static assets.")
@click.option("--ui-dir", default="frontend/dist", show_default=True)
def serve(root: str, addr: str, token: str | None, size_limit: int | None, workspace: str | None, with_ui: bool, ui_dir: str):
    """Run the artifact repository service until interrupted."""
    import uvicorn

    from .repository.store import DEFAULT_SIZE_LIMIT

    try:
        host, _, port = addr.partition(":")
        if not port:
            raise RepositoryError(f"--addr must be HOST:PORT, got {addr!r}")
        ui = Path(ui_dir) if with_ui else None
        if ui is not None and not ui.is_dir():
            raise RepositoryError(f"UI directory {ui} not found; build the frontend first")
        store = ArtifactStore(root, size_limit=size_limit or DEFAULT_SIZE_LIMIT)
        app = create_app(store, token=token, workspace_root=workspace, ui_dir=ui)
    except RepositoryError as exc:
        raise _fail(exc) from None
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")


@cli.command()
@click.option("--root", "root", required=True)
def fsck(root: str):
    """Verify every stored blob against its recorded content hash."""
    try:
        problems = ArtifactStore(root).fsck()
    except RepositoryError as exc:
        raise _fail(exc) from None
    for line in problems:
        click.echo(line)
    if problems:
        click.echo(f"error repo: {len(problems)} integrity problem(s)", err=True)
        raise click.exceptions.Exit(EXIT_REPOSITORY)
    click.echo("ok: no hash mismatches")


def main():
    cli(prog_name="contbench")


if __name__ == "__main__":
    main()
