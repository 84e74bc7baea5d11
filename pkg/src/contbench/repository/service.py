"""REST API over the artifact store, plus one-click launches.

Reads are public; mutations require the configured bearer token. Launching a
version extracts it into a fresh workspace and, when the workspace contains
the three experiment documents, runs it on the simulated provider in a
background thread, so a browser can poll the run straight to ``finished``.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..config import DOCUMENT_NAMES
from .store import ArtifactStore, RepositoryError

RUN_STATES = ("created", "extracted", "running", "finished", "failed")


@dataclass
class RunHandle:
    handle_id: str
    artifact_id: str
    version_id: int
    workspace_path: Path
    state: str = "created"
    repetition: int = 0
    total_repetitions: int = 0
    error: str = ""
    updated_at: float = field(default_factory=time.time)

    def to_dict(self) -> dict:
        return {
            "handle_id": self.handle_id,
            "artifact_id": self.artifact_id,
            "version_id": self.version_id,
            "workspace_path": str(self.workspace_path),
            "state": self.state,
            "repetition": self.repetition,
            "total_repetitions": self.total_repetitions,
            "error": self.error,
            "updated_at": self.updated_at,
        }


class RunRegistry:
    """In-memory run handles; workspaces live on disk, handles do not survive restarts."""

    def __init__(self, workspace_root: Path):
        self.workspace_root = workspace_root
        self._runs: dict[str, RunHandle] = {}
        self._lock = threading.Lock()

    def create(self, artifact_id: str, version_id: int) -> RunHandle:
        handle_id = uuid.uuid4().hex[:12]
        handle = RunHandle(
            handle_id=handle_id,
            artifact_id=artifact_id,
            version_id=version_id,
            workspace_path=self.workspace_root / handle_id,
        )
        with self._lock:
            self._runs[handle_id] = handle
        return handle

    def get(self, handle_id: str) -> RunHandle | None:
        return self._runs.get(handle_id)

    def update(self, handle: RunHandle, **changes) -> None:
        with self._lock:
            for key, value in changes.items():
                setattr(handle, key, value)
            handle.updated_at = time.time()


def _execute_workspace(registry: RunRegistry, handle: RunHandle, seed: int) -> None:
    """Background run of an extracted experiment workspace (same chain as CLI run)."""
    from .. import netem
    from ..config import load_experiment
    from ..engine import collect_results, execute
    from ..providers import make_provider, map_services, requests_for

    try:
        cfg = load_experiment(handle.workspace_path)
        registry.update(handle, state="running", total_repetitions=cfg.workflow.repetitions)
        provider = make_provider("simulated", seed=seed)
        grants = [provider.acquire(req) for req in requests_for(cfg.layers_services)]
        try:
            plan = netem.attach_links(map_services(cfg.layers_services, grants), cfg.network)

            def progress(done: int, planned: int) -> None:
                registry.update(handle, repetition=done, total_repetitions=planned)

            run = execute(plan, cfg.workflow, seed, config=cfg, progress=progress)
            collect_results(run, handle.workspace_path / "results")
            if run.status.value == "failed":
                registry.update(handle, state="failed", error="run finished with failed status")
            else:
                registry.update(handle, state="finished")
        finally:
            for grant in grants:
                provider.release(grant)
    except Exception as exc:  # surface any failure through the poll API
        registry.update(handle, state="failed", error=str(exc))


def create_app(
    store: ArtifactStore,
    token: str | None = None,
    workspace_root: Path | str | None = None,
    ui_dir: Path | str | None = None,
    auto_run: bool = True,
    run_seed: int = 0,
) -> FastAPI:
    app = FastAPI(title="contbench artifact repository")
    workspace_root = Path(workspace_root) if workspace_root else store.root / "workspaces"
    workspace_root.mkdir(parents=True, exist_ok=True)
    registry = RunRegistry(workspace_root)
    app.state.store = store
    app.state.runs = registry

    def authorized(request: Request) -> bool:
        if token is None:
            return True
        header = request.headers.get("authorization", "")
        return header == f"Bearer {token}"

    def require_token(request: Request) -> JSONResponse | None:
        if not authorized(request):
            return JSONResponse({"error": "missing or invalid bearer token"}, status_code=401)
        return None

    @app.exception_handler(RepositoryError)
    async def repo_error(_request: Request, exc: RepositoryError):
        return JSONResponse({"error": str(exc)}, status_code=exc.status)

    @app.get("/artifacts")
    def list_artifacts(request: Request, query: str | None = None):
        include_private = authorized(request) and token is not None
        return [a.to_dict(with_versions=False) for a in store.list_artifacts(query, include_private)]

    @app.post("/artifacts", status_code=201)
    async def create_artifact(request: Request):
        if denied := require_token(request):
            return denied
        body = await request.json()
        artifact = store.create_artifact(
            title=body.get("title", ""),
            authors=body.get("authors"),
            description=body.get("description", ""),
            tags=body.get("tags"),
            visibility=body.get("visibility", "public"),
            links=body.get("links"),
        )
        return artifact.to_dict()

    @app.get("/artifacts/{artifact_id}")
    def get_artifact(request: Request, artifact_id: str):
        include_private = authorized(request) and token is not None
        return store.get(artifact_id, include_private).to_dict()

    @app.post("/artifacts/{artifact_id}/versions", status_code=201)
    async def add_version(request: Request, artifact_id: str):
        if denied := require_token(request):
            return denied
        declared = request.headers.get("content-length")
        if declared is not None and declared.isdigit() and int(declared) > store.size_limit:
            return JSONResponse(
                {"error": f"archive is {declared} bytes, exceeds the {store.size_limit} byte limit"},
                status_code=413,
            )
        chunks: list[bytes] = []
        received = 0
        async for chunk in request.stream():
            received += len(chunk)
            if received > store.size_limit:
                return JSONResponse(
                    {"error": f"archive exceeds the {store.size_limit} byte limit"},
                    status_code=413,
                )
            chunks.append(chunk)
        version = store.add_version(artifact_id, b"".join(chunks))
        return version.to_dict()

    @app.get("/artifacts/{artifact_id}/versions/{version_id}/download")
    def download(request: Request, artifact_id: str, version_id: int):
        include_private = authorized(request) and token is not None
        version = store.get_version(artifact_id, version_id, include_private)
        data = store.open_blob(version)
        return Response(
            content=data,
            media_type="application/gzip",
            headers={"x-content-sha256": version.content_hash},
        )

    @app.post("/artifacts/{artifact_id}/versions/{version_id}/launch", status_code=201)
    def launch(request: Request, artifact_id: str, version_id: int):
        if denied := require_token(request):
            return denied
        store.get_version(artifact_id, version_id, include_private=True)  # 404 before any work
        handle = registry.create(artifact_id, version_id)
        store.extract_version(artifact_id, version_id, handle.workspace_path)
        registry.update(handle, state="extracted")
        has_experiment = all((handle.workspace_path / name).is_file() for name in DOCUMENT_NAMES)
        if auto_run and has_experiment:
            worker = threading.Thread(
                target=_execute_workspace, args=(registry, handle, run_seed), daemon=True
            )
            worker.start()
        return handle.to_dict()

    @app.get("/runs/{handle_id}")
    def run_status(handle_id: str):
        handle = registry.get(handle_id)
        if handle is None:
            return JSONResponse({"error": f"run {handle_id!r} not found"}, status_code=404)
        return handle.to_dict()

    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
