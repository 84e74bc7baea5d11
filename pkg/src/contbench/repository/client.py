"""HTTP client for the artifact repository API."""

from __future__ import annotations

import io
import tarfile
import time
from pathlib import Path

import httpx

from .store import RepositoryError


class RepositoryClient:
    def __init__(self, base_url: str, token: str | None = None, timeout: float = 30.0):
        headers = {"authorization": f"Bearer {token}"} if token else {}
        self._http = httpx.Client(base_url=base_url.rstrip("/"), headers=headers, timeout=timeout)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "RepositoryClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _check(self, response: httpx.Response) -> dict | list:
        if response.status_code >= 400:
            try:
                message = response.json().get("error", response.text)
            except ValueError:
                message = response.text
            raise RepositoryError(message, status=response.status_code)
        return response.json()

    def list_artifacts(self, query: str | None = None) -> list[dict]:
        params = {"query": query} if query else None
        return self._check(self._http.get("/artifacts", params=params))

    def get_artifact(self, artifact_id: str) -> dict:
        return self._check(self._http.get(f"/artifacts/{artifact_id}"))

    def create_artifact(self, title: str, **meta) -> dict:
        return self._check(self._http.post("/artifacts", json={"title": title, **meta}))

    def add_version(self, artifact_id: str, data: bytes) -> dict:
        return self._check(
            self._http.post(
                f"/artifacts/{artifact_id}/versions",
                content=data,
                headers={"content-type": "application/gzip"},
            )
        )

    def download(self, artifact_id: str, version_id: int) -> bytes:
        response = self._http.get(f"/artifacts/{artifact_id}/versions/{version_id}/download")
        if response.status_code >= 400:
            self._check(response)
        return response.content

    def download_to(self, artifact_id: str, version_id: int, dest: Path) -> Path:
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(self.download(artifact_id, version_id))
        return dest

    def extract_to(self, artifact_id: str, version_id: int, workspace: Path) -> Path:
        """Download a version and unpack it into ``workspace``."""
        data = self.download(artifact_id, version_id)
        workspace.mkdir(parents=True, exist_ok=True)
        with tarfile.open(fileobj=io.BytesIO(data), mode="r:gz") as tar:
            for member in tar:
                if member.name.startswith("/") or ".." in Path(member.name).parts:
                    raise RepositoryError(f"archive member {member.name!r} escapes the workspace")
            tar.extractall(workspace)
        return workspace

    def launch(self, artifact_id: str, version_id: int) -> dict:
        return self._check(self._http.post(f"/artifacts/{artifact_id}/versions/{version_id}/launch"))

    def run_status(self, handle_id: str) -> dict:
        return self._check(self._http.get(f"/runs/{handle_id}"))

    def wait_for_run(self, handle_id: str, poll_s: float = 0.2, timeout_s: float = 60.0) -> dict:
        deadline = time.monotonic() + timeout_s
        while True:
            status = self.run_status(handle_id)
            if status["state"] in ("finished", "failed"):
                return status
            if time.monotonic() > deadline:
                raise RepositoryError(f"run {handle_id} did not finish within {timeout_s}s", status=504)
            time.sleep(poll_s)
