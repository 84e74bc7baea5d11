"""Filesystem persistence for shared experiment artifacts.

Layout under the store root:

    blobs/<sha256>    archive bytes, content addressed (written once)
    journal.jsonl     append-only metadata event log

The in-memory index is rebuilt by replaying the journal on startup, so a
process restart (or crash after an append) reconstructs exactly the
persisted state without an external database. Metadata mutations are
serialized behind a single writer lock; blob writes are idempotent by hash.
"""

from __future__ import annotations

import gzip
import hashlib
import io
import json
import tarfile
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

DEFAULT_SIZE_LIMIT = 500_000_000  # bytes, per version and per artifact total


class RepositoryError(RuntimeError):
    """Store-level failure; ``status`` mirrors the HTTP code the API returns."""

    def __init__(self, message: str, status: int = 400):
        self.status = status
        super().__init__(message)


class NotFoundError(RepositoryError):
    def __init__(self, message: str):
        super().__init__(message, status=404)


class SizeLimitError(RepositoryError):
    def __init__(self, message: str):
        super().__init__(message, status=413)


@dataclass(frozen=True)
class ArtifactVersion:
    version_id: int
    created_at: float
    content_hash: str
    size_bytes: int

    def to_dict(self) -> dict:
        return {
            "version_id": self.version_id,
            "created_at": self.created_at,
            "content_hash": self.content_hash,
            "size_bytes": self.size_bytes,
        }


@dataclass
class Artifact:
    artifact_id: str
    title: str
    authors: list[str] = field(default_factory=list)
    description: str = ""
    tags: list[str] = field(default_factory=list)
    visibility: str = "public"
    links: list[str] = field(default_factory=list)
    created_at: float = 0.0
    versions: list[ArtifactVersion] = field(default_factory=list)

    def to_dict(self, with_versions: bool = True) -> dict:
        data = {
            "artifact_id": self.artifact_id,
            "title": self.title,
            "authors": list(self.authors),
            "description": self.description,
            "tags": list(self.tags),
            "visibility": self.visibility,
            "links": list(self.links),
            "created_at": self.created_at,
        }
        if with_versions:
            data["versions"] = [v.to_dict() for v in self.versions]
        else:
            data["latest_version"] = self.versions[-1].version_id if self.versions else None
        return data


def _check_archive(data: bytes) -> None:
    """Reject bytes that are not a well-formed gzip-compressed tar archive."""
    try:
        with tarfile.open(fileobj=io.BytesIO(data), mode="r:gz") as tar:
            for member in tar:
                name = member.name
                if name.startswith("/") or ".." in Path(name).parts:
                    raise RepositoryError(f"archive member {name!r} escapes the extraction root")
    except (tarfile.TarError, gzip.BadGzipFile, EOFError, OSError) as exc:
        raise RepositoryError(f"not a valid .tar.gz archive: {exc}") from exc


class ArtifactStore:
    def __init__(self, root: Path | str, size_limit: int = DEFAULT_SIZE_LIMIT):
        self.root = Path(root)
        self.size_limit = size_limit
        self.blob_dir = self.root / "blobs"
        self.journal_path = self.root / "journal.jsonl"
        self.blob_dir.mkdir(parents=True, exist_ok=True)
        self._artifacts: dict[str, Artifact] = {}
        self._lock = threading.Lock()
        self._replay()

    # -- journal ------------------------------------------------------------

    def _replay(self) -> None:
        if not self.journal_path.is_file():
            return
        with self.journal_path.open() as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                self._apply(json.loads(line))

    def _apply(self, event: dict) -> None:
        if event["op"] == "create":
            a = event["artifact"]
            self._artifacts[a["artifact_id"]] = Artifact(
                artifact_id=a["artifact_id"],
                title=a["title"],
                authors=list(a.get("authors", [])),
                description=a.get("description", ""),
                tags=list(a.get("tags", [])),
                visibility=a.get("visibility", "public"),
                links=list(a.get("links", [])),
                created_at=a.get("created_at", 0.0),
            )
        elif event["op"] == "version":
            v = event["version"]
            self._artifacts[event["artifact_id"]].versions.append(
                ArtifactVersion(
                    version_id=v["version_id"],
                    created_at=v.get("created_at", 0.0),
                    content_hash=v["content_hash"],
                    size_bytes=v["size_bytes"],
                )
            )
        else:
            raise RepositoryError(f"unknown journal event {event['op']!r}")

    def _append(self, event: dict) -> None:
        with self.journal_path.open("a") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()

    # -- operations ---------------------------------------------------------

    def create_artifact(
        self,
        title: str,
        authors: list[str] | None = None,
        description: str = "",
        tags: list[str] | None = None,
        visibility: str = "public",
        links: list[str] | None = None,
    ) -> Artifact:
        if not title or not title.strip():
            raise RepositoryError("artifact title must be non-empty")
        if visibility not in ("public", "private"):
            raise RepositoryError(f"visibility must be public or private, got {visibility!r}")
        artifact = Artifact(
            artifact_id=str(uuid.uuid4()),
            title=title.strip(),
            authors=list(authors or []),
            description=description,
            tags=list(tags or []),
            visibility=visibility,
            links=list(links or []),
            created_at=time.time(),
        )
        with self._lock:
            self._append({"op": "create", "artifact": artifact.to_dict(with_versions=False)})
            self._artifacts[artifact.artifact_id] = artifact
        return artifact

    def get(self, artifact_id: str, include_private: bool = False) -> Artifact:
        artifact = self._artifacts.get(artifact_id)
        if artifact is None or (artifact.visibility == "private" and not include_private):
            raise NotFoundError(f"artifact {artifact_id!r} not found")
        return artifact

    def list_artifacts(self, query: str | None = None, include_private: bool = False) -> list[Artifact]:
        """Artifacts matching the tag/text filter, newest first."""
        out = []
        for artifact in self._artifacts.values():
            if artifact.visibility == "private" and not include_private:
                continue
            if query:
                haystack = " ".join([artifact.title, artifact.description, *artifact.tags]).lower()
                if query.lower() not in haystack:
                    continue
            out.append(artifact)
        out.sort(key=lambda a: (a.created_at, a.artifact_id), reverse=True)
        return out

    def add_version(self, artifact_id: str, data: bytes) -> ArtifactVersion:
        """Store an archive as the next version; duplicate content shares one blob."""
        artifact = self.get(artifact_id, include_private=True)
        size = len(data)
        if size > self.size_limit:
            raise SizeLimitError(
                f"archive is {size} bytes, exceeds the {self.size_limit} byte limit"
            )
        _check_archive(data)
        content_hash = hashlib.sha256(data).hexdigest()
        with self._lock:
            known = {v.content_hash: v.size_bytes for v in artifact.versions}
            total = sum(known.values())
            if content_hash not in known and total + size > self.size_limit:
                raise SizeLimitError(
                    f"artifact total would reach {total + size} bytes, "
                    f"exceeds the {self.size_limit} byte limit"
                )
            blob = self.blob_dir / content_hash
            if not blob.exists():
                tmp = blob.with_suffix(".tmp")
                tmp.write_bytes(data)
                tmp.rename(blob)
            version = ArtifactVersion(
                version_id=(artifact.versions[-1].version_id + 1) if artifact.versions else 1,
                created_at=time.time(),
                content_hash=content_hash,
                size_bytes=size,
            )
            self._append({"op": "version", "artifact_id": artifact_id, "version": version.to_dict()})
            artifact.versions.append(version)
        return version

    def get_version(self, artifact_id: str, version_id: int, include_private: bool = False) -> ArtifactVersion:
        artifact = self.get(artifact_id, include_private=include_private)
        for version in artifact.versions:
            if version.version_id == version_id:
                return version
        raise NotFoundError(f"artifact {artifact_id!r} has no version {version_id}")

    def open_blob(self, version: ArtifactVersion) -> bytes:
        """Read a version's bytes, re-verifying the content hash."""
        blob = self.blob_dir / version.content_hash
        if not blob.is_file():
            raise RepositoryError(f"blob {version.content_hash} is missing", status=500)
        data = blob.read_bytes()
        if hashlib.sha256(data).hexdigest() != version.content_hash:
            raise RepositoryError(f"blob {version.content_hash} failed integrity check", status=500)
        return data

    def extract_version(self, artifact_id: str, version_id: int, workspace: Path) -> None:
        data = self.open_blob(self.get_version(artifact_id, version_id, include_private=True))
        workspace.mkdir(parents=True, exist_ok=True)
        with tarfile.open(fileobj=io.BytesIO(data), mode="r:gz") as tar:
            for member in tar:
                name = member.name
                if name.startswith("/") or ".." in Path(name).parts:
                    raise RepositoryError(f"archive member {name!r} escapes the extraction root")
            tar.extractall(workspace)

    def fsck(self) -> list[str]:
        """Re-hash every referenced blob; returns a line per problem found."""
        problems = []
        for artifact in self._artifacts.values():
            for version in artifact.versions:
                blob = self.blob_dir / version.content_hash
                where = f"{artifact.artifact_id} v{version.version_id}"
                if not blob.is_file():
                    problems.append(f"{where}: blob {version.content_hash} missing")
                    continue
                actual = hashlib.sha256(blob.read_bytes()).hexdigest()
                if actual != version.content_hash:
                    problems.append(
                        f"{where}: blob hash mismatch (expected {version.content_hash}, got {actual})"
                    )
        return problems
