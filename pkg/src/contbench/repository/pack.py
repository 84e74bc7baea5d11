"""Deterministic packaging of experiment directories into .tar.gz archives.

Archives are normalized (sorted member order, fixed mtime, numeric owner
zero) so packaging the same tree twice yields byte-identical bytes, which
makes content addressing meaningful across machines.

A file named ``artifact.yaml`` at the directory root, if present, carries
the artifact metadata (title, authors, description, tags, visibility,
links) used when publishing.
"""

from __future__ import annotations

import gzip
import io
import tarfile
from pathlib import Path

import yaml

from .store import RepositoryError

METADATA_FILE = "artifact.yaml"


def pack_directory(src: Path | str) -> bytes:
    src = Path(src)
    if not src.is_dir():
        raise RepositoryError(f"{src} is not a directory")
    members = sorted(p for p in src.rglob("*"))
    raw = io.BytesIO()
    with tarfile.open(fileobj=raw, mode="w", format=tarfile.PAX_FORMAT) as tar:
        for path in members:
            info = tar.gettarinfo(path, arcname=str(path.relative_to(src)))
            info.uid = info.gid = 0
            info.uname = info.gname = ""
            info.mtime = 0
            info.mode = 0o755 if info.isdir() or (info.mode & 0o100) else 0o644
            if info.isfile():
                with path.open("rb") as fh:
                    tar.addfile(info, fh)
            else:
                tar.addfile(info)
    return gzip.compress(raw.getvalue(), mtime=0)


def load_metadata(src: Path | str) -> dict:
    """Artifact metadata from ``artifact.yaml``, defaulting title to the dir name."""
    src = Path(src)
    meta_path = src / METADATA_FILE
    meta: dict = {}
    if meta_path.is_file():
        loaded = yaml.safe_load(meta_path.read_text()) or {}
        if not isinstance(loaded, dict):
            raise RepositoryError(f"{meta_path} must be a YAML mapping")
        meta = loaded
    meta.setdefault("title", src.resolve().name)
    return meta


def metadata_from_archive(data: bytes) -> dict:
    """Read ``artifact.yaml`` out of packed archive bytes, if present."""
    with tarfile.open(fileobj=io.BytesIO(data), mode="r:gz") as tar:
        try:
            member = tar.getmember(METADATA_FILE)
        except KeyError:
            return {}
        fh = tar.extractfile(member)
        if fh is None:
            return {}
        loaded = yaml.safe_load(fh.read().decode()) or {}
        return loaded if isinstance(loaded, dict) else {}
