"""Shareable-artifact repository: content-addressed store, REST API, client."""

from .client import RepositoryClient
from .service import RunHandle, create_app
from .store import (
    Artifact,
    ArtifactStore,
    ArtifactVersion,
    DEFAULT_SIZE_LIMIT,
    NotFoundError,
    RepositoryError,
    SizeLimitError,
)

__all__ = [
    "Artifact",
    "ArtifactStore",
    "ArtifactVersion",
    "DEFAULT_SIZE_LIMIT",
    "NotFoundError",
    "RepositoryClient",
    "RepositoryError",
    "RunHandle",
    "SizeLimitError",
    "create_app",
]
