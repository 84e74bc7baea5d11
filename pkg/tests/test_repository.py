from __future__ import annotations

import hashlib
import io
import tarfile
import time
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from contbench.repository import (
    ArtifactStore,
    NotFoundError,
    RepositoryError,
    SizeLimitError,
    create_app,
)
from contbench.repository.pack import load_metadata, metadata_from_archive, pack_directory


def targz(files: dict[str, str]) -> bytes:
    raw = io.BytesIO()
    with tarfile.open(fileobj=raw, mode="w:gz") as tar:
        for name, text in files.items():
            data = text.encode()
            info = tarfile.TarInfo(name)
            info.size = len(data)
            tar.addfile(info, io.BytesIO(data))
    return raw.getvalue()


ARCHIVE = targz({"hello.txt": "hi\n"})


class TestStore:
    def test_create_and_get_round_trip(self, tmp_path):
        store = ArtifactStore(tmp_path)
        artifact = store.create_artifact("savanna-experiment", tags=["edge"], visibility="public")
        fetched = store.get(artifact.artifact_id)
        assert fetched.title == "savanna-experiment"
        assert fetched.versions == []

    def test_empty_title_rejected(self, tmp_path):
        with pytest.raises(RepositoryError, match="title"):
            ArtifactStore(tmp_path).create_artifact("  ")

    def test_titles_are_not_unique_keys(self, tmp_path):
        store = ArtifactStore(tmp_path)
        a = store.create_artifact("same")
        b = store.create_artifact("same")
        assert a.artifact_id != b.artifact_id

    def test_add_version_content_addressed(self, tmp_path):
        store = ArtifactStore(tmp_path)
        artifact = store.create_artifact("x")
        version = store.add_version(artifact.artifact_id, ARCHIVE)
        assert version.version_id == 1
        assert version.content_hash == hashlib.sha256(ARCHIVE).hexdigest()
        assert store.open_blob(version) == ARCHIVE

    def test_duplicate_content_shares_blob(self, tmp_path):
        store = ArtifactStore(tmp_path)
        artifact = store.create_artifact("x")
        v1 = store.add_version(artifact.artifact_id, ARCHIVE)
        v2 = store.add_version(artifact.artifact_id, ARCHIVE)
        assert (v1.version_id, v2.version_id) == (1, 2)
        assert v1.content_hash == v2.content_hash
        assert len(list((tmp_path / "blobs").iterdir())) == 1

    def test_size_limit_rejected_with_sizes(self, tmp_path):
        store = ArtifactStore(tmp_path, size_limit=100)
        artifact = store.create_artifact("x")
        with pytest.raises(SizeLimitError, match=r"\d+ bytes"):
            store.add_version(artifact.artifact_id, ARCHIVE)

    def test_artifact_total_limit_counts_distinct_blobs(self, tmp_path):
        first = targz({"a.txt": "a" * 200})
        second = targz({"b.txt": "b" * 200})
        limit = len(first) + len(second) - 1
        store = ArtifactStore(tmp_path, size_limit=limit)
        artifact = store.create_artifact("x")
        store.add_version(artifact.artifact_id, first)
        # identical content adds a version but no bytes, so it stays legal
        store.add_version(artifact.artifact_id, first)
        with pytest.raises(SizeLimitError, match="total"):
            store.add_version(artifact.artifact_id, second)

    def test_corrupt_archive_rejected(self, tmp_path):
        store = ArtifactStore(tmp_path)
        artifact = store.create_artifact("x")
        with pytest.raises(RepositoryError, match="tar.gz"):
            store.add_version(artifact.artifact_id, b"definitely not a tarball")

    def test_visibility_filtering(self, tmp_path):
        store = ArtifactStore(tmp_path)
        for i in range(3):
            store.create_artifact(f"pub-{i}")
        secret = store.create_artifact("secret", visibility="private")
        assert len(store.list_artifacts()) == 3
        assert len(store.list_artifacts(include_private=True)) == 4
        with pytest.raises(NotFoundError):
            store.get(secret.artifact_id)
        assert store.get(secret.artifact_id, include_private=True).title == "secret"

    def test_tag_filter(self, tmp_path):
        store = ArtifactStore(tmp_path)
        store.create_artifact("a", tags=["edge", "bench"])
        store.create_artifact("b", tags=["cloud"])
        assert [a.title for a in store.list_artifacts("edge")] == ["a"]
        assert store.list_artifacts("nothing") == []

    def test_newest_first(self, tmp_path):
        store = ArtifactStore(tmp_path)
        store.create_artifact("old")
        time.sleep(0.01)
        store.create_artifact("new")
        assert [a.title for a in store.list_artifacts()] == ["new", "old"]

    def test_restart_replays_journal(self, tmp_path):
        store = ArtifactStore(tmp_path)
        artifact = store.create_artifact("x", tags=["edge"])
        store.add_version(artifact.artifact_id, ARCHIVE)
        reopened = ArtifactStore(tmp_path)
        listed = reopened.list_artifacts()
        assert [a.artifact_id for a in listed] == [artifact.artifact_id]
        assert reopened.get(artifact.artifact_id).versions[0].content_hash == \
            hashlib.sha256(ARCHIVE).hexdigest()
        # version ids continue without gaps after restart
        v2 = reopened.add_version(artifact.artifact_id, targz({"other.txt": "x"}))
        assert v2.version_id == 2

    def test_fsck_detects_tampering(self, tmp_path):
        store = ArtifactStore(tmp_path)
        artifact = store.create_artifact("x")
        version = store.add_version(artifact.artifact_id, ARCHIVE)
        assert store.fsck() == []
        (tmp_path / "blobs" / version.content_hash).write_bytes(b"tampered")
        problems = store.fsck()
        assert len(problems) == 1 and "mismatch" in problems[0]


class TestPack:
    def test_pack_is_deterministic(self, tmp_path):
        src = tmp_path / "exp"
        (src / "sub").mkdir(parents=True)
        (src / "a.yaml").write_text("a: 1\n")
        (src / "sub" / "b.txt").write_text("b\n")
        first = pack_directory(src)
        time.sleep(0.02)
        (src / "a.yaml").touch()
        assert pack_directory(src) == first

    def test_metadata_round_trip(self, tmp_path):
        src = tmp_path / "exp"
        src.mkdir()
        (src / "artifact.yaml").write_text("title: demo\ntags: [edge]\n")
        assert load_metadata(src)["title"] == "demo"
        data = pack_directory(src)
        assert metadata_from_archive(data) == {"title": "demo", "tags": ["edge"]}

    def test_metadata_defaults_to_directory_name(self, tmp_path):
        src = tmp_path / "myexp"
        src.mkdir()
        assert load_metadata(src)["title"] == "myexp"


@pytest.fixture()
def service(tmp_path):
    store = ArtifactStore(tmp_path / "repo")
    app = create_app(store, token="sesame", workspace_root=tmp_path / "ws")
    with TestClient(app) as client:
        yield client, store


AUTH = {"authorization": "Bearer sesame"}


class TestService:
    def test_create_and_list(self, service):
        client, _ = service
        r = client.post("/artifacts", json={"title": "savanna", "tags": ["edge"]}, headers=AUTH)
        assert r.status_code == 201
        artifact_id = r.json()["artifact_id"]
        r = client.get("/artifacts")
        assert [a["artifact_id"] for a in r.json()] == [artifact_id]
        r = client.get("/artifacts", params={"query": "nope"})
        assert r.json() == []

    def test_mutations_require_token(self, service):
        client, _ = service
        assert client.post("/artifacts", json={"title": "x"}).status_code == 401
        r = client.post("/artifacts", json={"title": "x"}, headers={"authorization": "Bearer wrong"})
        assert r.status_code == 401

    def test_upload_download_round_trip(self, service):
        client, _ = service
        artifact_id = client.post("/artifacts", json={"title": "x"}, headers=AUTH).json()["artifact_id"]
        r = client.post(f"/artifacts/{artifact_id}/versions", content=ARCHIVE, headers=AUTH)
        assert r.status_code == 201
        assert r.json()["version_id"] == 1
        r = client.get(f"/artifacts/{artifact_id}/versions/1/download")
        assert r.status_code == 200
        assert r.content == ARCHIVE
        assert r.headers["x-content-sha256"] == hashlib.sha256(ARCHIVE).hexdigest()

    def test_oversize_upload_rejected_by_declared_length(self, service):
        client, _ = service
        artifact_id = client.post("/artifacts", json={"title": "x"}, headers=AUTH).json()["artifact_id"]
        r = client.post(
            f"/artifacts/{artifact_id}/versions",
            headers=AUTH | {"content-length": "500000001"},
        )
        assert r.status_code == 413

    def test_oversize_upload_rejected_by_actual_bytes(self, tmp_path):
        store = ArtifactStore(tmp_path / "repo", size_limit=64)
        with TestClient(create_app(store)) as client:
            artifact_id = client.post("/artifacts", json={"title": "x"}).json()["artifact_id"]
            r = client.post(f"/artifacts/{artifact_id}/versions", content=ARCHIVE)
            assert r.status_code == 413

    def test_unknown_artifact_404(self, service):
        client, _ = service
        assert client.get("/artifacts/no-such-id").status_code == 404
        assert client.get("/artifacts/no-such-id/versions/1/download").status_code == 404

    def test_private_artifacts_hidden_without_token(self, service):
        client, _ = service
        artifact_id = client.post(
            "/artifacts", json={"title": "secret", "visibility": "private"}, headers=AUTH
        ).json()["artifact_id"]
        assert client.get("/artifacts").json() == []
        assert client.get(f"/artifacts/{artifact_id}").status_code == 404
        assert client.get("/artifacts", headers=AUTH).json()[0]["artifact_id"] == artifact_id
        assert client.get(f"/artifacts/{artifact_id}", headers=AUTH).status_code == 200


def experiment_archive(savanna_docs) -> bytes:
    files = dict(savanna_docs)
    files["dataset/manifest.txt"] = "placeholder\n"
    # desk-size: 3 repetitions so the launch journey finishes quickly
    files["workflow.yaml"] = files["workflow.yaml"].replace("repetitions: 100", "repetitions: 3")
    return targz(files)


class TestLaunchJourney:
    def test_launch_extracts_and_runs_to_finished(self, service, savanna_docs):
        client, store = service
        artifact_id = client.post("/artifacts", json={"title": "savanna"}, headers=AUTH).json()["artifact_id"]
        client.post(f"/artifacts/{artifact_id}/versions", content=experiment_archive(savanna_docs), headers=AUTH)

        r = client.post(f"/artifacts/{artifact_id}/versions/1/launch", headers=AUTH)
        assert r.status_code == 201
        handle = r.json()
        assert handle["state"] in ("created", "extracted")
        workspace = Path(handle["workspace_path"])
        assert (workspace / "layers_services.yaml").is_file()
        assert (workspace / "network.yaml").is_file()
        assert (workspace / "workflow.yaml").is_file()

        deadline = time.monotonic() + 30
        states = {handle["state"]}
        while time.monotonic() < deadline:
            status = client.get(f"/runs/{handle['handle_id']}").json()
            states.add(status["state"])
            if status["state"] in ("finished", "failed"):
                break
            time.sleep(0.05)
        assert status["state"] == "finished", status
        assert status["repetition"] == status["total_repetitions"] == 3
        assert (workspace / "results").is_dir()

    def test_launch_unknown_version_404(self, service):
        client, _ = service
        artifact_id = client.post("/artifacts", json={"title": "x"}, headers=AUTH).json()["artifact_id"]
        r = client.post(f"/artifacts/{artifact_id}/versions/9/launch", headers=AUTH)
        assert r.status_code == 404

    def test_launch_twice_isolated_workspaces(self, service, savanna_docs):
        client, _ = service
        artifact_id = client.post("/artifacts", json={"title": "x"}, headers=AUTH).json()["artifact_id"]
        archive = targz({"readme.txt": "not an experiment\n"})
        client.post(f"/artifacts/{artifact_id}/versions", content=archive, headers=AUTH)
        h1 = client.post(f"/artifacts/{artifact_id}/versions/1/launch", headers=AUTH).json()
        h2 = client.post(f"/artifacts/{artifact_id}/versions/1/launch", headers=AUTH).json()
        assert h1["workspace_path"] != h2["workspace_path"]
        assert Path(h1["workspace_path"], "readme.txt").read_text() == "not an experiment\n"
        assert Path(h2["workspace_path"], "readme.txt").read_text() == "not an experiment\n"

    def test_unknown_run_handle_404(self, service):
        client, _ = service
        assert client.get("/runs/deadbeef").status_code == 404


class TestUiMount:
    def test_static_portal_served_alongside_api(self, tmp_path):
        ui = tmp_path / "dist"
        ui.mkdir()
        (ui / "index.html").write_text("<!doctype html><title>portal</title>")
        (ui / "app.js").write_text("console.log('portal');")
        store = ArtifactStore(tmp_path / "repo")
        with TestClient(create_app(store, ui_dir=ui)) as client:
            assert client.get("/artifacts").json() == []  # API keeps precedence
            home = client.get("/")
            assert home.status_code == 200
            assert "portal" in home.text
            assert client.get("/app.js").status_code == 200

    def test_built_frontend_assets_if_present(self):
        dist = Path(__file__).resolve().parent.parent / "frontend" / "dist"
        if not dist.is_dir():
            pytest.skip("frontend not built")
        store_root = Path(__file__).resolve().parent
        for name in ("index.html", "app.js", "api.js", "poller.js", "views.js", "styles.css"):
            assert (dist / name).is_file(), name
