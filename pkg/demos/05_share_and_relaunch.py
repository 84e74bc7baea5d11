"""Share an experiment through the repository and relaunch it with one call.

Packages the bundled experiment into a normalized .tar.gz, publishes it to
an in-process repository service, then launches it server-side: the service
extracts the archive into a fresh workspace and, because the workspace holds
the three experiment documents, runs it on the simulated provider while we
poll the run handle to completion.
"""

import socket
import tempfile
import threading
import time
from pathlib import Path

import uvicorn

from contbench.repository import ArtifactStore, RepositoryClient, create_app
from contbench.repository.pack import load_metadata, pack_directory

SAVANNA = Path(__file__).resolve().parent.parent / "experiments" / "savanna"

with tempfile.TemporaryDirectory() as td:
    root = Path(td)

    # a desk-size copy: 5 repetitions instead of 100
    exp = root / "experiment"
    exp.mkdir()
    for path in SAVANNA.rglob("*"):
        if path.is_file():
            dest = exp / path.relative_to(SAVANNA)
            dest.parent.mkdir(parents=True, exist_ok=True)
            dest.write_bytes(path.read_bytes())
    wf = exp / "workflow.yaml"
    wf.write_text(wf.read_text().replace("repetitions: 100", "repetitions: 5"))

    store = ArtifactStore(root / "repo")
    app = create_app(store, token="sesame", workspace_root=root / "workspaces")
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        port = sock.getsockname()[1]
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="error"))
    threading.Thread(target=server.run, daemon=True).start()
    while not server.started:
        time.sleep(0.02)
    url = f"http://127.0.0.1:{port}"
    print(f"repository service listening at {url}")

    archive = pack_directory(exp)
    meta = load_metadata(exp)
    print(f"packaged {exp.name}: {len(archive)} bytes, title {meta['title']!r}")

    with RepositoryClient(url, token="sesame") as client:
        artifact = client.create_artifact(**meta)
        version = client.add_version(artifact["artifact_id"], archive)
        print(f"published artifact {artifact['artifact_id']} version {version['version_id']}")

        listed = client.list_artifacts()
        print(f"repository lists {len(listed)} artifact(s): {[a['title'] for a in listed]}")

        handle = client.launch(artifact["artifact_id"], version["version_id"])
        print(f"launched into {handle['workspace_path']}; polling...")
        seen = [handle["state"]]
        while True:
            status = client.run_status(handle["handle_id"])
            if status["state"] != seen[-1]:
                seen.append(status["state"])
            if status["state"] in ("finished", "failed"):
                break
            time.sleep(0.05)
        print(f"states observed: {' -> '.join(seen)}")
        print(f"repetitions completed: {status['repetition']}/{status['total_repetitions']}")
        results = Path(handle["workspace_path"]) / "results"
        print(f"results archive: {sorted(p.name for p in results.iterdir())}")

    server.should_exit = True
