from __future__ import annotations

from pathlib import Path

import pytest

from contbench.config import load_experiment, make_experiment
from contbench.engine import (
    ExecutionError,
    Outcome,
    RunStatus,
    collect_results,
    execute,
    load_run_meta,
    load_samples,
    samples_csv,
)
from contbench.netem import attach_links
from contbench.providers import SimulatedProvider, map_services, requests_for

LS = """
layers:
  - name: edge
    services:
      - name: client
        quantity: {n_edge}
        environment: sim
        profile: rpi3
        params: {{approach: hybrid, image_size: 40000, compression_ratio: 0.8}}
  - name: cloud
    services:
      - {{name: server, quantity: 1, environment: sim, profile: dahu}}
environments:
  sim: {{kind: simulated}}
global: {{label: test-run, group: g}}
"""

NET = "rules:\n  - {src: edge, dst: cloud, delay: 150ms, rate: 25Kbit, symmetric: true}\n"

WF = """
repetitions: {repetitions}
interval: {interval}
tasks:
  - {{id: stage, phase: prepare, hosts: edge.client, action: copy_to, args: {{src: {src}, dest: images}}}}
  - {{id: server, phase: launch, hosts: cloud.server, action: execute, args: {{command: serve}}}}
  - {{id: client, phase: launch, hosts: edge.client, action: execute}}
  - {{id: grab, phase: finalize, hosts: "*", action: fetch_results}}
"""


def build(tmp_path: Path, n_edge=1, repetitions=3, interval=30, wf_text=None, src="dataset"):
    (tmp_path / "dataset").mkdir(parents=True, exist_ok=True)
    (tmp_path / "dataset" / "a.txt").write_text("x")
    cfg = make_experiment(
        LS.format(n_edge=n_edge),
        NET,
        wf_text or WF.format(repetitions=repetitions, interval=interval, src=src),
        base_dir=tmp_path,
    )
    provider = SimulatedProvider()
    grants = [provider.acquire(r) for r in requests_for(cfg.layers_services)]
    plan = attach_links(map_services(cfg.layers_services, grants), cfg.network)
    return cfg, plan


class TestExecute:
    def test_full_run_counts_and_virtual_time(self, tmp_path):
        cfg, plan = build(tmp_path, repetitions=100, interval=30)
        run = execute(plan, cfg.workflow, seed=1, config=cfg, workspace=tmp_path / "ws")
        assert run.status is RunStatus.SUCCEEDED
        assert len(run.repetitions) == 100
        assert run.virtual_elapsed_s >= 99 * 30
        totals = [s for s in run.samples if s.metric == "processing_time_s"]
        assert len(totals) == 100

    def test_sample_count_scales_with_devices(self, tmp_path):
        cfg, plan = build(tmp_path, n_edge=3, repetitions=4)
        run = execute(plan, cfg.workflow, seed=1, config=cfg, workspace=tmp_path / "ws")
        totals = [s for s in run.samples if s.metric == "processing_time_s"]
        assert len(totals) == 4 * 3

    def test_repetition_starts_spaced_exactly_by_interval(self, tmp_path):
        cfg, plan = build(tmp_path, repetitions=10, interval=30)
        run = execute(plan, cfg.workflow, seed=1, config=cfg, workspace=tmp_path / "ws")
        starts = [rep.started_at for rep in run.repetitions]
        assert all(b - a == 30.0 for a, b in zip(starts, starts[1:]))

    def test_empty_launch_phase_is_legal(self, tmp_path):
        wf = "repetitions: 1\ntasks:\n  - {id: grab, phase: finalize, hosts: '*', action: fetch_results}\n"
        cfg, plan = build(tmp_path, wf_text=wf)
        run = execute(plan, cfg.workflow, seed=1, config=cfg, workspace=tmp_path / "ws")
        assert run.status is RunStatus.SUCCEEDED
        assert len(run.repetitions) == 1
        assert run.repetitions[0].samples == []

    def test_missing_copy_source_aborts_run(self, tmp_path):
        cfg, plan = build(tmp_path, src="no-such-dir")
        run = execute(plan, cfg.workflow, seed=1, config=cfg, workspace=tmp_path / "ws")
        assert run.status is RunStatus.FAILED
        assert run.repetitions == []  # zero repetitions executed
        assert any(r.outcome is Outcome.FAILED for r in run.prepare_results)
        # finalize still attempted
        assert run.finalize_results

    def test_launch_failure_continues_remaining_repetitions(self, tmp_path):
        wf = """
repetitions: 3
tasks:
  - {id: boom, phase: launch, hosts: edge.client, action: copy_to, args: {src: missing}}
"""
        cfg, plan = build(tmp_path, wf_text=wf)
        run = execute(plan, cfg.workflow, seed=1, config=cfg, workspace=tmp_path / "ws")
        assert run.status is RunStatus.FAILED
        assert len(run.repetitions) == 3
        assert all(rep.failed for rep in run.repetitions)

    def test_independent_tasks_start_together(self, tmp_path):
        cfg, plan = build(tmp_path, repetitions=1)
        run = execute(plan, cfg.workflow, seed=1, config=cfg, workspace=tmp_path / "ws")
        launch = run.repetitions[0].task_results
        assert len({r.started_at for r in launch}) == 1

    def test_dependency_failure_skips_dependent(self, tmp_path):
        wf = """
repetitions: 1
tasks:
  - {id: a, phase: launch, hosts: edge.client, action: copy_to, args: {src: missing}}
  - {id: b, phase: launch, hosts: edge.client, action: execute, depends_on: [a]}
"""
        cfg, plan = build(tmp_path, wf_text=wf)
        run = execute(plan, cfg.workflow, seed=1, config=cfg, workspace=tmp_path / "ws")
        outcomes = {r.task_id: r.outcome for r in run.repetitions[0].task_results}
        assert outcomes["a"] is Outcome.FAILED
        assert outcomes["b"] is Outcome.SKIPPED

    def test_same_host_tasks_serialize_dependent_order(self, tmp_path):
        wf = """
repetitions: 1
tasks:
  - {id: first, phase: launch, hosts: cloud.server, action: execute, args: {duration: 5}}
  - {id: second, phase: launch, hosts: cloud.server, action: execute, args: {duration: 2}, depends_on: [first]}
"""
        cfg, plan = build(tmp_path, wf_text=wf)
        run = execute(plan, cfg.workflow, seed=1, config=cfg, workspace=tmp_path / "ws")
        results = {r.task_id: r for r in run.repetitions[0].task_results}
        assert results["second"].started_at == results["first"].started_at + 5.0

    def test_phase_ordering_on_the_virtual_timeline(self, tmp_path):
        wf = """
repetitions: 3
interval: 30
tasks:
  - {id: warmup, phase: prepare, hosts: cloud.server, action: execute, args: {duration: 10}}
  - {id: client, phase: launch, hosts: edge.client, action: execute}
  - {id: grab, phase: finalize, hosts: "*", action: fetch_results}
"""
        cfg, plan = build(tmp_path, wf_text=wf)
        run = execute(plan, cfg.workflow, seed=1, config=cfg, workspace=tmp_path / "ws")
        prepare_end = max(r.started_at + r.duration_s for r in run.prepare_results)
        first_launch = min(r.started_at for rep in run.repetitions for r in rep.task_results)
        assert first_launch >= prepare_end == 10.0
        last_rep_end = max(
            r.started_at + r.duration_s for rep in run.repetitions for r in rep.task_results
        )
        finalize_start = min(r.started_at for r in run.finalize_results)
        assert finalize_start >= last_rep_end
        assert finalize_start >= run.repetitions[-1].started_at

    def test_progress_callback(self, tmp_path):
        cfg, plan = build(tmp_path, repetitions=5)
        seen = []
        execute(plan, cfg.workflow, seed=1, config=cfg, workspace=tmp_path / "ws",
                progress=lambda done, total: seen.append((done, total)))
        assert seen == [(i, 5) for i in range(1, 6)]


class TestRepeatability:
    def test_identical_config_and_seed_identical_samples(self, tmp_path):
        cfg1, plan1 = build(tmp_path / "a", repetitions=20)
        cfg2, plan2 = build(tmp_path / "b", repetitions=20)
        run1 = execute(plan1, cfg1.workflow, seed=7, config=cfg1, workspace=tmp_path / "a" / "ws")
        run2 = execute(plan2, cfg2.workflow, seed=7, config=cfg2, workspace=tmp_path / "b" / "ws")
        assert samples_csv(run1) == samples_csv(run2)

    def test_different_seed_changes_samples(self, tmp_path):
        cfg, plan = build(tmp_path, repetitions=5)
        run1 = execute(plan, cfg.workflow, seed=7, config=cfg, workspace=tmp_path / "w1")
        run2 = execute(plan, cfg.workflow, seed=8, config=cfg, workspace=tmp_path / "w2")
        assert samples_csv(run1) != samples_csv(run2)


class TestCollectResults:
    def test_archive_layout_and_reload(self, tmp_path, savanna_copy):
        cfg = load_experiment(savanna_copy)
        provider = SimulatedProvider()
        grants = [provider.acquire(r) for r in requests_for(cfg.layers_services)]
        plan = attach_links(map_services(cfg.layers_services, grants), cfg.network)
        run = execute(plan, cfg.workflow, seed=2, config=cfg, workspace=tmp_path / "ws")
        out = collect_results(run, tmp_path / "results")
        assert (out / "config" / "layers_services.yaml").read_text() == cfg.documents["layers_services.yaml"]
        assert (out / "samples.csv").is_file()
        assert (out / "tasks.log").is_file()
        meta = load_run_meta(out)
        assert meta["seed"] == 2
        assert meta["config_digest"] == cfg.digest
        assert meta["status"] == "succeeded"
        samples = load_samples(out)
        assert [s for s in samples if s.metric == "processing_time_s"]
        # fetch_results staged every host directory into the archive
        assert (out / "hosts" / "edge.client.0" / "images" / "manifest.txt").is_file()
        assert (out / "hosts" / "cloud.server.0").is_dir()

    def test_collect_is_deterministic(self, tmp_path):
        cfg, plan = build(tmp_path, repetitions=5)
        run1 = execute(plan, cfg.workflow, seed=3, config=cfg, workspace=tmp_path / "w1")
        run2 = execute(plan, cfg.workflow, seed=3, config=cfg, workspace=tmp_path / "w2")
        out1 = collect_results(run1, tmp_path / "r1")
        out2 = collect_results(run2, tmp_path / "r2")
        for name in ("samples.csv", "tasks.log", "run.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_collect_refuses_running_run(self, tmp_path):
        cfg, plan = build(tmp_path)
        run = execute(plan, cfg.workflow, seed=1, config=cfg, workspace=tmp_path / "ws")
        run.status = RunStatus.RUNNING
        with pytest.raises(ExecutionError, match="running"):
            collect_results(run, tmp_path / "results")

    def test_collect_refuses_existing_directory(self, tmp_path):
        cfg, plan = build(tmp_path)
        run = execute(plan, cfg.workflow, seed=1, config=cfg, workspace=tmp_path / "ws")
        collect_results(run, tmp_path / "results")
        with pytest.raises(ExecutionError, match="exists"):
            collect_results(run, tmp_path / "results")
