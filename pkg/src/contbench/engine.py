"""Phase-by-phase workflow execution over a deployment plan.

Under the simulated provider everything runs on a virtual clock: task
durations advance simulated time, so a campaign of 100 repetitions spaced
30 seconds apart finishes in well under a second of wall time while still
reporting the full virtual timeline. Within a phase, tasks without a
dependency edge run concurrently (one logical worker per host); the
scheduler is a single-threaded deterministic event loop, so identical
inputs always produce identical runs.
"""

from __future__ import annotations

import csv
import io
import json
import shutil
import tempfile
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Mapping

from . import workload as wl
from .config import ExperimentConfig, Phase, Selector, ServiceSpec, WorkflowConfig, WorkflowTask
from .providers import DeploymentPlan, Host
from .workload import MetricSample

SAMPLES_FILE = "samples.csv"
TASKS_LOG_FILE = "tasks.log"
RUN_META_FILE = "run.json"
CONFIG_DIR = "config"
HOSTS_DIR = "hosts"

SAMPLE_COLUMNS = ("metric", "host", "repetition", "value", "unit")


class ExecutionError(RuntimeError):
    pass


class RunStatus(str, Enum):
    PENDING = "pending"
    RUNNING = "running"
    SUCCEEDED = "succeeded"
    FAILED = "failed"


class Outcome(str, Enum):
    OK = "ok"
    FAILED = "failed"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class TaskResult:
    task_id: str
    host: str
    outcome: Outcome
    output: str
    duration_s: float
    started_at: float


@dataclass
class RepetitionResult:
    index: int
    started_at: float
    samples: list[MetricSample] = field(default_factory=list)
    task_results: list[TaskResult] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return any(r.outcome is Outcome.FAILED for r in self.task_results)


@dataclass
class ExperimentRun:
    run_id: str
    config_digest: str
    seed: int
    label: str
    group: str
    approach: str
    planned_repetitions: int
    interval_s: float
    documents: Mapping[str, str]
    workspace: Path
    status: RunStatus = RunStatus.PENDING
    started_at: float = 0.0
    finished_at: float = 0.0
    repetitions: list[RepetitionResult] = field(default_factory=list)
    prepare_results: list[TaskResult] = field(default_factory=list)
    finalize_results: list[TaskResult] = field(default_factory=list)

    @property
    def samples(self) -> list[MetricSample]:
        return [s for rep in self.repetitions for s in rep.samples]

    @property
    def virtual_elapsed_s(self) -> float:
        return self.finished_at - self.started_at


class VirtualClock:
    """Simulation time; advances only when events complete, never backwards."""

    def __init__(self, start: float = 0.0):
        self.now = start

    def advance_to(self, t: float) -> None:
        if t < self.now:
            raise ExecutionError(f"virtual clock cannot go backwards ({t} < {self.now})")
        self.now = t


class _ExecContext:
    """Mutable state shared by the phase scheduler and the task actions."""

    def __init__(self, plan: DeploymentPlan, config: ExperimentConfig, seed: int, workspace: Path):
        self.plan = plan
        self.config = config
        self.seed = seed
        self.workspace = workspace
        self.repetition: int | None = None
        self.sample_sink: list[MetricSample] | None = None
        self._units: dict[str, str] = {}
        self._service_cache: dict[tuple[str, str], ServiceSpec] = {
            (layer.name, svc.name): svc for layer, svc in config.layers_services.iter_services()
        }

    def service_for(self, host: Host) -> ServiceSpec:
        return self._service_cache[(host.layer, host.service)]

    def host_dir(self, host: Host) -> Path:
        d = self.workspace / HOSTS_DIR / host.qualified_name
        d.mkdir(parents=True, exist_ok=True)
        return d

    def collected_dir(self) -> Path:
        d = self.workspace / "collected"
        d.mkdir(parents=True, exist_ok=True)
        return d

    def emit(self, samples: list[MetricSample]) -> None:
        if self.sample_sink is None:
            raise ExecutionError("metric samples emitted outside the launch phase")
        for s in samples:
            known = self._units.setdefault(s.metric, s.unit)
            if known != s.unit:
                raise ExecutionError(
                    f"metric {s.metric!r} emitted with unit {s.unit!r}, expected {known!r}"
                )
        self.sample_sink.extend(samples)


def _perform(ctx: _ExecContext, task: WorkflowTask, host: Host) -> tuple[float, str, bool]:
    """Run one task on one host; returns (virtual duration, output, ok)."""
    if task.action == "copy_to":
        src_arg = task.args.get("src", "")
        dest_arg = task.args.get("dest", src_arg)
        if not src_arg:
            return 0.0, "copy_to needs a 'src' argument", False
        src = Path(src_arg)
        if not src.is_absolute() and ctx.config.base_dir is not None:
            src = ctx.config.base_dir / src
        if not src.exists():
            return 0.0, f"copy source {src_arg!r} not found", False
        dest = ctx.host_dir(host) / dest_arg
        dest.parent.mkdir(parents=True, exist_ok=True)
        if src.is_dir():
            shutil.copytree(src, dest, dirs_exist_ok=True)
        else:
            shutil.copy2(src, dest)
        return 0.0, f"copied {src_arg} -> {host.qualified_name}:{dest_arg}", True

    if task.action == "execute":
        svc = ctx.service_for(host)
        if ctx.repetition is not None and wl.is_workload_service(svc.params):
            spec = wl.WorkloadSpec.from_params(svc.params)
            server_hosts = ctx.plan.select(Selector.parse(spec.server_selector))
            if len(server_hosts) != 1:
                return 0.0, f"expected one server host for {spec.server_selector!r}", False
            sample, metrics = wl.device_samples(
                spec, host, server_hosts[0], ctx.plan.links, ctx.repetition, ctx.seed
            )
            ctx.emit(metrics)
            return (
                sample.total_s,
                f"pipeline rep={ctx.repetition} bytes={sample.bytes_sent} total={sample.total_s:.6f}s",
                True,
            )
        duration = float(task.args.get("duration", 0.0))
        command = task.args.get("command", "")
        return duration, f"executed {command or task.id} on {host.qualified_name}", True

    if task.action == "fetch_results":
        src = ctx.workspace / HOSTS_DIR / host.qualified_name
        dest = ctx.collected_dir() / host.qualified_name
        if src.exists():
            shutil.copytree(src, dest, dirs_exist_ok=True)
        else:
            dest.mkdir(parents=True, exist_ok=True)
        return 0.0, f"collected results from {host.qualified_name}", True

    return 0.0, f"unknown action {task.action!r}", False


def run_phase(
    phase: Phase,
    plan: DeploymentPlan,
    tasks: tuple[WorkflowTask, ...],
    ctx: _ExecContext,
    start_time: float,
) -> tuple[list[TaskResult], float]:
    """Schedule one phase's tasks from ``start_time`` on the virtual timeline.

    Tasks with no dependency edge start together; dependent tasks start when
    every dependency has finished; a host runs one task at a time. Per-task
    failures are recorded, not raised. Returns the results in declaration
    order plus the phase end time.
    """
    results: list[TaskResult] = []
    host_avail: dict[str, float] = {}
    task_end: dict[str, float] = {}
    task_outcome: dict[str, Outcome] = {}
    phase_end = start_time

    for task in tasks:
        if task.phase is not phase:
            raise ExecutionError(f"task {task.id!r} belongs to phase {task.phase.value}, not {phase.value}")
        hosts = plan.select(Selector.parse(task.hosts))
        dep_ready = start_time
        blocked = False
        for dep in task.depends_on:
            dep_ready = max(dep_ready, task_end[dep])
            if task_outcome[dep] is not Outcome.OK:
                blocked = True

        if blocked or not hosts:
            outcome = Outcome.SKIPPED if blocked else Outcome.FAILED
            output = "skipped: dependency did not succeed" if blocked else "selector matched no hosts"
            for host in hosts or (None,):
                name = host.qualified_name if host else "-"
                results.append(TaskResult(task.id, name, outcome, output, 0.0, dep_ready))
            task_end[task.id] = dep_ready
            task_outcome[task.id] = outcome
            phase_end = max(phase_end, dep_ready)
            continue

        ends = []
        ok_all = True
        for host in hosts:
            begin = max(start_time, dep_ready, host_avail.get(host.id, start_time))
            duration, output, ok = _perform(ctx, task, host)
            end = begin + duration
            host_avail[host.id] = end
            ends.append(end)
            ok_all = ok_all and ok
            results.append(
                TaskResult(
                    task.id,
                    host.qualified_name,
                    Outcome.OK if ok else Outcome.FAILED,
                    output,
                    duration,
                    begin,
                )
            )
        task_end[task.id] = max(ends)
        task_outcome[task.id] = Outcome.OK if ok_all else Outcome.FAILED
        phase_end = max(phase_end, task_end[task.id])

    return results, phase_end


def execute(
    plan: DeploymentPlan,
    wf: WorkflowConfig,
    seed: int,
    *,
    config: ExperimentConfig,
    workspace: Path | None = None,
    progress: Callable[[int, int], None] | None = None,
) -> ExperimentRun:
    """Run prepare once, launch ``wf.repetitions`` times, then finalize.

    A prepare failure aborts the run (no repetitions execute); a launch
    failure marks only its repetition failed; finalize always runs so that
    whatever results exist are still collected.
    """
    if plan.links is None:
        raise ExecutionError("deployment plan has no link table; attach one with netem.attach_links")
    digest = config.digest
    approach = ""
    for _, svc in config.layers_services.iter_services():
        if wl.is_workload_service(svc.params):
            approach = svc.params["approach"]
            break
    run = ExperimentRun(
        run_id=f"{digest[:12]}-s{seed}",
        config_digest=digest,
        seed=seed,
        label=config.label,
        group=config.group,
        approach=approach,
        planned_repetitions=wf.repetitions,
        interval_s=wf.interval_s,
        documents=dict(config.documents),
        workspace=workspace or Path(tempfile.mkdtemp(prefix="contbench-run-")),
    )
    ctx = _ExecContext(plan, config, seed, run.workspace)
    clock = VirtualClock()
    run.status = RunStatus.RUNNING
    run.started_at = clock.now

    run.prepare_results, prepare_end = run_phase(
        Phase.PREPARE, plan, wf.phase_tasks(Phase.PREPARE), ctx, clock.now
    )
    clock.advance_to(prepare_end)
    prepare_ok = all(r.outcome is Outcome.OK for r in run.prepare_results)

    latest = clock.now
    if prepare_ok:
        launch_tasks = wf.phase_tasks(Phase.LAUNCH)
        launch_start = clock.now
        for index in range(wf.repetitions):
            rep_start = launch_start + index * wf.interval_s
            rep = RepetitionResult(index=index, started_at=rep_start)
            ctx.repetition = index
            ctx.sample_sink = rep.samples
            rep.task_results, rep_end = run_phase(Phase.LAUNCH, plan, launch_tasks, ctx, rep_start)
            ctx.repetition = None
            ctx.sample_sink = None
            latest = max(latest, rep_end, rep_start)
            run.repetitions.append(rep)
            if progress is not None:
                progress(index + 1, wf.repetitions)
        clock.advance_to(latest)

    run.finalize_results, finalize_end = run_phase(
        Phase.FINALIZE, plan, wf.phase_tasks(Phase.FINALIZE), ctx, clock.now
    )
    clock.advance_to(finalize_end)
    run.finished_at = clock.now

    finalize_ok = all(r.outcome is Outcome.OK for r in run.finalize_results)
    reps_ok = not any(rep.failed for rep in run.repetitions)
    run.status = RunStatus.SUCCEEDED if (prepare_ok and reps_ok and finalize_ok) else RunStatus.FAILED
    return run


# ---------------------------------------------------------------------------
# results archive
# ---------------------------------------------------------------------------


def samples_csv(run: ExperimentRun) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SAMPLE_COLUMNS)
    for s in run.samples:
        writer.writerow([s.metric, s.host, s.repetition, repr(s.value), s.unit])
    return buf.getvalue()


def _tasks_log(run: ExperimentRun) -> str:
    lines = []

    def add(phase: str, repetition: str, results: list[TaskResult]) -> None:
        for r in results:
            lines.append(
                f"{phase}\t{repetition}\t{r.task_id}\t{r.host}\t{r.outcome.value}"
                f"\t{r.started_at:.9f}\t{r.duration_s:.9f}\t{r.output}"
            )

    add("prepare", "-", run.prepare_results)
    for rep in run.repetitions:
        add("launch", str(rep.index), rep.task_results)
    add("finalize", "-", run.finalize_results)
    return "\n".join(lines) + ("\n" if lines else "")


def run_meta(run: ExperimentRun) -> dict:
    return {
        "run_id": run.run_id,
        "seed": run.seed,
        "config_digest": run.config_digest,
        "status": run.status.value,
        "label": run.label,
        "group": run.group,
        "approach": run.approach,
        "started_at": run.started_at,
        "finished_at": run.finished_at,
        "repetitions": len(run.repetitions),
        "interval_s": run.interval_s,
    }


def collect_results(run: ExperimentRun, out_root: Path | str) -> Path:
    """Write the run's archive: config documents, samples, task log, metadata.

    The archive content is a pure function of the run (virtual timestamps
    only), so identical runs produce identical archives.
    """
    if run.status in (RunStatus.PENDING, RunStatus.RUNNING):
        raise ExecutionError(f"run {run.run_id} is still {run.status.value}; cannot collect")
    out = Path(out_root) / run.run_id
    if out.exists():
        raise ExecutionError(f"results directory {out} already exists")
    (out / CONFIG_DIR).mkdir(parents=True)
    for name, text in run.documents.items():
        (out / CONFIG_DIR / name).write_text(text)
    (out / SAMPLES_FILE).write_text(samples_csv(run))
    (out / TASKS_LOG_FILE).write_text(_tasks_log(run))
    (out / RUN_META_FILE).write_text(json.dumps(run_meta(run), indent=2, sort_keys=True) + "\n")
    collected = run.workspace / "collected"
    if collected.exists():
        shutil.copytree(collected, out / HOSTS_DIR)
    return out


def load_samples(run_dir: Path | str) -> list[MetricSample]:
    path = Path(run_dir) / SAMPLES_FILE
    if not path.is_file():
        raise ExecutionError(f"no {SAMPLES_FILE} in {run_dir}")
    out = []
    with path.open(newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                MetricSample(
                    metric=row["metric"],
                    host=row["host"],
                    repetition=int(row["repetition"]),
                    value=float(row["value"]),
                    unit=row["unit"],
                )
            )
    return out


def load_run_meta(run_dir: Path | str) -> dict:
    path = Path(run_dir) / RUN_META_FILE
    if not path.is_file():
        raise ExecutionError(f"no {RUN_META_FILE} in {run_dir}")
    return json.loads(path.read_text())
