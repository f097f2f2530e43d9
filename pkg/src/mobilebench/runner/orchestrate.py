"""Episode orchestration, task validation and persisted reports."""

from __future__ import annotations

import json
import os
import subprocess
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from ..agent.episode import EpisodeTrace, McpContext, Termination, canonical_line, run_episode
from ..agent.policy import AgentPolicy, ChatPolicy, ScriptedPolicy
from ..device.fixtures import load_world
from ..device.snapshot import Snapshot, capture_snapshot, restore_snapshot, state_digest
from ..evaluators import Verdict, evaluate
from ..mcp.dispatch import FixtureTransport
from ..mcp.registry import Registry, load_catalog
from ..metrics import EpisodeRecord, MetricsReport, build_report
from ..usersim import Backend, SimulatedUser, UserProfile
from .tasks import TaskSpec, default_fixtures_path, default_tasks_path, load_tasks, select

MAX_VALIDATION_ATTEMPTS = 5
RESULTS_FILE = "results.jsonl"
RUN_FILE = "run.json"


class IsolationError(RuntimeError):
    """A restored device did not match its snapshot digest."""


@dataclass
class RunConfig:
    tasks_path: Path | None = None
    filter: str | None = None
    parallelism: int = 1
    policy: str = "scripted"
    script: str = "solution"
    user_backend: Backend = Backend.SCRIPTED
    out_dir: Path = Path("runs/latest")
    seed: int = 0
    strict_infra: bool = True
    mcp_fixtures: Path | None = None
    pre_episode: str | None = None
    post_episode: str | None = None

    def __post_init__(self) -> None:
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if self.policy not in ("scripted", "chat"):
            raise ValueError(f"unknown policy backend {self.policy!r}")
        self.out_dir = Path(self.out_dir)

    def to_json(self) -> dict:
        return {
            "tasks": str(self.tasks_path or default_tasks_path()),
            "filter": self.filter,
            "parallelism": self.parallelism,
            "policy": self.policy,
            "script": self.script if self.policy == "scripted" else None,
            "user_backend": self.user_backend.value,
            "seed": self.seed,
            "strict_infra": self.strict_infra,
        }


@dataclass
class EpisodeResult:
    task: TaskSpec
    trace: EpisodeTrace
    verdict: Verdict
    record: EpisodeRecord
    pre_digest: str
    snapshot_digest: str
    eval_digests: tuple[str, str] = ("", "")


@dataclass
class RunResult:
    report: MetricsReport
    episodes: list[EpisodeResult] = field(default_factory=list)
    out_dir: Path | None = None


class SnapshotCache:
    """One captured snapshot per (world, start screen), shared read-only by episodes."""

    def __init__(self) -> None:
        self._snaps: dict[tuple[Path, str], Snapshot] = {}
        self._lock = threading.Lock()

    def get(self, task: TaskSpec) -> Snapshot:
        key = (task.world, task.start)
        with self._lock:
            if key not in self._snaps:
                self._snaps[key] = capture_snapshot(load_world(task.world, start=task.start), task.snapshot_ref)
            return self._snaps[key]


def _hook(cmd: str | None, task: TaskSpec, phase: str) -> str | None:
    if not cmd:
        return None
    env = dict(os.environ, MOBILEBENCH_TASK_ID=task.id, MOBILEBENCH_PHASE=phase)
    proc = subprocess.run(cmd, shell=True, env=env, capture_output=True, text=True)
    if proc.returncode != 0:
        return f"{phase} hook exited {proc.returncode}: {proc.stderr.strip()[:200]}"
    return None


def make_policy(task: TaskSpec, config: RunConfig) -> AgentPolicy:
    if config.policy == "chat":
        return ChatPolicy()
    return ScriptedPolicy(task.script(config.script))


def run_task(task: TaskSpec, policy: AgentPolicy, *, snapshots: SnapshotCache, registry: Registry,
             fixtures: Path, seed: int = 0, artifact_dir: Path | None = None,
             user_backend: Backend = Backend.SCRIPTED, pre_episode: str | None = None,
             post_episode: str | None = None) -> EpisodeResult:
    """Restore, run one episode, evaluate and (optionally) persist it."""
    snap = snapshots.get(task)
    state = restore_snapshot(snap)
    pre = state_digest(state)
    if pre != snap.digest:
        raise IsolationError(f"{task.id}: restored digest {pre} != snapshot {snap.digest}")

    user = SimulatedUser(UserProfile(task.goal, task.user_info, state.clock, user_backend))
    mcp = McpContext(registry, FixtureTransport.from_file(fixtures), task.mcp_allowlist, task.cap)
    t0 = time.perf_counter()
    hook_error = _hook(pre_episode, task, "pre_episode")
    if hook_error is None:
        trace = run_episode(policy, task, state, user, mcp, task.budget,
                            snapshot_digest=snap.digest, seed=seed, artifact_dir=artifact_dir)
    else:
        trace = EpisodeTrace(task.id, task.goal, snap.digest, task.budget, seed,
                             termination=Termination.INFRASTRUCTURE_ERROR, detail=hook_error,
                             final_state=state)
    post_error = _hook(post_episode, task, "post_episode")
    episode_s = time.perf_counter() - t0

    final = trace.final_state
    before = state_digest(final)
    if trace.infra_error:
        verdict = Verdict(0, task.evaluator.mode, f"infrastructure error: {trace.detail}", infra_error=True)
    else:
        verdict = evaluate(task.evaluator, final, trace.answer)
    after = state_digest(final)
    infra = verdict.infra_error or trace.infra_error or post_error is not None

    record = EpisodeRecord(task.id, task.category, verdict.score, trace.steps, trace.queries,
                           trace.mcp_calls, infra, trace.termination.value)
    result = EpisodeResult(task, trace, verdict, record, pre, snap.digest, (before, after))
    if artifact_dir is not None:
        artifact_dir.mkdir(parents=True, exist_ok=True)
        (artifact_dir / "trace.jsonl").write_bytes(trace.to_jsonl(verdict.to_json()))
        detail = dict(verdict.to_json(with_duration=True), task_id=task.id,
                      termination=trace.termination.value, episode_s=round(episode_s, 6),
                      final_digest=after)
        if post_error:
            detail["post_episode_error"] = post_error
        (artifact_dir / "verdict.json").write_text(json.dumps(detail, sort_keys=True, indent=2) + "\n")
    return result


def run(config: RunConfig, tasks: Sequence[TaskSpec] | None = None) -> RunResult:
    """Run every selected task and write traces, results and the report under ``config.out_dir``."""
    if tasks is None:
        tasks = load_tasks(config.tasks_path)
    chosen = select(tasks, config.filter)
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)
    (out / RUN_FILE).write_text(json.dumps(config.to_json(), sort_keys=True, indent=2) + "\n")
    results_path = out / RESULTS_FILE
    results_path.write_bytes(b"")
    sink_lock = threading.Lock()
    snapshots = SnapshotCache()
    registry = load_catalog()
    fixtures = config.mcp_fixtures or default_fixtures_path()

    def one(task: TaskSpec) -> EpisodeResult:
        res = run_task(task, make_policy(task, config), snapshots=snapshots, registry=registry,
                       fixtures=fixtures, seed=config.seed, artifact_dir=out / task.id,
                       user_backend=config.user_backend, pre_episode=config.pre_episode,
                       post_episode=config.post_episode)
        with sink_lock:
            with results_path.open("a", encoding="utf-8") as fh:
                fh.write(canonical_line(res.record.to_json()) + "\n")
        return res

    if config.parallelism == 1:
        episodes = [one(t) for t in chosen]
    else:
        with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
            episodes = list(pool.map(one, chosen))

    rep = build_report([e.record for e in episodes], strict_infra=config.strict_infra)
    (out / "report.json").write_bytes(rep.to_json_bytes())
    (out / "report.txt").write_text(rep.to_text(), encoding="utf-8")
    return RunResult(rep, episodes, out)


def report(artifact_dir: str | Path) -> MetricsReport:
    """Recompute the report from a run directory's persisted records."""
    d = Path(artifact_dir)
    lines = (d / RESULTS_FILE).read_text(encoding="utf-8").splitlines()
    records = [EpisodeRecord.from_json(json.loads(ln)) for ln in lines if ln.strip()]
    if not records:
        raise ValueError(f"no records in {d / RESULTS_FILE}")
    strict = True
    if (d / RUN_FILE).exists():
        strict = bool(json.loads((d / RUN_FILE).read_text()).get("strict_infra", True))
    return build_report(records, strict_infra=strict)


@dataclass(frozen=True)
class ValidationResult:
    task_id: str
    valid: bool
    attempts: int
    verdicts: tuple[Verdict, ...]

    @property
    def flagged(self) -> bool:
        return not self.valid


def validate_task(task: TaskSpec, operator: Callable[[int], AgentPolicy], *,
                  max_attempts: int = MAX_VALIDATION_ATTEMPTS, fixtures: Path | None = None,
                  artifact_dir: Path | None = None) -> ValidationResult:
    """Run operator-driven attempts until one scores 1, up to ``max_attempts``.

    ``operator(attempt)`` returns the policy for that attempt (1-based). A task
    with no passing attempt is flagged for revision.
    """
    if not 1 <= max_attempts <= MAX_VALIDATION_ATTEMPTS:
        raise ValueError(f"max_attempts must be in 1..{MAX_VALIDATION_ATTEMPTS}")
    snapshots = SnapshotCache()
    registry = load_catalog()
    verdicts: list[Verdict] = []
    for attempt in range(1, max_attempts + 1):
        res = run_task(task, operator(attempt), snapshots=snapshots, registry=registry,
                       fixtures=fixtures or default_fixtures_path(),
                       artifact_dir=artifact_dir / f"attempt_{attempt}" if artifact_dir else None)
        verdicts.append(res.verdict)
        if res.verdict.score == 1:
            return ValidationResult(task.id, True, attempt, tuple(verdicts))
    return ValidationResult(task.id, False, max_attempts, tuple(verdicts))
