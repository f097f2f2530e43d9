"""One episode: screenshot, plan, route, repeat until a terminal condition."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, Mapping, Protocol

from ..actions import ActionKind, ParseError, PlannerTurn, serialize_action
from ..device.render import Screenshot, screenshot as take_screenshot
from ..device.sim import apply_action
from ..device.state import DeviceState, InvariantError
from ..mcp.dispatch import DEFAULT_CAP, ToolTransport, dispatch
from ..mcp.registry import NO_TOOLS_LINE, Registry, render_tool_block
from ..usersim import EndpointError, SimulatedUser
from .policy import (
    AgentPolicy,
    GroundingFailure,
    HistoryEntry,
    Observation,
    PolicyError,
    ScriptExhausted,
    resolve_target,
)

DEFAULT_BUDGET = 50
MAX_CONSECUTIVE_FAILURES = 3


class Termination(str, Enum):
    ANSWERED = "answered"
    STATUS_COMPLETE = "status_complete"
    STATUS_INFEASIBLE = "status_infeasible"
    BUDGET_EXHAUSTED = "budget_exhausted"
    AGENT_FAILURE = "agent_failure"
    INFRASTRUCTURE_ERROR = "infrastructure_error"


class EpisodeTask(Protocol):
    id: str
    goal: str


@dataclass
class McpContext:
    registry: Registry
    transport: ToolTransport
    allowlist: frozenset[tuple[str, str]] = frozenset()
    cap: int = DEFAULT_CAP

    def tool_block(self) -> str:
        return render_tool_block(self.registry, self.allowlist)


def canonical_line(obj: Mapping[str, Any]) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


@dataclass
class EpisodeTrace:
    task_id: str
    goal: str
    snapshot_digest: str
    budget: int
    seed: int
    records: list[dict[str, Any]] = field(default_factory=list)
    termination: Termination | None = None
    answer: str | None = None
    detail: str = ""
    steps: int = 0
    queries: int = 0
    mcp_calls: int = 0
    history: list[HistoryEntry] = field(default_factory=list)
    final_state: DeviceState | None = field(default=None, repr=False)

    @property
    def infra_error(self) -> bool:
        return self.termination is Termination.INFRASTRUCTURE_ERROR

    def header(self) -> dict[str, Any]:
        return {"record": "header", "task_id": self.task_id, "goal": self.goal,
                "snapshot_digest": self.snapshot_digest, "budget": self.budget, "seed": self.seed}

    def footer(self, verdict: Mapping[str, Any] | None = None) -> dict[str, Any]:
        d: dict[str, Any] = {
            "record": "footer",
            "termination": self.termination.value if self.termination else None,
            "steps": self.steps,
            "queries": self.queries,
            "mcp_calls": self.mcp_calls,
            "answer": self.answer,
        }
        if self.detail:
            d["detail"] = self.detail
        if verdict is not None:
            d["verdict"] = dict(verdict)
        return d

    def lines(self, verdict: Mapping[str, Any] | None = None) -> list[str]:
        return [canonical_line(r) for r in [self.header(), *self.records, self.footer(verdict)]]

    def to_jsonl(self, verdict: Mapping[str, Any] | None = None) -> bytes:
        return ("\n".join(self.lines(verdict)) + "\n").encode("utf-8")


def _save_png(shot: Screenshot, screens_dir: Path | None) -> None:
    if screens_dir is None:
        return
    path = screens_dir / f"{shot.digest}.png"
    if not path.exists():
        path.write_bytes(shot.png)


def run_episode(policy: AgentPolicy, task: EpisodeTask, device: DeviceState,
                user: SimulatedUser | None = None, mcp: McpContext | None = None,
                budget: int = DEFAULT_BUDGET, *, snapshot_digest: str = "", seed: int = 0,
                artifact_dir: str | Path | None = None) -> EpisodeTrace:
    """Drive ``policy`` on ``device`` until it answers, declares status, fails or runs out of steps.

    Every planner turn is a step, including ask_user, mcp and failed turns,
    and the terminal turn is counted. Nothing raised by the policy, user or
    tool transport escapes; such failures end up in the trace.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    trace = EpisodeTrace(task.id, task.goal, snapshot_digest, budget, seed)
    screens_dir = None
    if artifact_dir is not None:
        screens_dir = Path(artifact_dir) / "screens"
        screens_dir.mkdir(parents=True, exist_ok=True)

    policy.reset(mcp.tool_block() if mcp is not None else NO_TOOLS_LINE)
    state = device
    dialogue: list[tuple[str, str]] = []
    failures = 0
    feedback: str | None = None

    def finish(reason: Termination, detail: str = "") -> EpisodeTrace:
        trace.termination = reason
        trace.detail = detail
        trace.final_state = state
        return trace

    def fail(step: int, kind: str, detail: str, raw: str | None = None) -> None:
        nonlocal failures, feedback
        rec = {"record": "error", "step": step, "error": kind, "detail": detail}
        if raw is not None:
            rec["raw"] = raw
        trace.records.append(rec)
        failures += 1
        feedback = detail

    for step in range(1, budget + 1):
        shot = take_screenshot(state)
        _save_png(shot, screens_dir)
        trace.steps = step

        try:
            turn: PlannerTurn = policy.plan(task.goal, list(trace.history), shot, feedback)
        except ScriptExhausted as e:
            trace.steps = step - 1
            return finish(Termination.AGENT_FAILURE, f"script exhausted: {e}")
        except ParseError as e:
            fail(step, "parse_error", str(e), getattr(e, "raw", None))
            if failures >= MAX_CONSECUTIVE_FAILURES:
                return finish(Termination.AGENT_FAILURE, f"{failures} consecutive failures")
            continue
        except PolicyError as e:
            fail(step, "policy_error", str(e))
            if failures >= MAX_CONSECUTIVE_FAILURES:
                return finish(Termination.AGENT_FAILURE, f"{failures} consecutive failures")
            continue

        a = turn.action
        obs_kwargs: dict[str, Any] = {}
        extra: dict[str, Any] = {}
        terminal: Termination | None = None

        if a.kind is ActionKind.ASK_USER:
            trace.queries += 1
            if user is None:
                reply_text = "No user is available for this task."
            else:
                try:
                    reply = user.answer_query(a.text, dialogue)
                except EndpointError as e:
                    trace.records.append(_step_record(step, turn, a, Observation(shot.digest)))
                    return finish(Termination.INFRASTRUCTURE_ERROR, f"user endpoint: {e}")
                reply_text = reply.text
                extra["disposition"] = reply.disposition.value
            if any(q == a.text for q, _ in dialogue):
                extra["repeated_question"] = True
            dialogue.append((a.text, reply_text))
            obs_kwargs["user_reply"] = reply_text
        elif a.kind is ActionKind.MCP_CALL:
            trace.mcp_calls += 1
            if mcp is None:
                result = {"status": "tool_error", "content": f"unknown tool: {a.tool_name}",
                          "truncated": False, "original_length": 0}
            else:
                result = dispatch(mcp.registry, a, mcp.transport, allowlist=mcp.allowlist,
                                  cap=mcp.cap).to_json()
            obs_kwargs["tool_result"] = result
        elif a.kind is ActionKind.ANSWER:
            trace.answer = a.text
            terminal = Termination.ANSWERED
        elif a.kind is ActionKind.STATUS:
            terminal = (Termination.STATUS_COMPLETE if a.goal_status == "complete"
                        else Termination.STATUS_INFEASIBLE)
        else:
            try:
                a = resolve_target(policy, turn, shot)
            except GroundingFailure as e:
                fail(step, "grounding_failure", str(e))
                if failures >= MAX_CONSECUTIVE_FAILURES:
                    return finish(Termination.AGENT_FAILURE, f"{failures} consecutive failures")
                continue
            try:
                state, outcome = apply_action(state, a)
            except InvariantError as e:
                return finish(Termination.INFRASTRUCTURE_ERROR, f"device invariant violated: {e}")
            obs_kwargs["step_outcome"] = outcome.to_json()

        failures = 0
        feedback = None
        obs = Observation(shot.digest, **obs_kwargs)
        rec = _step_record(step, turn, a, obs)
        rec.update(extra)
        if turn.warnings:
            rec["warnings"] = list(turn.warnings)
        trace.records.append(rec)
        trace.history.append(HistoryEntry(step, turn.thought, a, obs))
        if terminal is not None:
            return finish(terminal)

    return finish(Termination.BUDGET_EXHAUSTED, f"no terminal action within {budget} steps")


def _step_record(step: int, turn: PlannerTurn, executed, obs: Observation) -> dict[str, Any]:
    rec: dict[str, Any] = {
        "record": "step",
        "step": step,
        "thought": turn.thought,
        "action": json.loads(serialize_action(turn.action)),
        "observation": obs.to_json(),
    }
    if executed != turn.action:
        rec["executed"] = json.loads(serialize_action(executed))
    return rec


def iter_trace(lines: Iterable[str]) -> Iterable[dict[str, Any]]:
    for line in lines:
        if line.strip():
            yield json.loads(line)
