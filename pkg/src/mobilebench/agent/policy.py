"""Planner/grounder policies and the prompt assembly they share."""

from __future__ import annotations

import base64
import json
import os
import re
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Protocol, Sequence

import httpx

from ..actions import (
    Action,
    ActionKind,
    ParseError,
    PlannerTurn,
    Point,
    parse_grounder_output,
    parse_planner_output,
    serialize_action,
)
from ..device.render import Screenshot
from .prompts import GROUNDER_TEMPLATE, PLANNER_TEMPLATE, fill

MAX_SCREENSHOTS = 10


class GroundingFailure(RuntimeError):
    def __init__(self, desc: str, reason: str):
        self.desc = desc
        self.reason = reason
        super().__init__(f"cannot ground {desc!r}: {reason}")


class ScriptExhausted(RuntimeError):
    pass


class PolicyError(RuntimeError):
    """The policy backend could not produce a turn (network, bad reply shape)."""


@dataclass(frozen=True)
class Observation:
    screenshot: str
    user_reply: str | None = None
    tool_result: Mapping[str, Any] | None = None
    step_outcome: Mapping[str, str] | None = None

    def to_json(self) -> dict[str, Any]:
        d: dict[str, Any] = {"screenshot": self.screenshot}
        if self.user_reply is not None:
            d["user_reply"] = self.user_reply
        if self.tool_result is not None:
            d["tool_result"] = dict(self.tool_result)
        if self.step_outcome is not None:
            d["outcome"] = dict(self.step_outcome)
        return d


@dataclass(frozen=True)
class HistoryEntry:
    step_index: int
    thought: str
    action: Action
    observation: Observation


class AgentPolicy(Protocol):
    def reset(self, tool_block: str) -> None:
        """Start a new episode with the given MCP tool listing."""

    def plan(self, goal: str, history: Sequence[HistoryEntry], screenshot: Screenshot,
             feedback: str | None = None) -> PlannerTurn:
        """Next turn; ``feedback`` carries the previous turn's failure, if any."""

    def ground(self, target_desc: str, screenshot: Screenshot) -> Point:
        """Pixel coordinate for a natural-language element description."""


def _ground_checked(policy: AgentPolicy, desc: str, shot: Screenshot) -> Point:
    try:
        x, y = policy.ground(desc, shot)
    except GroundingFailure:
        raise
    except (ParseError, PolicyError) as e:
        raise GroundingFailure(desc, str(e)) from e
    if not (0 <= x < shot.width and 0 <= y < shot.height):
        raise GroundingFailure(desc, f"({x}, {y}) outside {shot.width}x{shot.height}")
    return x, y


def resolve_target(policy: AgentPolicy, turn: PlannerTurn, screenshot: Screenshot) -> Action:
    """Replace element descriptions in ``turn.action`` with grounded coordinates."""
    a = turn.action
    if not a.needs_grounding:
        return a
    point = a.point if a.point is not None else _ground_checked(policy, a.target, screenshot)
    if a.kind is ActionKind.DRAG:
        end = a.end_point if a.end_point is not None else _ground_checked(policy, a.end_target, screenshot)
        return replace(a, target=None, point=point, end_target=None, end_point=end)
    return replace(a, target=None, point=point)


# --- prompt assembly ------------------------------------------------------

def _image_part(png: bytes) -> dict[str, Any]:
    url = "data:image/png;base64," + base64.b64encode(png).decode("ascii")
    return {"type": "image_url", "image_url": {"url": url}}


def _observation_text(obs: Observation) -> str | None:
    if obs.user_reply is not None:
        return f"User reply: {obs.user_reply}"
    if obs.tool_result is not None:
        return f"Tool result ({obs.tool_result.get('status')}): {obs.tool_result.get('content', '')}"
    if obs.step_outcome is not None and obs.step_outcome.get("status") != "ok":
        reason = obs.step_outcome.get("reason", "")
        return f"Action outcome: {obs.step_outcome['status']}" + (f" ({reason})" if reason else "")
    return None


def build_planner_prompt(goal: str, tool_block: str, history: Sequence[HistoryEntry],
                         screenshot: Screenshot | None = None, *,
                         images: Mapping[str, bytes] | None = None,
                         feedback: str | None = None,
                         max_images: int = MAX_SCREENSHOTS) -> list[dict[str, Any]]:
    """Chat messages for one planner call.

    Each past step becomes a user turn (its screenshot) and an assistant turn
    (its thought and action); replies and tool results follow as user text.
    Only the newest ``max_images`` screenshots are attached as images; older
    ones are referenced by digest.
    """
    images = images or {}
    messages: list[dict[str, Any]] = [
        {"role": "system", "content": fill(PLANNER_TEMPLATE, tools=tool_block, goal=goal)}
    ]
    digests = [h.observation.screenshot for h in history]
    if screenshot is not None:
        digests.append(screenshot.digest)
    attach_from = max(len(digests) - max_images, 0)

    def screen_turn(i: int, digest: str, png: bytes | None, label: str) -> dict[str, Any]:
        text = f"{label} (screenshot sha256:{digest[:16]})"
        if png is not None and i >= attach_from:
            return {"role": "user", "content": [{"type": "text", "text": text}, _image_part(png)]}
        return {"role": "user", "content": text}

    for i, h in enumerate(history):
        messages.append(screen_turn(i, h.observation.screenshot, images.get(h.observation.screenshot),
                                    f"Step {h.step_index} screen"))
        messages.append({"role": "assistant",
                         "content": f"Thought: {h.thought}\nAction: {serialize_action(h.action)}"})
        note = _observation_text(h.observation)
        if note is not None:
            messages.append({"role": "user", "content": note})
    if screenshot is not None:
        cur = screen_turn(len(history), screenshot.digest, screenshot.png, "Current screen")
        if feedback:
            extra = f"Your previous output was rejected: {feedback}"
            if isinstance(cur["content"], list):
                cur["content"].append({"type": "text", "text": extra})
            else:
                cur["content"] += "\n" + extra
        messages.append(cur)
    return messages


def build_grounder_prompt(target_desc: str, screenshot: Screenshot) -> list[dict[str, Any]]:
    return [
        {"role": "system", "content": GROUNDER_TEMPLATE},
        {"role": "user", "content": [{"type": "text", "text": f"click: {target_desc}"},
                                     _image_part(screenshot.png)]},
    ]


# --- scripted policy -------------------------------------------------------

_QUOTED = re.compile(r"['\"‘“`]([^'\"’”`]+)['\"’”`]")


class ScriptedPolicy:
    """Replays fixed planner outputs; grounds by exact element text.

    Script items are raw planner strings, parsed on replay so that the same
    path as a model reply is exercised.
    """

    def __init__(self, script: Sequence[str]):
        if not script:
            raise ValueError("script must be non-empty")
        self.script = list(script)
        self._next = 0

    def reset(self, tool_block: str) -> None:
        self._next = 0

    def plan(self, goal: str, history: Sequence[HistoryEntry], screenshot: Screenshot,
             feedback: str | None = None) -> PlannerTurn:
        if self._next >= len(self.script):
            raise ScriptExhausted(f"script has only {len(self.script)} turn(s)")
        raw = self.script[self._next]
        self._next += 1
        return parse_planner_output(raw)

    def ground(self, target_desc: str, screenshot: Screenshot) -> Point:
        wanted = [target_desc] + _QUOTED.findall(target_desc)
        for w in wanted:
            hits = [el for el in screenshot.elements if w in (el.label, el.text)]
            if len(hits) == 1:
                x, y, bw, bh = hits[0].bbox
                return x + bw // 2, y + bh // 2
            if len(hits) > 1:
                raise GroundingFailure(target_desc, f"{len(hits)} elements read {w!r}")
        raise GroundingFailure(target_desc, "no element with that text on screen")


def script_line(action: Action | Mapping[str, Any], thought: str = "") -> str:
    """Planner-format text for one scripted step."""
    body = serialize_action(action) if isinstance(action, Action) else json.dumps(
        dict(action), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return f"Thought: {thought}\nAction: {body}"


# --- chat-endpoint policy --------------------------------------------------

@dataclass
class Endpoint:
    base_url: str
    model: str
    api_key_env: str

    @classmethod
    def from_env(cls, prefix: str, default_model: str) -> Endpoint:
        return cls(
            os.environ.get(f"{prefix}_BASE_URL", ""),
            os.environ.get(f"{prefix}_MODEL", default_model),
            f"{prefix}_API_KEY",
        )

    def complete(self, client: httpx.Client, messages: list[dict[str, Any]]) -> str:
        if not self.base_url:
            raise PolicyError(f"no base URL configured for model {self.model}")
        headers = {}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {"model": self.model, "messages": messages, "temperature": 0.0}
        try:
            resp = client.post(self.base_url.rstrip("/") + "/chat/completions", json=body, headers=headers)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"] or ""
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as e:
            raise PolicyError(f"{type(e).__name__}: {e}") from e


@dataclass
class ChatPolicy:
    """Planner and grounding executor served by OpenAI-compatible endpoints."""

    planner: Endpoint = field(default_factory=lambda: Endpoint.from_env("MOBILEBENCH_PLANNER", "gpt-5"))
    grounder: Endpoint = field(default_factory=lambda: Endpoint.from_env("MOBILEBENCH_GROUNDER", "ui-ins-7b"))
    client: httpx.Client | None = None
    timeout: float = 120.0
    max_images: int = MAX_SCREENSHOTS

    def __post_init__(self) -> None:
        self._tool_block = ""
        self._images: dict[str, bytes] = {}
        if self.client is None:
            self.client = httpx.Client(timeout=self.timeout)

    def reset(self, tool_block: str) -> None:
        self._tool_block = tool_block
        self._images = {}

    def plan(self, goal: str, history: Sequence[HistoryEntry], screenshot: Screenshot,
             feedback: str | None = None) -> PlannerTurn:
        self._images[screenshot.digest] = screenshot.png
        messages = build_planner_prompt(goal, self._tool_block, history, screenshot,
                                        images=self._images, feedback=feedback,
                                        max_images=self.max_images)
        return parse_planner_output(self.planner.complete(self.client, messages))

    def ground(self, target_desc: str, screenshot: Screenshot) -> Point:
        reply = self.grounder.complete(self.client, build_grounder_prompt(target_desc, screenshot))
        return parse_grounder_output(reply)
