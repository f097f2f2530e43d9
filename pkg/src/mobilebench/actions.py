"""Hybrid action space and the planner/grounder wire formats.

Planner output looks like::

    Thought: I should open the compose screen.
    Action: {"action_type": "click", "target": "Compose"}

Grounder output wraps a single call in ``<tool_call>`` tags and carries a
``[x, y]`` pixel coordinate (origin top-left).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping


class ActionKind(str, Enum):
    CLICK = "click"
    DOUBLE_TAP = "double_tap"
    LONG_PRESS = "long_press"
    DRAG = "drag"
    INPUT_TEXT = "input_text"
    SCROLL = "scroll"
    NAVIGATE_HOME = "navigate_home"
    NAVIGATE_BACK = "navigate_back"
    KEYBOARD_ENTER = "keyboard_enter"
    WAIT = "wait"
    ANSWER = "answer"
    STATUS = "status"
    ASK_USER = "ask_user"
    MCP_CALL = "mcp"


# "mcp_call" is the action-table name; planners emit "mcp".
_ALIASES = {"mcp_call": ActionKind.MCP_CALL}

POINT_KINDS = frozenset({ActionKind.CLICK, ActionKind.DOUBLE_TAP, ActionKind.LONG_PRESS})
TEXT_KINDS = frozenset({ActionKind.INPUT_TEXT, ActionKind.ANSWER, ActionKind.ASK_USER})
BARE_KINDS = frozenset({
    ActionKind.NAVIGATE_HOME,
    ActionKind.NAVIGATE_BACK,
    ActionKind.KEYBOARD_ENTER,
    ActionKind.WAIT,
})
# Kinds that never reach the device.
CONTROL_KINDS = frozenset({
    ActionKind.ANSWER, ActionKind.STATUS, ActionKind.ASK_USER, ActionKind.MCP_CALL,
})

SCROLL_DIRECTIONS = ("up", "down", "left", "right")
GOAL_STATUSES = ("complete", "infeasible")

Point = tuple[int, int]


class ParseErrorKind(str, Enum):
    NO_ACTION_BLOCK = "NoActionBlock"
    UNKNOWN_ACTION_TYPE = "UnknownActionType"
    MISSING_FIELD = "MissingField"
    INVALID_FIELD = "InvalidField"
    MALFORMED_JSON = "MalformedJson"
    NO_TOOL_CALL_BLOCK = "NoToolCallBlock"
    BAD_COORDINATE_ARITY = "BadCoordinateArity"


class ParseError(ValueError):
    """Classified failure to read model output.

    ``detail`` carries the field name for MissingField/InvalidField and the
    character offset for MalformedJson.
    """

    def __init__(self, kind: ParseErrorKind, detail: Any = None, message: str = ""):
        self.kind = kind
        self.detail = detail
        text = kind.value if detail is None else f"{kind.value}({detail})"
        super().__init__(f"{text}: {message}" if message else text)


@dataclass(frozen=True)
class Action:
    """One element of the action space.

    Click-like actions carry either ``target`` (a natural-language element
    description) or ``point``; drags carry the same pair for each endpoint.
    """

    kind: ActionKind
    target: str | None = None
    point: Point | None = None
    end_target: str | None = None
    end_point: Point | None = None
    text: str | None = None
    direction: str | None = None
    goal_status: str | None = None
    tool_name: str | None = None
    params: Mapping[str, Any] | None = None

    @property
    def needs_grounding(self) -> bool:
        if self.kind in POINT_KINDS:
            return self.point is None
        if self.kind is ActionKind.DRAG:
            return self.point is None or self.end_point is None
        return False

    def in_bounds(self, width: int, height: int) -> bool:
        for p in (self.point, self.end_point):
            if p is not None and not (0 <= p[0] < width and 0 <= p[1] < height):
                return False
        return True

    def to_wire(self) -> dict[str, Any]:
        obj: dict[str, Any] = {"action_type": self.kind.value}
        k = self.kind
        if k in POINT_KINDS:
            if self.point is not None:
                obj["x"], obj["y"] = self.point
            else:
                obj["target"] = self.target
        elif k is ActionKind.DRAG:
            if self.point is not None:
                obj["start_x"], obj["start_y"] = self.point
            else:
                obj["target_start"] = self.target
            if self.end_point is not None:
                obj["end_x"], obj["end_y"] = self.end_point
            else:
                obj["target_end"] = self.end_target
        elif k in TEXT_KINDS:
            obj["text"] = self.text
        elif k is ActionKind.SCROLL:
            obj["direction"] = self.direction
        elif k is ActionKind.STATUS:
            obj["goal_status"] = self.goal_status
        elif k is ActionKind.MCP_CALL:
            obj["action_name"] = self.tool_name
            obj["action_json"] = dict(self.params or {})
        return obj


# Convenience constructors, mostly for scripts and tests.
def click(target: str | Point) -> Action:
    return _pointed(ActionKind.CLICK, target)


def double_tap(target: str | Point) -> Action:
    return _pointed(ActionKind.DOUBLE_TAP, target)


def long_press(target: str | Point) -> Action:
    return _pointed(ActionKind.LONG_PRESS, target)


def _pointed(kind: ActionKind, target: str | Point) -> Action:
    if isinstance(target, str):
        return Action(kind, target=target)
    return Action(kind, point=(int(target[0]), int(target[1])))


def drag(start: str | Point, end: str | Point) -> Action:
    kw: dict[str, Any] = {}
    if isinstance(start, str):
        kw["target"] = start
    else:
        kw["point"] = tuple(start)
    if isinstance(end, str):
        kw["end_target"] = end
    else:
        kw["end_point"] = tuple(end)
    return Action(ActionKind.DRAG, **kw)


def input_text(text: str) -> Action:
    return Action(ActionKind.INPUT_TEXT, text=text)


def scroll(direction: str) -> Action:
    return Action(ActionKind.SCROLL, direction=direction)


def answer(text: str) -> Action:
    return Action(ActionKind.ANSWER, text=text)


def status(goal_status: str) -> Action:
    return Action(ActionKind.STATUS, goal_status=goal_status)


def ask_user(text: str) -> Action:
    return Action(ActionKind.ASK_USER, text=text)


def mcp_call(tool_name: str, params: Mapping[str, Any] | None = None) -> Action:
    return Action(ActionKind.MCP_CALL, tool_name=tool_name, params=dict(params or {}))


def bare(kind: ActionKind) -> Action:
    return Action(kind)


@dataclass(frozen=True)
class PlannerTurn:
    thought: str
    action: Action
    raw: str
    warnings: tuple[str, ...] = field(default=())


def serialize_action(a: Action) -> str:
    """Canonical, key-sorted compact JSON for ``a``."""
    return json.dumps(a.to_wire(), sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def _reject_constant(name: str) -> Any:
    raise ValueError(f"non-finite number {name}")


def find_json_object(text: str, start: int = 0) -> tuple[int, int] | None:
    """Locate the first balanced ``{...}`` at or after ``start``.

    Returns ``(begin, end)`` with ``end`` exclusive, or None when no opening
    brace exists. Raises ParseError(MalformedJson) if the braces never close.
    String literals are skipped so braces inside quoted text do not count.
    """
    begin = text.find("{", start)
    if begin < 0:
        return None
    depth = 0
    in_str = False
    escaped = False
    for i in range(begin, len(text)):
        ch = text[i]
        if in_str:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
            continue
        if ch == '"':
            in_str = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return begin, i + 1
    raise ParseError(ParseErrorKind.MALFORMED_JSON, len(text), "unbalanced braces")


def _load_object(text: str, begin: int, end: int) -> dict[str, Any]:
    try:
        obj = json.loads(text[begin:end], parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ParseError(ParseErrorKind.MALFORMED_JSON, begin + e.pos, e.msg) from None
    except (ValueError, RecursionError) as e:
        raise ParseError(ParseErrorKind.MALFORMED_JSON, begin, str(e)) from None
    return obj


_KNOWN_KEYS: dict[ActionKind, frozenset[str]] = {
    **{k: frozenset({"target", "x", "y", "coordinate"}) for k in POINT_KINDS},
    ActionKind.DRAG: frozenset({
        "target_start", "target_end", "start_x", "start_y", "end_x", "end_y",
    }),
    **{k: frozenset({"text"}) for k in TEXT_KINDS},
    ActionKind.SCROLL: frozenset({"direction"}),
    ActionKind.STATUS: frozenset({"goal_status"}),
    ActionKind.MCP_CALL: frozenset({"action_name", "action_json"}),
    **{k: frozenset() for k in BARE_KINDS},
}


def _coord(obj: Mapping[str, Any], key: str) -> int:
    if key not in obj:
        raise ParseError(ParseErrorKind.MISSING_FIELD, key)
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ParseError(ParseErrorKind.INVALID_FIELD, key, "expected a non-negative integer")
    return v


def _nonempty_str(obj: Mapping[str, Any], key: str, allow_empty: bool = False) -> str:
    if key not in obj:
        raise ParseError(ParseErrorKind.MISSING_FIELD, key)
    v = obj[key]
    if not isinstance(v, str) or (not allow_empty and not v.strip()):
        raise ParseError(ParseErrorKind.INVALID_FIELD, key, "expected a non-empty string")
    return v


def _point_or_target(obj, target_key, x_key, y_key):
    if target_key in obj:
        return _nonempty_str(obj, target_key), None
    if x_key in obj or y_key in obj:
        return None, (_coord(obj, x_key), _coord(obj, y_key))
    return None, None


def action_from_wire(obj: Mapping[str, Any]) -> tuple[Action, list[str]]:
    """Build an Action from a decoded JSON object; returns (action, warnings)."""
    if "action_type" not in obj:
        raise ParseError(ParseErrorKind.MISSING_FIELD, "action_type")
    name = obj["action_type"]
    if not isinstance(name, str):
        raise ParseError(ParseErrorKind.UNKNOWN_ACTION_TYPE, repr(name))
    try:
        kind = _ALIASES.get(name) or ActionKind(name)
    except ValueError:
        raise ParseError(ParseErrorKind.UNKNOWN_ACTION_TYPE, name) from None

    extra = sorted(set(obj) - _KNOWN_KEYS[kind] - {"action_type"})
    warnings = [f"ignored unknown key {k!r}" for k in extra]

    if kind in POINT_KINDS:
        if "target" in obj:
            return Action(kind, target=_nonempty_str(obj, "target")), warnings
        if "coordinate" in obj:
            xy = obj["coordinate"]
            if not isinstance(xy, list) or len(xy) != 2:
                raise ParseError(ParseErrorKind.BAD_COORDINATE_ARITY, "coordinate")
            return Action(kind, point=(_coord({"x": xy[0]}, "x"), _coord({"y": xy[1]}, "y"))), warnings
        if "x" in obj or "y" in obj:
            return Action(kind, point=(_coord(obj, "x"), _coord(obj, "y"))), warnings
        raise ParseError(ParseErrorKind.MISSING_FIELD, "target")

    if kind is ActionKind.DRAG:
        t0, p0 = _point_or_target(obj, "target_start", "start_x", "start_y")
        if t0 is None and p0 is None:
            raise ParseError(ParseErrorKind.MISSING_FIELD, "target_start")
        t1, p1 = _point_or_target(obj, "target_end", "end_x", "end_y")
        if t1 is None and p1 is None:
            raise ParseError(ParseErrorKind.MISSING_FIELD, "target_end")
        return Action(kind, target=t0, point=p0, end_target=t1, end_point=p1), warnings

    if kind in TEXT_KINDS:
        # Answers and typed text may legitimately be empty strings.
        text = _nonempty_str(obj, "text", allow_empty=kind is not ActionKind.ASK_USER)
        return Action(kind, text=text), warnings

    if kind is ActionKind.SCROLL:
        d = _nonempty_str(obj, "direction")
        if d not in SCROLL_DIRECTIONS:
            raise ParseError(ParseErrorKind.INVALID_FIELD, "direction", d)
        return Action(kind, direction=d), warnings

    if kind is ActionKind.STATUS:
        s = _nonempty_str(obj, "goal_status")
        if s not in GOAL_STATUSES:
            raise ParseError(ParseErrorKind.INVALID_FIELD, "goal_status", s)
        return Action(kind, goal_status=s), warnings

    if kind is ActionKind.MCP_CALL:
        tool = _nonempty_str(obj, "action_name")
        params = obj.get("action_json", {})
        if not isinstance(params, dict):
            raise ParseError(ParseErrorKind.INVALID_FIELD, "action_json", "expected an object")
        return Action(kind, tool_name=tool, params=params), warnings

    return Action(kind), warnings


def parse_planner_output(raw: str) -> PlannerTurn:
    """Read a ``Thought:`` / ``Action:`` planner reply.

    Only the first JSON object after ``Action:`` is used; anything after it
    is ignored, with a warning if it looks like a second action.
    """
    if not isinstance(raw, str):
        raise ParseError(ParseErrorKind.NO_ACTION_BLOCK, message="output is not text")
    marker = raw.find("Action:")
    if marker < 0:
        raise ParseError(ParseErrorKind.NO_ACTION_BLOCK)
    span = find_json_object(raw, marker + len("Action:"))
    if span is None:
        raise ParseError(ParseErrorKind.NO_ACTION_BLOCK)
    obj = _load_object(raw, *span)
    action, warnings = action_from_wire(obj)

    if '"action_type"' in raw[span[1]:]:
        warnings.append("extra action after the first was ignored")

    thought = ""
    t = raw.find("Thought:")
    if 0 <= t < marker:
        thought = raw[t + len("Thought:"):marker].strip()
    return PlannerTurn(thought=thought, action=action, raw=raw, warnings=tuple(warnings))


def parse_grounder_output(raw: str) -> Point:
    """Extract the ``[x, y]`` coordinate from a grounding-executor reply."""
    if not isinstance(raw, str):
        raise ParseError(ParseErrorKind.NO_TOOL_CALL_BLOCK)
    open_tag, close_tag = "<tool_call>", "</tool_call>"
    a = raw.find(open_tag)
    b = raw.find(close_tag, a + len(open_tag)) if a >= 0 else -1
    if a < 0 or b < 0:
        raise ParseError(ParseErrorKind.NO_TOOL_CALL_BLOCK)
    body_start = a + len(open_tag)
    span = find_json_object(raw[:b], body_start)
    if span is None:
        raise ParseError(ParseErrorKind.MALFORMED_JSON, body_start, "empty tool_call")
    obj = _load_object(raw, *span)
    args = obj.get("arguments")
    if not isinstance(args, dict):
        raise ParseError(ParseErrorKind.MISSING_FIELD, "arguments")
    if "coordinate" not in args:
        raise ParseError(ParseErrorKind.MISSING_FIELD, "coordinate")
    xy = args["coordinate"]
    if not isinstance(xy, list) or len(xy) != 2:
        raise ParseError(ParseErrorKind.BAD_COORDINATE_ARITY, "coordinate")
    out = []
    for v in xy:
        # Grounding models occasionally emit floats; round to the pixel grid.
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
            raise ParseError(ParseErrorKind.INVALID_FIELD, "coordinate")
        out.append(int(round(v)))
    return out[0], out[1]
