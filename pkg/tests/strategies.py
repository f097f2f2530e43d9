"""Hypothesis strategies shared by the test modules."""

from __future__ import annotations

import json

from hypothesis import strategies as st

from mobilebench.actions import (
    GOAL_STATUSES,
    SCROLL_DIRECTIONS,
    Action,
    ActionKind,
    BARE_KINDS,
    POINT_KINDS,
)

W, H = 1080, 2400

coord = st.integers(min_value=0, max_value=5000)
screen_point = st.tuples(st.integers(0, W - 1), st.integers(0, H - 1))
nonblank = st.text(min_size=1, max_size=40).filter(lambda s: s.strip() != "")
json_scalar = st.one_of(st.none(), st.booleans(), st.integers(-10**6, 10**6), st.text(max_size=20))
params = st.dictionaries(st.text(min_size=1, max_size=12), json_scalar, max_size=4)


@st.composite
def valid_actions(draw) -> Action:
    kind = draw(st.sampled_from(list(ActionKind)))
    if kind in POINT_KINDS:
        if draw(st.booleans()):
            return Action(kind, target=draw(nonblank))
        return Action(kind, point=(draw(coord), draw(coord)))
    if kind is ActionKind.DRAG:
        start = draw(st.one_of(nonblank, st.tuples(coord, coord)))
        end = draw(st.one_of(nonblank, st.tuples(coord, coord)))
        return Action(kind,
                      target=start if isinstance(start, str) else None,
                      point=None if isinstance(start, str) else start,
                      end_target=end if isinstance(end, str) else None,
                      end_point=None if isinstance(end, str) else end)
    if kind is ActionKind.ASK_USER:
        return Action(kind, text=draw(nonblank))
    if kind in (ActionKind.INPUT_TEXT, ActionKind.ANSWER):
        return Action(kind, text=draw(st.text(max_size=60)))
    if kind is ActionKind.SCROLL:
        return Action(kind, direction=draw(st.sampled_from(SCROLL_DIRECTIONS)))
    if kind is ActionKind.STATUS:
        return Action(kind, goal_status=draw(st.sampled_from(GOAL_STATUSES)))
    if kind is ActionKind.MCP_CALL:
        return Action(kind, tool_name=draw(nonblank), params=draw(params))
    assert kind in BARE_KINDS
    return Action(kind)


def _wrap(obj_text: str) -> str:
    return f"Thought: try something\nAction: {obj_text}"


_no_block = st.text(max_size=80).filter(lambda s: "Action:" not in s)
_no_brace = st.text(max_size=40).filter(lambda s: "{" not in s).map(lambda s: "Action: " + s)
_unknown = st.text(min_size=1, max_size=20).filter(
    lambda s: s not in {k.value for k in ActionKind} and s != "mcp_call"
).map(lambda s: _wrap(json.dumps({"action_type": s})))
_missing = st.sampled_from([
    {"action_type": "click"},
    {"action_type": "long_press"},
    {"action_type": "drag", "target_start": "a"},
    {"action_type": "input_text"},
    {"action_type": "ask_user"},
    {"action_type": "scroll"},
    {"action_type": "status"},
    {"action_type": "mcp"},
    {"action_type": "click", "x": 5},
    {"target": "Send"},
]).map(lambda o: _wrap(json.dumps(o)))
_invalid = st.one_of(
    st.text(max_size=10).filter(lambda s: s not in SCROLL_DIRECTIONS).map(
        lambda d: {"action_type": "scroll", "direction": d}),
    st.text(max_size=10).filter(lambda s: s not in GOAL_STATUSES).map(
        lambda g: {"action_type": "status", "goal_status": g}),
    st.integers(max_value=-1).map(lambda x: {"action_type": "click", "x": x, "y": 3}),
    st.sampled_from([1.5, "12", True, None]).map(lambda x: {"action_type": "double_tap", "x": x, "y": 3}),
    st.sampled_from(["", "   ", 7]).map(lambda t: {"action_type": "ask_user", "text": t}),
    st.sampled_from([[], "q", 3]).map(lambda p: {"action_type": "mcp", "action_name": "x", "action_json": p}),
).map(lambda o: _wrap(json.dumps(o)))
_arity = st.lists(st.integers(0, 100), max_size=5).filter(lambda xs: len(xs) != 2).map(
    lambda xs: _wrap(json.dumps({"action_type": "click", "coordinate": xs})))
_malformed = st.sampled_from([
    '{"action_type": "click", "target": "Send"',
    "{'action_type': 'wait'}",
    '{"action_type": "wait",}',
    '{"action_type": wait}',
    '{"action_type": "click", "x": NaN, "y": 1}',
    '{"action_type": "answer" "text": "x"}',
]).map(_wrap)


def invalid_planner_text():
    return st.one_of(_no_block, _no_brace, _unknown, _missing, _invalid, _arity, _malformed)


@st.composite
def device_actions(draw) -> Action:
    """Grounded actions the simulator can execute directly."""
    kind = draw(st.sampled_from([
        ActionKind.CLICK, ActionKind.CLICK, ActionKind.CLICK, ActionKind.DOUBLE_TAP, ActionKind.LONG_PRESS,
        ActionKind.DRAG, ActionKind.INPUT_TEXT, ActionKind.SCROLL, ActionKind.NAVIGATE_HOME,
        ActionKind.NAVIGATE_BACK, ActionKind.KEYBOARD_ENTER, ActionKind.WAIT,
    ]))
    if kind in POINT_KINDS:
        return Action(kind, point=draw(screen_point))
    if kind is ActionKind.DRAG:
        return Action(kind, point=draw(screen_point), end_point=draw(screen_point))
    if kind is ActionKind.INPUT_TEXT:
        return Action(kind, text=draw(st.text(max_size=20)))
    if kind is ActionKind.SCROLL:
        return Action(kind, direction=draw(st.sampled_from(SCROLL_DIRECTIONS)))
    return Action(kind)
