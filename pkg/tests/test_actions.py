import json

import pytest
from hypothesis import given, settings

from mobilebench.actions import (
    Action,
    ActionKind,
    ParseError,
    ParseErrorKind,
    answer,
    ask_user,
    bare,
    click,
    drag,
    mcp_call,
    parse_grounder_output,
    parse_planner_output,
    scroll,
    serialize_action,
    status,
)

from strategies import valid_actions


def test_action_space_has_fourteen_kinds():
    assert len(ActionKind) == 14


def test_serialization_is_canonical():
    a = click("Send button")
    assert serialize_action(a) == '{"action_type":"click","target":"Send button"}'
    m = mcp_call("maps_distance", {"origins": "b", "destination": "a"})
    assert serialize_action(m) == (
        '{"action_json":{"destination":"a","origins":"b"},"action_name":"maps_distance","action_type":"mcp"}'
    )


def test_non_ascii_text_is_kept_verbatim():
    assert "北京" in serialize_action(answer("北京"))


@pytest.mark.parametrize("raw, expected", [
    ('Thought: open it\nAction: {"action_type": "click", "target": "Mail icon"}', click("Mail icon")),
    ('Action: {"action_type": "click", "x": 10, "y": 20}', click((10, 20))),
    ('Action: {"action_type": "click", "coordinate": [10, 20]}', click((10, 20))),
    ('Action: {"action_type": "scroll", "direction": "down"}', scroll("down")),
    ('Action: {"action_type": "status", "goal_status": "complete"}', status("complete")),
    ('Action: {"action_type": "ask_user", "text": "Which Kevin?"}', ask_user("Which Kevin?")),
    ('Action: {"action_type": "answer", "text": ""}', answer("")),
    ('Action: {"action_type": "navigate_back"}', bare(ActionKind.NAVIGATE_BACK)),
    ('Action: {"action_type": "mcp_call", "action_name": "t", "action_json": {"a": 1}}', mcp_call("t", {"a": 1})),
    ('Action: {"action_type": "drag", "target_start": "file", "end_x": 5, "end_y": 6}', drag("file", (5, 6))),
])
def test_parse_examples(raw, expected):
    assert parse_planner_output(raw).action == expected


def test_thought_is_extracted():
    turn = parse_planner_output('Thought:  go home \nAction: {"action_type": "navigate_home"}')
    assert turn.thought == "go home"


def test_only_first_action_is_used():
    turn = parse_planner_output('Action: {"action_type": "wait"}\nAction: {"action_type": "navigate_home"}')
    assert turn.action.kind is ActionKind.WAIT
    assert any("extra action" in w for w in turn.warnings)


def test_unknown_keys_warn():
    turn = parse_planner_output('Action: {"action_type": "wait", "why": 1}')
    assert turn.warnings == ("ignored unknown key 'why'",)


def test_braces_inside_strings_do_not_confuse_the_scanner():
    turn = parse_planner_output('Action: {"action_type": "input_text", "text": "a } b {"}')
    assert turn.action.text == "a } b {"


@pytest.mark.parametrize("raw, kind", [
    ("I will click send.", ParseErrorKind.NO_ACTION_BLOCK),
    ("Action: none", ParseErrorKind.NO_ACTION_BLOCK),
    ('Action: {"action_type": "fly"}', ParseErrorKind.UNKNOWN_ACTION_TYPE),
    ('Action: {"type": "click", "target": "x"}', ParseErrorKind.MISSING_FIELD),
    ('Action: {"action_type": "click"}', ParseErrorKind.MISSING_FIELD),
    ('Action: {"action_type": "scroll", "direction": "sideways"}', ParseErrorKind.INVALID_FIELD),
    ('Action: {"action_type": "click", "x": -1, "y": 0}', ParseErrorKind.INVALID_FIELD),
    ('Action: {"action_type": "click", "target": "x"', ParseErrorKind.MALFORMED_JSON),
    ('Action: {"action_type": "click", "coordinate": [1, 2, 3]}', ParseErrorKind.BAD_COORDINATE_ARITY),
])
def test_parse_errors(raw, kind):
    with pytest.raises(ParseError) as info:
        parse_planner_output(raw)
    assert info.value.kind is kind


def test_grounder_reply():
    raw = '<tool_call>\n{"name": "mobile_use", "arguments": {"action": "click", "coordinate": [980, 2310]}}\n</tool_call>'
    assert parse_grounder_output(raw) == (980, 2310)


@pytest.mark.parametrize("raw, kind", [
    ("click at 3,4", ParseErrorKind.NO_TOOL_CALL_BLOCK),
    ('<tool_call>{"arguments": {}}</tool_call>', ParseErrorKind.MISSING_FIELD),
    ('<tool_call>{"arguments": {"coordinate": [1]}}</tool_call>', ParseErrorKind.BAD_COORDINATE_ARITY),
    ("<tool_call>{oops}</tool_call>", ParseErrorKind.MALFORMED_JSON),
])
def test_grounder_errors(raw, kind):
    with pytest.raises(ParseError) as info:
        parse_grounder_output(raw)
    assert info.value.kind is kind


@settings(max_examples=200, deadline=None)
@given(valid_actions())
def test_wire_form_is_valid_json(a):
    obj = json.loads(serialize_action(a))
    assert obj["action_type"] == a.kind.value


def test_needs_grounding():
    assert click("Send").needs_grounding
    assert not click((1, 2)).needs_grounding
    assert drag((1, 2), "bin").needs_grounding
    assert not Action(ActionKind.WAIT).needs_grounding
