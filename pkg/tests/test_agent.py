import copy
import json

import httpx
import pytest

from mobilebench.actions import ActionKind, PlannerTurn, click, drag, parse_planner_output
from mobilebench.agent import (
    MAX_CONSECUTIVE_FAILURES,
    ChatPolicy,
    Endpoint,
    GroundingFailure,
    HistoryEntry,
    McpContext,
    Observation,
    ScriptedPolicy,
    Termination,
    build_grounder_prompt,
    build_planner_prompt,
    iter_trace,
    resolve_target,
    run_episode,
    script_line,
)
from mobilebench.device import apply_action, screenshot
from mobilebench.mcp import FixtureTransport, load_catalog, render_tool_block
from mobilebench.runner import default_fixtures_path
from mobilebench.usersim import SimulatedUser, UserProfile


class Task:
    def __init__(self, goal="Send an email to Alice.", id="t"):
        self.id, self.goal = id, goal


def lines(*items):
    return [script_line(i) for i in items]


class FixedGrounder(ScriptedPolicy):
    def __init__(self, point):
        super().__init__(["Action: {\"action_type\": \"wait\"}"])
        self.point = point

    def ground(self, target_desc, shot):
        return self.point


# --- prompts ---------------------------------------------------------------

def test_planner_prompt_sections(phone):
    block = render_tool_block(load_catalog(), [("Amap Maps", "maps_geo")])
    msgs = build_planner_prompt("Find the route.", block, [], screenshot(phone))
    system = msgs[0]["content"]
    assert "## User Goal" in system and "## Available MCP Tools" in system
    assert "Find the route." in system and "### maps_geo (Amap Maps)" in system
    assert "{{" not in system
    assert msgs[-1]["role"] == "user"
    assert msgs[-1]["content"][1]["image_url"]["url"].startswith("data:image/png;base64,")


def test_planner_prompt_is_pure(phone):
    shot = screenshot(phone)
    hist = [HistoryEntry(1, "look", click((1, 1)), Observation(shot.digest, step_outcome={"status": "no_effect"}))]
    frozen = copy.deepcopy(hist)
    a = build_planner_prompt("g", "tools", hist, shot, images={shot.digest: shot.png})
    b = build_planner_prompt("g", "tools", hist, shot, images={shot.digest: shot.png})
    assert a == b and hist == frozen
    assert any(m["content"] == "Action outcome: no_effect" for m in a)


def test_planner_prompt_caps_images(phone):
    shot = screenshot(phone)
    hist = [HistoryEntry(i, "", click((1, 1)), Observation(shot.digest)) for i in range(1, 13)]
    msgs = build_planner_prompt("g", "t", hist, shot, images={shot.digest: shot.png}, max_images=10)
    n_images = sum(1 for m in msgs if isinstance(m["content"], list))
    assert n_images == 10


def test_feedback_is_attached(phone):
    msgs = build_planner_prompt("g", "t", [], screenshot(phone), feedback="MissingField: target")
    assert "MissingField: target" in msgs[-1]["content"][-1]["text"]


def test_grounder_prompt_has_only_current_screen(phone):
    msgs = build_grounder_prompt("Send button", screenshot(phone))
    parts = msgs[1]["content"]
    assert parts[0]["text"] == "click: Send button"
    assert sum(1 for p in parts if p["type"] == "image_url") == 1


# --- grounding -------------------------------------------------------------

def _compose_screen(phone):
    pol = ScriptedPolicy(["x"])
    s = phone
    for label in ("Mail", "Compose"):
        turn = PlannerTurn("", click(label), "")
        s, _ = apply_action(s, resolve_target(pol, turn, screenshot(s)))
    return s


def test_resolve_target_send_button(phone):
    shot = screenshot(_compose_screen(phone))
    grounded = resolve_target(ScriptedPolicy(["x"]), PlannerTurn("", click("the 'Send' button"), ""), shot)
    assert grounded.point == (980, 2310) and grounded.target is None


def test_resolve_target_out_of_bounds(phone):
    with pytest.raises(GroundingFailure):
        resolve_target(FixedGrounder((9999, 9999)), PlannerTurn("", click("Send"), ""), screenshot(phone))


def test_resolve_drag_grounds_both_ends(phone):
    grounded = resolve_target(FixedGrounder((5, 6)), PlannerTurn("", drag("a", (7, 8)), ""), screenshot(phone))
    assert (grounded.point, grounded.end_point) == ((5, 6), (7, 8))


def test_ambiguous_grounding_fails(phone):
    shot = screenshot(_compose_screen(phone))
    # duplicate the first element so its text matches twice
    dup = shot.__class__(shot.png, shot.digest, shot.width, shot.height, shot.elements + shot.elements[:1])
    with pytest.raises(GroundingFailure):
        ScriptedPolicy(["x"]).ground(shot.elements[0].text, dup)


# --- episode loop -----------------------------------------------------------

MAIL = [
    {"action_type": "click", "target": "Mail"},
    {"action_type": "click", "target": "Compose"},
    {"action_type": "input_text", "text": "alice@example.com"},
    {"action_type": "click", "target": "Send"},
    {"action_type": "status", "goal_status": "complete"},
]


def test_scripted_mail_episode(phone, tmp_path):
    trace = run_episode(ScriptedPolicy(lines(*MAIL)), Task(), phone, artifact_dir=tmp_path)
    assert trace.termination is Termination.STATUS_COMPLETE and trace.steps == 5
    steps = [r for r in trace.records if r["record"] == "step"]
    assert steps[3]["executed"] == {"action_type": "click", "x": 980, "y": 2310}
    assert trace.final_state.stores["callbacks"].rows[-1]["payload"]["to"] == "alice@example.com"
    assert len(list((tmp_path / "screens").glob("*.png"))) >= 4
    parsed = list(iter_trace(trace.to_jsonl().decode().splitlines()))
    assert parsed[0]["record"] == "header" and parsed[-1]["record"] == "footer"
    assert phone.stores["callbacks"].rows == []


def test_consecutive_parse_failures_end_episode(phone):
    trace = run_episode(ScriptedPolicy(["no action here"] * 5), Task(), phone)
    assert trace.termination is Termination.AGENT_FAILURE
    assert trace.steps == MAX_CONSECUTIVE_FAILURES
    assert [r["error"] for r in trace.records] == ["parse_error"] * 3


def test_failure_counter_resets_after_success(phone):
    script = ["junk", "junk", script_line({"action_type": "wait"}), "junk", "junk",
              script_line({"action_type": "answer", "text": "done"})]
    trace = run_episode(ScriptedPolicy(script), Task(), phone)
    assert trace.termination is Termination.ANSWERED and trace.steps == 6


def test_grounding_failure_counts_as_step(phone):
    script = lines({"action_type": "click", "target": "Nonexistent"}, {"action_type": "answer", "text": "x"})
    trace = run_episode(ScriptedPolicy(script), Task(), phone)
    assert trace.records[0]["error"] == "grounding_failure"
    assert trace.steps == 2


def test_script_exhaustion(phone):
    trace = run_episode(ScriptedPolicy(lines({"action_type": "wait"})), Task(), phone)
    assert trace.termination is Termination.AGENT_FAILURE and trace.steps == 1


def test_ask_user_is_recorded(phone):
    profile = UserProfile("Email Kevin.", "Kevin's email: kevin@example.com")
    q = {"action_type": "ask_user", "text": "What is Kevin's email?"}
    trace = run_episode(ScriptedPolicy(lines(q, q, {"action_type": "answer", "text": "ok"})), Task(),
                        phone, SimulatedUser(profile))
    first, second = trace.records[0], trace.records[1]
    assert first["observation"]["user_reply"] == "kevin@example.com"
    assert first["disposition"] == "answered" and "repeated_question" not in first
    assert second["repeated_question"] is True
    assert trace.queries == 2 and trace.steps == 3


def test_mcp_call_is_recorded(phone):
    mcp = McpContext(load_catalog(), FixtureTransport.from_file(default_fixtures_path()),
                     frozenset({("Stockstar", "get_stock_quote")}))
    call = {"action_type": "mcp", "action_name": "get_stock_quote", "action_json": {"symbol": "600519"}}
    trace = run_episode(ScriptedPolicy(lines(call, {"action_type": "answer", "text": "1458.00"})),
                        Task(), phone, mcp=mcp)
    result = trace.records[0]["observation"]["tool_result"]
    assert result["status"] == "ok" and "1458.00" in result["content"]
    assert trace.mcp_calls == 1


def test_budget_must_be_positive(phone):
    with pytest.raises(ValueError):
        run_episode(ScriptedPolicy(["x"]), Task(), phone, budget=0)


# --- chat policy ------------------------------------------------------------

SECRET = "sk-never-log-this"


def test_chat_policy_keeps_credentials_out_of_traces(phone, monkeypatch, tmp_path):
    monkeypatch.setenv("MOBILEBENCH_PLANNER_API_KEY", SECRET)
    monkeypatch.setenv("MOBILEBENCH_GROUNDER_API_KEY", SECRET)
    replies = iter([
        'Thought: open mail\nAction: {"action_type": "click", "target": "Mail app icon"}',
        '<tool_call>{"name": "mobile_use", "arguments": {"action": "click", "coordinate": [160, 410]}}</tool_call>',
        'Thought: done\nAction: {"action_type": "status", "goal_status": "complete"}',
    ])
    auth = []

    def handler(request):
        auth.append(request.headers["authorization"])
        body = json.loads(request.content)
        assert body["temperature"] == 0.0
        return httpx.Response(200, json={"choices": [{"message": {"content": next(replies)}}]})

    client = httpx.Client(transport=httpx.MockTransport(handler))
    policy = ChatPolicy(Endpoint("http://planner.test/v1", "p", "MOBILEBENCH_PLANNER_API_KEY"),
                        Endpoint("http://grounder.test/v1", "g", "MOBILEBENCH_GROUNDER_API_KEY"), client=client)
    trace = run_episode(policy, Task(), phone, artifact_dir=tmp_path)
    assert trace.termination is Termination.STATUS_COMPLETE
    assert trace.final_state.foreground == ("mail", "inbox")
    assert auth == [f"Bearer {SECRET}"] * 3
    assert SECRET.encode() not in trace.to_jsonl()


def test_chat_policy_without_endpoint_fails_cleanly(phone, monkeypatch):
    monkeypatch.delenv("MOBILEBENCH_PLANNER_BASE_URL", raising=False)
    trace = run_episode(ChatPolicy(client=httpx.Client(transport=httpx.MockTransport(lambda r: httpx.Response(500)))),
                        Task(), phone)
    assert trace.termination is Termination.AGENT_FAILURE
    assert {r["error"] for r in trace.records} == {"policy_error"}


def test_endpoint_from_env(monkeypatch):
    monkeypatch.setenv("X_BASE_URL", "http://h")
    monkeypatch.setenv("X_MODEL", "m1")
    ep = Endpoint.from_env("X", "default")
    assert (ep.base_url, ep.model, ep.api_key_env) == ("http://h", "m1", "X_API_KEY")
    assert Endpoint.from_env("Y", "default").model == "default"
