"""Task file parsing and validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from fnmatch import fnmatchcase
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import yaml

from ..actions import ParseError, parse_planner_output
from ..agent.episode import DEFAULT_BUDGET
from ..agent.policy import script_line
from ..device.fixtures import compose_yaml, load_yaml
from ..evaluators import ConfigError, EvaluatorConfig
from ..mcp.dispatch import DEFAULT_CAP, MIN_CAP
from ..mcp.registry import Registry, load_catalog
from ..metrics import Category


class SchemaError(ValueError):
    def __init__(self, task_id: str | None, field_name: str, message: str, line: int | None = None):
        self.task_id = task_id
        self.field = field_name
        self.line = line
        where = f"line {line}: " if line is not None else ""
        who = f"task {task_id!r}" if task_id else "task file"
        super().__init__(f"{where}{who}, field {field_name!r}: {message}")


@dataclass(frozen=True)
class TaskSpec:
    id: str
    goal: str
    category: Category
    world: Path
    start: str
    evaluator: EvaluatorConfig
    user_info: str = ""
    mcp_allowlist: frozenset[tuple[str, str]] = frozenset()
    budget: int = DEFAULT_BUDGET
    apps: tuple[str, ...] = ()
    cap: int = DEFAULT_CAP
    expected_steps: int | None = None
    solution: tuple[str, ...] = ()
    sabotage: tuple[str, ...] = ()
    sabotage_label: str = ""
    line: int | None = field(default=None, compare=False)

    @property
    def snapshot_ref(self) -> str:
        return f"{self.world.name}#{self.start}"

    def script(self, which: str) -> tuple[str, ...]:
        if which == "solution":
            return self.solution
        if which == "sabotage":
            return self.sabotage
        raise ValueError(f"unknown script {which!r}")


def default_tasks_path() -> Path:
    return Path(str(resources.files("mobilebench").joinpath("data/golden_tasks.yaml")))


def default_fixtures_path() -> Path:
    return Path(str(resources.files("mobilebench").joinpath("data/mcp_fixtures.yaml")))


def _line_index(text: str) -> tuple[int | None, list[tuple[int, dict[str, int]]]]:
    """Line of the ``tasks`` key and, per task, its line and each field's line."""
    root = compose_yaml(text)
    out: list[tuple[int, dict[str, int]]] = []
    if not isinstance(root, yaml.MappingNode):
        return None, out
    for key, value in root.value:
        if key.value == "tasks" and isinstance(value, yaml.SequenceNode):
            for item in value.value:
                fields = {}
                if isinstance(item, yaml.MappingNode):
                    fields = {k.value: k.start_mark.line + 1 for k, _ in item.value}
                out.append((item.start_mark.line + 1, fields))
            return key.start_mark.line + 1, out
    return None, out


def _script(raw: Any, tid: str, name: str, line: int | None) -> tuple[str, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise SchemaError(tid, name, "must be a list of steps", line)
    lines = []
    for i, step in enumerate(raw, 1):
        if isinstance(step, str):
            text = step
        elif isinstance(step, Mapping) and "action" in step:
            text = script_line(step["action"], str(step.get("thought", "")))
        else:
            raise SchemaError(tid, name, f"step {i} needs an 'action' mapping", line)
        try:
            parse_planner_output(text)
        except ParseError as e:
            raise SchemaError(tid, name, f"step {i} does not parse: {e}", line) from None
        lines.append(text)
    return tuple(lines)


def _task(data: Mapping[str, Any], base: Path, default_world: str | None, registry: Registry,
          line: int, fields: Mapping[str, int]) -> TaskSpec:
    tid = data.get("id")
    at = lambda f: fields.get(f, line)
    if not isinstance(tid, str) or not tid:
        raise SchemaError(None, "id", "missing or not a string", at("id"))
    for f in ("goal", "category", "evaluator", "snapshot"):
        if f not in data:
            raise SchemaError(tid, f, "missing", line)
    try:
        category = Category(data["category"])
    except ValueError:
        raise SchemaError(tid, "category", f"unknown category {data['category']!r}", at("category")) from None
    try:
        evaluator = EvaluatorConfig.from_mapping(data["evaluator"])
    except (ConfigError, TypeError, ValueError) as e:
        raise SchemaError(tid, "evaluator", str(e), at("evaluator")) from None

    user_info = str(data.get("user_info") or "")
    if category is Category.INTERACTION and not user_info.strip():
        raise SchemaError(tid, "user_info", "interaction tasks need withheld user information", at("user_info"))

    allow = set()
    for ref in data.get("mcp_allowlist") or []:
        try:
            allow.add(registry.resolve(str(ref)))
        except KeyError:
            raise SchemaError(tid, "mcp_allowlist", f"{ref!r} is not a unique catalog tool", at("mcp_allowlist")) from None
    if category is Category.MCP and not allow:
        raise SchemaError(tid, "mcp_allowlist", "mcp tasks need at least one tool", at("mcp_allowlist"))

    budget = data.get("budget", DEFAULT_BUDGET)
    if not isinstance(budget, int) or isinstance(budget, bool) or budget < 1:
        raise SchemaError(tid, "budget", "must be an integer >= 1", at("budget"))
    cap = data.get("cap", DEFAULT_CAP)
    if not isinstance(cap, int) or cap < MIN_CAP:
        raise SchemaError(tid, "cap", f"must be an integer >= {MIN_CAP}", at("cap"))

    world_ref = data.get("world", default_world)
    if not world_ref:
        raise SchemaError(tid, "world", "no world given for this task or the file", line)
    world = (base / world_ref).resolve()
    if not world.is_file():
        raise SchemaError(tid, "world", f"{world_ref} not found", at("world"))

    expected = data.get("expected_steps")
    solution = _script(data.get("solution"), tid, "solution", at("solution"))
    sab = data.get("sabotage") or {}
    sabotage = _script(sab.get("script"), tid, "sabotage", at("sabotage"))
    if expected is not None and solution and len(solution) != expected:
        raise SchemaError(tid, "expected_steps", f"solution has {len(solution)} steps, not {expected}", at("expected_steps"))

    return TaskSpec(
        id=tid,
        goal=str(data["goal"]).strip(),
        category=category,
        world=world,
        start=str(data["snapshot"]),
        evaluator=evaluator,
        user_info=user_info.strip(),
        mcp_allowlist=frozenset(allow),
        budget=budget,
        apps=tuple(data.get("apps") or ()),
        cap=cap,
        expected_steps=expected,
        solution=solution,
        sabotage=sabotage,
        sabotage_label=str(sab.get("label", "")),
        line=line,
    )


def load_tasks(path: str | Path | None = None, registry: Registry | None = None) -> list[TaskSpec]:
    path = Path(path) if path is not None else default_tasks_path()
    text = path.read_text(encoding="utf-8")
    try:
        data = load_yaml(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise SchemaError(None, "yaml", str(e), mark.line + 1 if mark else None) from None
    if not isinstance(data, Mapping) or not isinstance(data.get("tasks"), list):
        raise SchemaError(None, "tasks", "file must be a mapping with a 'tasks' list", 1)
    tasks_line, index = _line_index(text)
    registry = registry if registry is not None else load_catalog()
    seen: dict[str, int] = {}
    out = []
    for i, raw in enumerate(data["tasks"]):
        line, fields = index[i] if i < len(index) else (tasks_line, {})
        if not isinstance(raw, Mapping):
            raise SchemaError(None, "tasks", f"entry {i + 1} is not a mapping", line)
        task = _task(raw, path.parent, data.get("world"), registry, line, fields)
        if task.id in seen:
            raise SchemaError(task.id, "id", f"duplicate id (first defined at line {seen[task.id]})", line)
        seen[task.id] = line
        out.append(task)
    return out


def select(tasks: Sequence[TaskSpec], expr: str | None) -> list[TaskSpec]:
    """Filter by comma-separated terms: ``category=NAME``, ``id=GLOB`` or a bare id glob.

    A task is kept if it matches any term.
    """
    if not expr:
        return list(tasks)
    terms = [t.strip() for t in expr.split(",") if t.strip()]

    def hit(task: TaskSpec, term: str) -> bool:
        key, sep, value = term.partition("=")
        if not sep:
            return fnmatchcase(task.id, term)
        if key == "category":
            return task.category.value == value
        if key == "id":
            return fnmatchcase(task.id, value)
        if key == "app":
            return value in task.apps
        raise ValueError(f"unknown filter key {key!r}")

    return [t for t in tasks if any(hit(t, term) for term in terms)]
