"""Transition function of the simulated phone."""

from __future__ import annotations

import copy
import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Mapping

from ..actions import CONTROL_KINDS, Action, ActionKind
from .conditions import Predicate, as_callable, matches
from .state import (
    CALLBACK_STORE,
    DataStore,
    DeviceState,
    Role,
    StoreKind,
    Transition,
    UiElement,
    check_invariants,
    resolve_goto,
)


class UnknownStore(KeyError):
    pass


class Outcome(str, Enum):
    OK = "ok"
    NO_EFFECT = "no_effect"
    REJECTED = "rejected"


@dataclass(frozen=True)
class StepOutcome:
    status: Outcome
    reason: str = ""

    def to_json(self) -> dict[str, str]:
        d = {"status": self.status.value}
        if self.reason:
            d["reason"] = self.reason
        return d


OK = StepOutcome(Outcome.OK)

_TEMPLATE = re.compile(r"\$\{([A-Za-z_][A-Za-z0-9_]*)\}")


def _lookup(name: str, values: Mapping[str, Any], state: DeviceState) -> Any:
    if name == "today":
        return state.clock.date
    if name == "weekday":
        return state.clock.weekday
    return values.get(name, "")


def render(value: Any, values: Mapping[str, Any], state: DeviceState) -> Any:
    """Substitute ``${name}`` references; a bare reference keeps the value's type."""
    if isinstance(value, str):
        m = _TEMPLATE.fullmatch(value)
        if m:
            return copy.deepcopy(_lookup(m.group(1), values, state))
        return _TEMPLATE.sub(lambda m: str(_lookup(m.group(1), values, state)), value)
    if isinstance(value, Mapping):
        return {k: render(v, values, state) for k, v in value.items()}
    if isinstance(value, list):
        return [render(v, values, state) for v in value]
    return value


def display_text(el: UiElement, state: DeviceState) -> str:
    vals = state.peek_values()
    if el.role is Role.TEXT_FIELD:
        v = vals.get(el.id, "")
        return str(v) if v else el.text
    return str(render(el.text, vals, state))


def hit_test(state: DeviceState, x: int, y: int) -> UiElement | None:
    """Topmost visible element at (x, y); later elements are drawn on top."""
    hit = None
    for el in state.visible_elements():
        if el.contains(x, y):
            hit = el
    return hit


def _find_rule(state: DeviceState, element: str | None, gesture: str,
               drop_on: str | None = None) -> Transition | None:
    app = state.app
    screen = state.foreground[1]
    vals = state.peek_values()
    for t in app.transitions:
        if t.screen != screen or t.element != element or t.gesture != gesture:
            continue
        if t.drop_on is not None and t.drop_on != drop_on:
            continue
        if t.when is not None and not matches(vals, t.when):
            continue
        return t
    return None


def _store(state: DeviceState, name: str) -> DataStore:
    if name not in state.stores:
        if name != CALLBACK_STORE:
            raise UnknownStore(name)
        state.stores[name] = DataStore(StoreKind.CALLBACK_EVENTS)
    return state.stores[name]


def _apply_effect(state: DeviceState, effect: Mapping[str, Any]) -> None:
    app_id = state.foreground[0]
    vals = state.app_values(app_id)
    (op, arg), = effect.items()
    if op == "set":
        for k, v in arg.items():
            vals[k] = render(v, vals, state)
    elif op == "clear":
        names = list(vals) if arg == "all" else arg
        for k in names:
            vals.pop(k, None)
    elif op == "insert":
        store = _store(state, arg["store"])
        rec = render(dict(arg["record"]), vals, state)
        rec.setdefault("id", store.next_id())
        store.rows.append(rec)
    elif op == "update":
        store = _store(state, arg["store"])
        where = render(arg["where"], vals, state)
        changes = render(arg["set"], vals, state)
        for row in store.rows:
            if matches(row, where):
                row.update(changes)
    elif op == "delete":
        store = _store(state, arg["store"])
        where = render(arg["where"], vals, state)
        store.rows[:] = [r for r in store.rows if not matches(r, where)]
    elif op == "emit":
        store = _store(state, CALLBACK_STORE)
        store.rows.append({
            "id": store.next_id(),
            "event_kind": arg["event"],
            "app": app_id,
            "payload": render(dict(arg.get("payload", {})), vals, state),
        })
    else:
        raise ValueError(f"unknown effect {op!r}")


def _go(state: DeviceState, target: tuple[str, str], push: bool = True) -> None:
    if target == state.foreground:
        return
    if push:
        state.back_stack.append(state.foreground)
    state.foreground = target
    state.focused_field = None


def _fire(state: DeviceState, rule: Transition, push: bool = True) -> StepOutcome:
    for effect in rule.effects:
        _apply_effect(state, effect)
    if rule.goto is not None:
        _go(state, resolve_goto(state.foreground[0], rule.goto), push=push)
    if rule.focus is not None:
        state.focused_field = rule.focus
    return OK


def _tap(state: DeviceState, gesture: str, x: int, y: int) -> StepOutcome:
    el = hit_test(state, x, y)
    if el is None:
        return StepOutcome(Outcome.REJECTED, "no element at point")
    focused = False
    if gesture == "click" and el.role is Role.TEXT_FIELD:
        state.focused_field = el.id
        focused = True
    rule = _find_rule(state, el.id, gesture)
    if rule is not None:
        return _fire(state, rule)
    return OK if focused else StepOutcome(Outcome.NO_EFFECT, f"{gesture} on {el.id} has no effect")


def _max_offset(state: DeviceState) -> int:
    app_id, screen_id = state.foreground
    app = state.apps[app_id]
    if screen_id in app.scrollable:
        return app.scrollable[screen_id]
    his = [el.visible_at_offset[1] for el in app.screens[screen_id] if el.visible_at_offset]
    return max(his, default=0)


def _scroll(state: DeviceState, direction: str) -> StepOutcome:
    if direction in ("left", "right"):
        rule = _find_rule(state, None, f"scroll_{direction}")
        if rule is None:
            return StepOutcome(Outcome.REJECTED, "no horizontal scroll here")
        return _fire(state, rule)
    app_id, screen_id = state.foreground
    off = state.offset()
    new = off + 1 if direction == "down" else off - 1
    if new < 0 or new > _max_offset(state):
        return StepOutcome(Outcome.REJECTED, f"cannot scroll {direction}")
    state.scroll.setdefault(app_id, {})[screen_id] = new
    return OK


def _drag(state: DeviceState, start: tuple[int, int], end: tuple[int, int]) -> StepOutcome:
    src = hit_test(state, *start)
    dst = hit_test(state, *end)
    if src is None:
        return StepOutcome(Outcome.NO_EFFECT, "nothing to drag")
    rule = _find_rule(state, src.id, "drag", dst.id if dst else None)
    if rule is None:
        return StepOutcome(Outcome.NO_EFFECT, f"drag of {src.id} has no effect")
    return _fire(state, rule)


def apply_action(state: DeviceState, a: Action) -> tuple[DeviceState, StepOutcome]:
    """Return the successor state and what happened.

    ``a`` must be a device action with resolved coordinates. Impossible
    gestures are reported as REJECTED outcomes, never raised.
    """
    if a.kind in CONTROL_KINDS:
        raise ValueError(f"{a.kind.value} actions are not dispatched to the device")
    if a.needs_grounding:
        raise ValueError("action target must be resolved to coordinates first")
    w, h = state.screen_dims
    s = state.fork()
    if not a.in_bounds(w, h):
        return s, StepOutcome(Outcome.REJECTED, "point outside screen")

    k = a.kind
    if k in (ActionKind.CLICK, ActionKind.DOUBLE_TAP, ActionKind.LONG_PRESS):
        out = _tap(s, k.value, *a.point)
    elif k is ActionKind.DRAG:
        out = _drag(s, a.point, a.end_point)
    elif k is ActionKind.INPUT_TEXT:
        if s.focused_field is None:
            out = StepOutcome(Outcome.REJECTED, "no focused input")
        else:
            vals = s.app_values()
            vals[s.focused_field] = str(vals.get(s.focused_field, "")) + a.text
            out = OK
    elif k is ActionKind.SCROLL:
        out = _scroll(s, a.direction)
    elif k is ActionKind.NAVIGATE_HOME:
        if s.foreground == s.home:
            out = StepOutcome(Outcome.NO_EFFECT, "already home")
        else:
            _go(s, s.home)
            out = OK
    elif k is ActionKind.NAVIGATE_BACK:
        rule = _find_rule(s, None, "navigate_back")
        if rule is not None:
            out = _fire(s, rule, push=False)
        elif s.back_stack:
            s.foreground = s.back_stack.pop()
            s.focused_field = None
            out = OK
        else:
            out = StepOutcome(Outcome.REJECTED, "nothing to go back to")
    elif k is ActionKind.KEYBOARD_ENTER:
        rule = _find_rule(s, s.focused_field, "keyboard_enter")
        out = _fire(s, rule) if rule is not None else StepOutcome(Outcome.NO_EFFECT, "enter ignored")
    elif k is ActionKind.WAIT:
        out = OK
    else:  # pragma: no cover - exhaustive over device kinds
        raise ValueError(k)

    check_invariants(s, state)
    return s, out


def exec_query(state: DeviceState, store_id: str, predicate: Predicate | None = None) -> list[dict[str, Any]]:
    """Rows of ``store_id`` matching ``predicate`` (copies; state is untouched)."""
    if store_id not in state.stores:
        raise UnknownStore(store_id)
    test = as_callable(predicate) if predicate is not None else (lambda r: True)
    return [copy.deepcopy(r) for r in state.stores[store_id].rows if test(r)]
