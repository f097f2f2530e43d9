"""Simulated device state.

Static app structure (screens, elements, transition rules) is immutable and
shared between states; everything an action can change lives in the mutable
fields of :class:`DeviceState` and is copied by :meth:`DeviceState.fork`.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping


class Role(str, Enum):
    BUTTON = "button"
    TEXT_FIELD = "text_field"
    LIST_ITEM = "list_item"
    LABEL = "label"


class StoreKind(str, Enum):
    CONTACTS = "contacts"
    EMAILS = "emails"
    CALENDAR_EVENTS = "calendar_events"
    SMS = "sms"
    FILES = "files"
    POSTS = "posts"
    CHAT_MESSAGES = "chat_messages"
    CART_ITEMS = "cart_items"
    ALARMS = "alarms"
    CALLBACK_EVENTS = "callback_events"


CALLBACK_STORE = "callbacks"


class InvariantError(AssertionError):
    pass


@dataclass(frozen=True)
class Clock:
    date: str = "2025-10-16"
    weekday: str = "Thursday"

    def __str__(self) -> str:
        return f"{self.date}, {self.weekday}"


@dataclass(frozen=True)
class UiElement:
    id: str
    bbox: tuple[int, int, int, int]  # x, y, w, h
    text: str = ""
    role: Role = Role.LABEL
    # Inclusive scroll-offset range in which the element is on screen;
    # None means always visible.
    visible_at_offset: tuple[int, int] | None = None
    # Value conditions (see conditions.matches) that must hold for display.
    when: Mapping[str, Any] | None = None

    def contains(self, x: int, y: int) -> bool:
        bx, by, bw, bh = self.bbox
        return bx <= x < bx + bw and by <= y < by + bh

    @property
    def center(self) -> tuple[int, int]:
        bx, by, bw, bh = self.bbox
        return bx + bw // 2, by + bh // 2


@dataclass(frozen=True)
class Transition:
    """Fires on (screen, element, gesture) when its value condition holds.

    ``element`` is None for screen-level gestures (navigate_back,
    keyboard_enter, horizontal scroll). ``drop_on`` restricts drags to a
    specific end element. ``goto`` is ``screen`` or ``app/screen``.
    """

    screen: str
    element: str | None
    gesture: str
    when: Mapping[str, Any] | None = None
    drop_on: str | None = None
    effects: tuple[Mapping[str, Any], ...] = ()
    goto: str | None = None
    focus: str | None = None


@dataclass(frozen=True)
class AppModel:
    id: str
    entry: str
    screens: Mapping[str, tuple[UiElement, ...]]
    transitions: tuple[Transition, ...] = ()
    scrollable: Mapping[str, int] = field(default_factory=dict)  # screen -> max offset


@dataclass
class DataStore:
    kind: StoreKind
    rows: list[dict[str, Any]] = field(default_factory=list)

    def next_id(self) -> int:
        ids = [r["id"] for r in self.rows if isinstance(r.get("id"), int)]
        return max(ids, default=0) + 1


@dataclass
class DeviceState:
    apps: Mapping[str, AppModel]
    foreground: tuple[str, str]
    screen_dims: tuple[int, int] = (1080, 2400)
    clock: Clock = field(default_factory=Clock)
    stores: dict[str, DataStore] = field(default_factory=dict)
    focused_field: str | None = None
    clipboard: str = ""
    # app_id -> {name: value}; text-field contents and app flags.
    values: dict[str, dict[str, Any]] = field(default_factory=dict)
    # app_id -> {screen_id: offset}
    scroll: dict[str, dict[str, int]] = field(default_factory=dict)
    back_stack: list[tuple[str, str]] = field(default_factory=list)
    home: tuple[str, str] = ("launcher", "home")

    def fork(self) -> DeviceState:
        """Copy of the mutable parts; app models are shared."""
        return DeviceState(
            apps=self.apps,
            foreground=self.foreground,
            screen_dims=self.screen_dims,
            clock=self.clock,
            stores={k: DataStore(v.kind, copy.deepcopy(v.rows)) for k, v in self.stores.items()},
            focused_field=self.focused_field,
            clipboard=self.clipboard,
            values=copy.deepcopy(self.values),
            scroll=copy.deepcopy(self.scroll),
            back_stack=list(self.back_stack),
            home=self.home,
        )

    @property
    def app(self) -> AppModel:
        return self.apps[self.foreground[0]]

    def app_values(self, app_id: str | None = None) -> dict[str, Any]:
        """Mutable value map for ``app_id``, created on first write."""
        return self.values.setdefault(app_id or self.foreground[0], {})

    def peek_values(self, app_id: str | None = None) -> Mapping[str, Any]:
        """Read-only view that never adds an entry (keeps digests stable)."""
        return self.values.get(app_id or self.foreground[0], {})

    def offset(self, app_id: str | None = None, screen_id: str | None = None) -> int:
        app_id = app_id or self.foreground[0]
        screen_id = screen_id or self.foreground[1]
        return self.scroll.get(app_id, {}).get(screen_id, 0)

    def elements(self) -> tuple[UiElement, ...]:
        app_id, screen_id = self.foreground
        return self.apps[app_id].screens[screen_id]

    def visible_elements(self) -> list[UiElement]:
        from .conditions import matches

        off = self.offset()
        vals = self.peek_values()
        out = []
        for el in self.elements():
            if el.visible_at_offset is not None:
                lo, hi = el.visible_at_offset
                if not lo <= off <= hi:
                    continue
            if el.when is not None and not matches(vals, el.when):
                continue
            out.append(el)
        return out

    def element(self, element_id: str) -> UiElement | None:
        for el in self.elements():
            if el.id == element_id:
                return el
        return None


def check_static(apps: Mapping[str, AppModel], dims: tuple[int, int]) -> None:
    """Validate app models once at load time."""
    w, h = dims
    for app in apps.values():
        if app.entry not in app.screens:
            raise InvariantError(f"{app.id}: entry screen {app.entry!r} missing")
        for sid, elements in app.screens.items():
            seen = set()
            for el in elements:
                if el.id in seen:
                    raise InvariantError(f"{app.id}/{sid}: duplicate element id {el.id!r}")
                seen.add(el.id)
                x, y, bw, bh = el.bbox
                if x < 0 or y < 0 or bw <= 0 or bh <= 0 or x + bw > w or y + bh > h:
                    raise InvariantError(f"{app.id}/{sid}/{el.id}: bbox outside screen")
        for t in app.transitions:
            if t.screen not in app.screens:
                raise InvariantError(f"{app.id}: transition from unknown screen {t.screen!r}")
            ids = {el.id for el in app.screens[t.screen]}
            for ref in (t.element, t.drop_on):
                if ref is not None and ref not in ids:
                    raise InvariantError(f"{app.id}/{t.screen}: unknown element {ref!r}")
            if t.goto is not None:
                ta, ts = resolve_goto(app.id, t.goto)
                if ta not in apps or ts not in apps[ta].screens:
                    raise InvariantError(f"{app.id}: transition to unknown screen {t.goto!r}")
                if t.focus is not None:
                    target = {el.id: el for el in apps[ta].screens[ts]}.get(t.focus)
                    if target is None or target.role is not Role.TEXT_FIELD:
                        raise InvariantError(f"{app.id}: focus target {t.focus!r} is not a text field")


def resolve_goto(app_id: str, goto: str) -> tuple[str, str]:
    if "/" in goto:
        a, s = goto.split("/", 1)
        return a, s
    return app_id, goto


def check_invariants(state: DeviceState, previous: DeviceState | None = None) -> None:
    """Raise InvariantError if ``state`` is not a valid device state."""
    app_id, screen_id = state.foreground
    if app_id not in state.apps or screen_id not in state.apps[app_id].screens:
        raise InvariantError(f"foreground {app_id}/{screen_id} does not exist")
    if state.focused_field is not None:
        el = state.element(state.focused_field)
        if el is None or el.role is not Role.TEXT_FIELD:
            raise InvariantError(f"focused field {state.focused_field!r} is not an input on screen")
    for sid, store in state.stores.items():
        keys = [r.get("id") for r in store.rows]
        if any(k is None for k in keys) or len(set(map(repr, keys))) != len(keys):
            raise InvariantError(f"store {sid!r} rows lack unique primary keys")
    if previous is not None:
        if state.clock != previous.clock:
            raise InvariantError("clock changed within an episode")
        old = previous.stores.get(CALLBACK_STORE)
        new = state.stores.get(CALLBACK_STORE)
        if old is not None and (new is None or new.rows[: len(old.rows)] != old.rows):
            raise InvariantError("callback events are append-only")
