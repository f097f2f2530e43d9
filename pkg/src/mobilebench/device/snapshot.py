"""Canonical state serialization, digests and snapshots."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Mapping

from .state import (
    AppModel,
    Clock,
    DataStore,
    DeviceState,
    Role,
    StoreKind,
    Transition,
    UiElement,
)

HEADER = b"MWSNAP1\n"


class CorruptSnapshot(ValueError):
    pass


def _element_to_dict(el: UiElement) -> dict[str, Any]:
    d: dict[str, Any] = {"id": el.id, "bbox": list(el.bbox), "text": el.text, "role": el.role.value}
    if el.visible_at_offset is not None:
        d["visible_at_offset"] = list(el.visible_at_offset)
    if el.when is not None:
        d["when"] = el.when
    return d


def _transition_to_dict(t: Transition) -> dict[str, Any]:
    d: dict[str, Any] = {"on": [t.screen, t.element, t.gesture]}
    for name in ("when", "drop_on", "goto", "focus"):
        v = getattr(t, name)
        if v is not None:
            d[name] = v
    if t.effects:
        d["effects"] = list(t.effects)
    return d


def state_to_dict(state: DeviceState) -> dict[str, Any]:
    return {
        "apps": {
            app_id: {
                "entry": app.entry,
                "scrollable": dict(app.scrollable),
                "screens": {sid: [_element_to_dict(e) for e in els] for sid, els in app.screens.items()},
                "transitions": [_transition_to_dict(t) for t in app.transitions],
            }
            for app_id, app in state.apps.items()
        },
        "back_stack": [list(x) for x in state.back_stack],
        "clipboard": state.clipboard,
        "clock": {"date": state.clock.date, "weekday": state.clock.weekday},
        "focused_field": state.focused_field,
        "foreground": list(state.foreground),
        "home": list(state.home),
        "screen_dims": list(state.screen_dims),
        "scroll": state.scroll,
        "stores": {k: {"kind": v.kind.value, "rows": v.rows} for k, v in state.stores.items()},
        "values": state.values,
    }


def _element_from_dict(d: Mapping[str, Any]) -> UiElement:
    vis = d.get("visible_at_offset")
    return UiElement(
        id=str(d["id"]),
        bbox=tuple(int(v) for v in d["bbox"]),
        text=str(d.get("text", "")),
        role=Role(d.get("role", "label")),
        visible_at_offset=tuple(int(v) for v in vis) if vis is not None else None,
        when=d.get("when"),
    )


def _transition_from_dict(d: Mapping[str, Any]) -> Transition:
    screen, element, gesture = d["on"]
    return Transition(
        screen=screen,
        element=element,
        gesture=gesture,
        when=d.get("when"),
        drop_on=d.get("drop_on"),
        effects=tuple(d.get("effects", ())),
        goto=d.get("goto"),
        focus=d.get("focus"),
    )


def app_from_dict(app_id: str, d: Mapping[str, Any]) -> AppModel:
    screens = {sid: tuple(_element_from_dict(e) for e in (els or [])) for sid, els in d["screens"].items()}
    return AppModel(
        id=app_id,
        entry=d.get("entry") or next(iter(screens)),
        screens=screens,
        transitions=tuple(_transition_from_dict(t) for t in d.get("transitions", [])),
        scrollable={k: int(v) for k, v in (d.get("scrollable") or {}).items()},
    )


def state_from_dict(d: Mapping[str, Any]) -> DeviceState:
    clock = d.get("clock") or {}
    return DeviceState(
        apps={k: app_from_dict(k, v) for k, v in d["apps"].items()},
        foreground=tuple(d["foreground"]),
        screen_dims=tuple(d.get("screen_dims", (1080, 2400))),
        clock=Clock(str(clock.get("date", "2025-10-16")), str(clock.get("weekday", "Thursday"))),
        stores={
            k: DataStore(StoreKind(v["kind"]), [dict(r) for r in v.get("rows", [])])
            for k, v in (d.get("stores") or {}).items()
        },
        focused_field=d.get("focused_field"),
        clipboard=d.get("clipboard", ""),
        values={k: dict(v) for k, v in (d.get("values") or {}).items()},
        scroll={k: dict(v) for k, v in (d.get("scroll") or {}).items()},
        back_stack=[tuple(x) for x in d.get("back_stack", [])],
        home=tuple(d.get("home", ("launcher", "home"))),
    )


def canonical_bytes(state: DeviceState) -> bytes:
    body = json.dumps(state_to_dict(state), sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return HEADER + body.encode("utf-8")


def state_digest(state: DeviceState) -> str:
    return hashlib.sha256(canonical_bytes(state)).hexdigest()


@dataclass(frozen=True)
class Snapshot:
    id: str
    digest: str
    payload: bytes = field(repr=False)
    created_at: str = ""


def capture_snapshot(state: DeviceState, snapshot_id: str | None = None) -> Snapshot:
    payload = canonical_bytes(state)
    digest = hashlib.sha256(payload).hexdigest()
    return Snapshot(
        id=snapshot_id or digest[:16],
        digest=digest,
        payload=payload,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
    )


def restore_snapshot(snap: Snapshot) -> DeviceState:
    payload = snap.payload
    if not payload.startswith(HEADER):
        raise CorruptSnapshot("missing MWSNAP1 header")
    if hashlib.sha256(payload).hexdigest() != snap.digest:
        raise CorruptSnapshot("payload does not match digest")
    try:
        data = json.loads(payload[len(HEADER):].decode("utf-8"))
        state = state_from_dict(data)
    except (ValueError, KeyError, TypeError) as e:
        raise CorruptSnapshot(str(e)) from e
    if state_digest(state) != snap.digest:
        raise CorruptSnapshot("restored state does not reproduce the digest")
    return state


def write_snapshot(snap: Snapshot, path) -> None:
    with open(path, "wb") as f:
        f.write(snap.payload)


def read_snapshot(path, snapshot_id: str | None = None) -> Snapshot:
    with open(path, "rb") as f:
        payload = f.read()
    digest = hashlib.sha256(payload).hexdigest()
    return Snapshot(id=snapshot_id or digest[:16], digest=digest, payload=payload)
