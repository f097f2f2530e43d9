"""Load simulated worlds (apps + preloaded stores) from YAML fixture files."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Any, Mapping

import yaml

from .snapshot import state_from_dict
from .state import CALLBACK_STORE, DataStore, DeviceState, InvariantError, StoreKind, check_invariants, check_static


class _PlainLoader(yaml.SafeLoader):
    """SafeLoader that keeps dates and times as strings."""


# Dates stay strings; only true/false are booleans (so keys like ``on`` stay text).
_PlainLoader.yaml_implicit_resolvers = {
    ch: [(tag, rx) for tag, rx in resolvers
         if tag not in ("tag:yaml.org,2002:timestamp", "tag:yaml.org,2002:bool")]
    for ch, resolvers in yaml.SafeLoader.yaml_implicit_resolvers.items()
}
_PlainLoader.add_implicit_resolver(
    "tag:yaml.org,2002:bool",
    re.compile(r"^(?:true|True|TRUE|false|False|FALSE)$"),
    list("tTfF"),
)


def load_yaml(text: str) -> Any:
    return yaml.load(text, Loader=_PlainLoader)


def compose_yaml(text: str) -> yaml.Node | None:
    return yaml.compose(text, Loader=_PlainLoader)


_STORE_EFFECTS = ("insert", "update", "delete")


def world_from_mapping(data: Mapping[str, Any], start: str | None = None) -> DeviceState:
    d = dict(data)
    if "screen" in d:
        d["screen_dims"] = d.pop("screen")
    fixture_start = d.pop("start", None)
    d["foreground"] = (start or fixture_start or "launcher/home").split("/", 1)
    state = state_from_dict(d)
    state.stores.setdefault(CALLBACK_STORE, DataStore(StoreKind.CALLBACK_EVENTS))

    check_static(state.apps, state.screen_dims)
    for app in state.apps.values():
        for t in app.transitions:
            for eff in t.effects:
                if len(eff) != 1:
                    raise InvariantError(f"{app.id}: effect must have exactly one operation: {eff}")
                (op, arg), = eff.items()
                if op in _STORE_EFFECTS and arg["store"] not in state.stores:
                    raise InvariantError(f"{app.id}: effect targets unknown store {arg['store']!r}")
    for store_id, store in state.stores.items():
        for i, row in enumerate(store.rows):
            row.setdefault("id", i + 1)
    check_invariants(state)
    return state


def load_world(path: str | Path, start: str | None = None) -> DeviceState:
    """Build the initial device state described by a world fixture.

    ``start`` (``app/screen``) overrides the fixture's foreground screen, which
    lets tasks begin inside an app without duplicating the world.
    """
    data = load_yaml(Path(path).read_text(encoding="utf-8"))
    return world_from_mapping(data, start)
