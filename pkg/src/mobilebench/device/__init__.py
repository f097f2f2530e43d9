from .conditions import matches
from .fixtures import load_world, world_from_mapping
from .render import Screenshot, VisibleElement, render_screenshot, screenshot
from .sim import Outcome, StepOutcome, UnknownStore, apply_action, exec_query, hit_test
from .snapshot import (
    CorruptSnapshot,
    Snapshot,
    capture_snapshot,
    restore_snapshot,
    state_digest,
)
from .state import (
    CALLBACK_STORE,
    AppModel,
    Clock,
    DataStore,
    DeviceState,
    InvariantError,
    Role,
    StoreKind,
    Transition,
    UiElement,
    check_invariants,
)
from .transport import AdbTransport, RemoteTransport, TransportError, with_retries

__all__ = [
    "CALLBACK_STORE",
    "AdbTransport",
    "AppModel",
    "Clock",
    "CorruptSnapshot",
    "DataStore",
    "DeviceState",
    "InvariantError",
    "Outcome",
    "RemoteTransport",
    "Role",
    "Screenshot",
    "Snapshot",
    "StepOutcome",
    "StoreKind",
    "Transition",
    "TransportError",
    "UiElement",
    "UnknownStore",
    "VisibleElement",
    "apply_action",
    "capture_snapshot",
    "check_invariants",
    "exec_query",
    "hit_test",
    "load_world",
    "matches",
    "render_screenshot",
    "restore_snapshot",
    "screenshot",
    "state_digest",
    "with_retries",
    "world_from_mapping",
]
