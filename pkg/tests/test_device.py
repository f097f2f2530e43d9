import io
from dataclasses import replace

import pytest
from PIL import Image

from mobilebench.actions import ActionKind, bare, click, drag, input_text, scroll
from mobilebench.device import (
    CorruptSnapshot,
    InvariantError,
    Outcome,
    apply_action,
    capture_snapshot,
    exec_query,
    hit_test,
    restore_snapshot,
    screenshot,
    state_digest,
    world_from_mapping,
)


def center(state, element_id):
    x, y, w, h = state.element(element_id).bbox
    return x + w // 2, y + h // 2


def tap(state, element_id):
    s, out = apply_action(state, click(center(state, element_id)))
    assert out.status is not Outcome.REJECTED, out
    return s


def test_loads_at_launcher(phone):
    assert phone.foreground == ("launcher", "home")
    assert phone.screen_dims == (1080, 2400)
    assert {e.id for e in phone.visible_elements()} >= {"app_mail", "app_clock"}


def test_apply_action_does_not_mutate_input(phone):
    before = state_digest(phone)
    after, _ = apply_action(phone, click(center(phone, "app_mail")))
    assert state_digest(phone) == before
    assert after.foreground == ("mail", "inbox")


def test_send_mail_inserts_row_and_emits_callback(phone):
    s = tap(tap(phone, "app_mail"), "compose")
    assert s.focused_field == "to"
    s, _ = apply_action(s, input_text("alice@example.com"))
    s = tap(s, "subject")
    s, _ = apply_action(s, input_text("Hi"))
    assert center(s, "send") == (980, 2310)
    s = tap(s, "send")
    sent = exec_query(s, "emails", {"folder": "sent"})
    assert [(r["to"], r["subject"]) for r in sent] == [("alice@example.com", "Hi")]
    events = exec_query(s, "callbacks", {"event_kind": "email_sent"})
    assert events[-1]["payload"]["to"] == "alice@example.com"


def test_send_requires_recipient(phone):
    s = tap(tap(phone, "app_mail"), "compose")
    s2, out = apply_action(s, click(center(s, "send")))
    assert out.status is Outcome.NO_EFFECT
    assert s2.foreground == ("mail", "compose")


def test_alarm_record_matches_chosen_fields(phone):
    s = tap(tap(phone, "app_clock"), "add")
    s = tap(s, "time")
    s, _ = apply_action(s, input_text("6:30"))
    for el in ("days_weekend", "ring_radar", "vibration"):
        s = tap(s, el)
    before = len(exec_query(s, "alarms"))
    s = tap(s, "save")
    rows = exec_query(s, "alarms")
    assert len(rows) == before + 1
    new = rows[-1]
    assert (new["time"], new["days"], new["ringtone"], new["vibration"]) == ("6:30", "weekend", "Radar", False)


def test_drag_onto_archive_moves_file(phone):
    s = tap(phone, "app_files")
    s, out = apply_action(s, drag(center(s, "f_report"), center(s, "archive")))
    assert out.status is Outcome.OK
    assert exec_query(s, "files", {"name": "report.pdf"})[0]["folder"] == "Archive"
    assert s.element("f_report") not in s.visible_elements()


def test_drag_onto_nothing_has_no_effect(phone):
    s = tap(phone, "app_files")
    s2, out = apply_action(s, drag(center(s, "f_report"), (100, 2000)))
    assert out.status is Outcome.NO_EFFECT
    assert state_digest(s2) == state_digest(s)


def test_rejections(phone):
    _, out = apply_action(phone, click((5000, 10)))
    assert out.status is Outcome.REJECTED
    _, out = apply_action(phone, click((1, 2390)))
    assert out.status is Outcome.REJECTED
    _, out = apply_action(phone, input_text("x"))
    assert out.reason == "no focused input"
    _, out = apply_action(phone, bare(ActionKind.NAVIGATE_BACK))
    assert out.status is Outcome.REJECTED
    _, out = apply_action(phone, scroll("up"))
    assert out.status is Outcome.REJECTED


def test_control_and_ungrounded_actions_are_refused(phone):
    with pytest.raises(ValueError):
        apply_action(phone, bare(ActionKind.WAIT).__class__(ActionKind.ANSWER, text="x"))
    with pytest.raises(ValueError):
        apply_action(phone, click("Mail"))


def test_back_and_home(phone):
    s = tap(tap(phone, "app_mail"), "compose")
    s, _ = apply_action(s, bare(ActionKind.NAVIGATE_BACK))
    assert s.foreground == ("mail", "inbox")
    s, _ = apply_action(s, bare(ActionKind.NAVIGATE_HOME))
    assert s.foreground == ("launcher", "home")
    _, out = apply_action(s, bare(ActionKind.NAVIGATE_HOME))
    assert out.status is Outcome.NO_EFFECT


def test_exec_query_returns_copies(phone):
    rows = exec_query(phone, "alarms")
    rows[0]["time"] = "0:00"
    assert exec_query(phone, "alarms")[0]["time"] != "0:00"


def test_hit_test(phone):
    assert hit_test(phone, *center(phone, "app_maps")).id == "app_maps"
    assert hit_test(phone, 5, 2000) is None


def test_snapshot_round_trip(phone):
    s = tap(phone, "app_clock")
    snap = capture_snapshot(s, "clock")
    assert snap.payload.startswith(b"MWSNAP1\n")
    assert snap.id == "clock"
    assert state_digest(restore_snapshot(snap)) == snap.digest == state_digest(s)


def test_snapshot_tamper_is_detected(phone):
    snap = capture_snapshot(phone)
    with pytest.raises(CorruptSnapshot):
        restore_snapshot(replace(snap, payload=snap.payload.replace(b"Inbox", b"Outbx")))
    with pytest.raises(CorruptSnapshot):
        restore_snapshot(replace(snap, payload=snap.payload[8:]))


def test_screenshot_is_deterministic(phone):
    a, b = screenshot(phone), screenshot(restore_snapshot(capture_snapshot(phone)))
    assert a.png == b.png and a.digest == b.digest
    img = Image.open(io.BytesIO(a.png))
    assert img.size == (1080, 2400)
    assert screenshot(tap(phone, "app_mail")).digest != a.digest


def test_screenshot_lists_visible_elements(phone):
    shot = screenshot(tap(phone, "app_mail"))
    assert ("compose", "Compose") in {(e.id, e.label) for e in shot.elements}


def _tiny(**over):
    data = {
        "screen": [100, 100],
        "apps": {"a": {"screens": {"s": [{"id": "b", "text": "B", "role": "button", "bbox": [0, 0, 10, 10]}]}}},
        "start": "a/s",
        "home": ["a", "s"],
    }
    data["apps"]["a"]["screens"]["s"].extend(over.get("extra", []))
    return data


def test_duplicate_element_ids_are_rejected():
    with pytest.raises(InvariantError):
        world_from_mapping(_tiny(extra=[{"id": "b", "text": "again", "bbox": [0, 20, 10, 10]}]))


def test_offscreen_bbox_is_rejected():
    with pytest.raises(InvariantError):
        world_from_mapping(_tiny(extra=[{"id": "c", "text": "far", "bbox": [95, 95, 10, 10]}]))
