"""Deterministic task verifiers producing the binary task score."""

from __future__ import annotations

import json
import re
import sqlite3
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping, Protocol, Sequence

from .device.conditions import matches, validate as validate_predicate
from .device.sim import UnknownStore, exec_query
from .device.state import CALLBACK_STORE, DeviceState
from .device.transport import RemoteTransport, TransportError


class Mode(str, Enum):
    TEXT_MATCH = "text_match"
    DB_VERIFY = "db_verify"
    STORAGE_INSPECT = "storage_inspect"
    APP_CALLBACK = "app_callback"


class ConfigError(ValueError):
    pass


class DbUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class EvaluatorConfig:
    mode: Mode
    payload: Mapping[str, Any]

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> EvaluatorConfig:
        data = dict(data)
        try:
            mode = Mode(data.pop("mode"))
        except (KeyError, ValueError) as e:
            raise ConfigError(f"evaluator mode missing or unknown: {e}") from None
        cfg = cls(mode, data)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        p = self.payload
        if self.mode is Mode.TEXT_MATCH:
            if "expected" not in p:
                raise ConfigError("text_match needs 'expected'")
            matcher = p.get("matcher", "exact")
            if matcher not in ("exact", "regex"):
                raise ConfigError(f"unknown matcher {matcher!r}")
            if matcher == "regex":
                try:
                    re.compile(str(p["expected"]))
                except re.error as e:
                    raise ConfigError(f"regex does not compile: {e}") from None
        elif self.mode is Mode.DB_VERIFY:
            if "query" not in p:
                raise ConfigError("db_verify needs 'query'")
            check_placeholders(p["query"], p.get("params", []))
            expect = p.get("expect", "row_exists")
            if expect != "row_exists" and not (isinstance(expect, Mapping) and "scalar_equals" in expect):
                raise ConfigError("db_verify expect must be 'row_exists' or {scalar_equals: value}")
        elif self.mode is Mode.STORAGE_INSPECT:
            if "store" in p:
                validate_predicate(p.get("where", {}))
                if p.get("expect", "present") not in ("present", "absent"):
                    raise ConfigError("storage_inspect expect must be 'present' or 'absent'")
            elif "command" in p:
                if "expected" not in p:
                    raise ConfigError("storage_inspect command needs 'expected'")
                re.compile(str(p["expected"]))
            else:
                raise ConfigError("storage_inspect needs 'store' or 'command'")
        elif self.mode is Mode.APP_CALLBACK:
            if "event" not in p:
                raise ConfigError("app_callback needs 'event'")
            validate_predicate(p.get("where", {}))

    def to_json(self) -> dict[str, Any]:
        return {"mode": self.mode.value, **self.payload}


@dataclass(frozen=True)
class Verdict:
    score: int
    mode: Mode
    evidence: str
    duration: float = field(default=0.0, compare=False)
    infra_error: bool = False

    def to_json(self, with_duration: bool = False) -> dict[str, Any]:
        d: dict[str, Any] = {"score": self.score, "mode": self.mode.value, "evidence": self.evidence}
        if self.infra_error:
            d["infra_error"] = True
        if with_duration:
            d["duration_s"] = round(self.duration, 6)
        return d


def _dump(v: Any) -> str:
    return json.dumps(v, sort_keys=True, ensure_ascii=False)


# --- text ---------------------------------------------------------------

def normalize(text: str, trim: bool = True, collapse: bool = True, casefold: bool = False) -> str:
    if collapse:
        text = re.sub(r"\s+", " ", text)
    if trim:
        text = text.strip()
    if casefold:
        text = text.casefold()
    return text


def eval_text(cfg: EvaluatorConfig, agent_answer: str | None) -> Verdict:
    p = cfg.payload
    if agent_answer is None:
        return Verdict(0, cfg.mode, "no answer was given")
    flags = p.get("normalize", {}) or {}
    norm = dict(trim=flags.get("trim", True), collapse=flags.get("collapse", True),
                casefold=flags.get("casefold", False))
    got = normalize(agent_answer, **norm)
    expected = str(p["expected"])
    if p.get("matcher", "exact") == "regex":
        pattern = re.compile(expected, re.IGNORECASE if norm["casefold"] else 0)
        anchored = p.get("anchor", True)
        ok = (pattern.fullmatch(got) if anchored else pattern.search(got)) is not None
        what = f"regex {expected!r}"
    else:
        ok = got == normalize(expected, **norm)
        what = f"expected {expected!r}"
    return Verdict(int(ok), cfg.mode, f"answer {got!r} {'matches' if ok else 'does not match'} {what}")


# --- database -----------------------------------------------------------

class QueryInterface(Protocol):
    def connect(self) -> None: ...

    def query(self, sql: str, params: Sequence[Any]) -> list[tuple]: ...

    def close(self) -> None: ...


_LITERAL = re.compile(r"'(?:[^']|'')*'|\"(?:[^\"]|\"\")*\"")


def check_placeholders(sql: str, params: Sequence[Any]) -> None:
    bare = _LITERAL.sub("", sql)
    if re.search(r"[:@$][A-Za-z_]|\?\d", bare):
        raise ConfigError("query templates may only use positional '?' placeholders")
    if bare.count("?") != len(params):
        raise ConfigError(f"query has {bare.count('?')} placeholders but {len(params)} params")


def _sql_value(v: Any) -> Any:
    if isinstance(v, (dict, list)):
        return _dump(v)
    if isinstance(v, bool):
        return int(v)
    return v


def _declared_columns(state: DeviceState) -> dict[str, set[str]]:
    """Fields that app effects write per store, so empty tables keep their schema."""
    out: dict[str, set[str]] = {}
    for app in state.apps.values():
        for t in app.transitions:
            for eff in t.effects:
                for op, arg in eff.items():
                    if op == "insert":
                        out.setdefault(arg["store"], set()).update(arg["record"])
                    elif op in ("update", "delete"):
                        cols = out.setdefault(arg["store"], set())
                        cols.update(arg.get("where", {}))
                        cols.update(arg.get("set", {}))
    out.setdefault(CALLBACK_STORE, set()).update({"event_kind", "app", "payload"})
    return out


class SimDatabase:
    """SQL view of the simulator's data stores: one in-memory table per store."""

    def __init__(self, state: DeviceState):
        self._state = state
        self._conn: sqlite3.Connection | None = None

    def connect(self) -> None:
        conn = sqlite3.connect(":memory:")
        declared = _declared_columns(self._state)
        for name, store in sorted(self._state.stores.items()):
            cols = sorted({k for row in store.rows for k in row} | declared.get(name, set()) | {"id"})
            ident = lambda c: '"' + c.replace('"', '""') + '"'
            conn.execute(f"CREATE TABLE {ident(name)} ({', '.join(ident(c) for c in cols)})")
            conn.executemany(
                f"INSERT INTO {ident(name)} VALUES ({', '.join('?' for _ in cols)})",
                [tuple(_sql_value(row.get(c)) for c in cols) for row in store.rows],
            )
        conn.commit()
        conn.execute("PRAGMA query_only = ON")
        self._conn = conn

    def query(self, sql: str, params: Sequence[Any]) -> list[tuple]:
        if self._conn is None:
            raise DbUnavailable("not connected")
        try:
            return self._conn.execute(sql, list(params)).fetchall()
        except sqlite3.Error as e:
            raise DbUnavailable(str(e)) from e

    def close(self) -> None:
        if self._conn is not None:
            self._conn.close()
            self._conn = None


class SqliteDatabase:
    """Read-only connection to an on-disk SQLite backend."""

    def __init__(self, path: str):
        self.path = path
        self._conn: sqlite3.Connection | None = None

    def connect(self) -> None:
        try:
            self._conn = sqlite3.connect(f"file:{self.path}?mode=ro", uri=True)
        except sqlite3.Error as e:
            raise DbUnavailable(str(e)) from e

    def query(self, sql: str, params: Sequence[Any]) -> list[tuple]:
        if self._conn is None:
            raise DbUnavailable("not connected")
        try:
            return self._conn.execute(sql, list(params)).fetchall()
        except sqlite3.Error as e:
            raise DbUnavailable(str(e)) from e

    def close(self) -> None:
        if self._conn is not None:
            self._conn.close()
            self._conn = None


def eval_db(cfg: EvaluatorConfig, db: QueryInterface) -> Verdict:
    p = cfg.payload
    params = [_sql_value(v) for v in p.get("params", [])]
    try:
        db.connect()
        try:
            rows = db.query(p["query"], params)
        finally:
            db.close()
    except DbUnavailable as e:
        return Verdict(0, cfg.mode, f"db unavailable: {e}", infra_error=True)

    expect = p.get("expect", "row_exists")
    if expect == "row_exists":
        baseline = int(p.get("baseline_rows", 0))
        ok = len(rows) > baseline
        return Verdict(int(ok), cfg.mode, f"query returned {len(rows)} row(s); need more than {baseline}")
    want = expect["scalar_equals"]
    got = rows[0][0] if rows and rows[0] else None
    ok = got is not None and normalize(str(got)) == normalize(str(want))
    return Verdict(int(ok), cfg.mode, f"scalar {_dump(got)} vs expected {_dump(want)}")


# --- local storage -------------------------------------------------------

def eval_storage(cfg: EvaluatorConfig, device: DeviceState | RemoteTransport) -> Verdict:
    p = cfg.payload
    if "command" in p:
        try:
            code, out = device.exec(p["command"])
        except TransportError as e:
            return Verdict(0, cfg.mode, f"transport error: {e}", infra_error=True)
        text = out.decode("utf-8", "replace")
        ok = code == 0 and re.search(str(p["expected"]), text) is not None
        return Verdict(int(ok), cfg.mode, f"exit {code}; stdout {'matches' if ok else 'does not match'} {p['expected']!r}")

    where = p.get("where", {})
    try:
        rows = exec_query(device, p["store"], where)
    except UnknownStore as e:
        return Verdict(0, cfg.mode, f"unknown store {e}", infra_error=True)
    present = p.get("expect", "present") == "present"
    ok = bool(rows) if present else not rows
    ids = [r.get("id") for r in rows]
    return Verdict(int(ok), cfg.mode, f"{p['store']} where {_dump(where)}: {len(rows)} match(es) {_dump(ids)}; expected {'present' if present else 'absent'}")


# --- app callbacks -------------------------------------------------------

def eval_callback(cfg: EvaluatorConfig, device: DeviceState) -> Verdict:
    p = cfg.payload
    kind = p["event"]
    where = p.get("where", {})
    events = device.stores[CALLBACK_STORE].rows if CALLBACK_STORE in device.stores else []
    seen = 0
    for ev in events:
        if ev.get("event_kind") != kind:
            continue
        seen += 1
        if matches(ev.get("payload", {}), where):
            return Verdict(1, cfg.mode, f"event #{ev['id']} {kind} {_dump(ev.get('payload', {}))} matches {_dump(where)}")
    return Verdict(0, cfg.mode, f"no {kind} event matches {_dump(where)} ({seen} {kind} event(s) of {len(events)} scanned)")


def evaluate(cfg: EvaluatorConfig, state: DeviceState, answer: str | None = None, *,
             db: QueryInterface | None = None, transport: RemoteTransport | None = None) -> Verdict:
    """Run the one evaluator ``cfg`` names; never raises for infrastructure trouble."""
    t0 = time.perf_counter()
    if cfg.mode is Mode.TEXT_MATCH:
        v = eval_text(cfg, answer)
    elif cfg.mode is Mode.DB_VERIFY:
        v = eval_db(cfg, db if db is not None else SimDatabase(state))
    elif cfg.mode is Mode.STORAGE_INSPECT:
        target = transport if ("command" in cfg.payload and transport is not None) else state
        if "command" in cfg.payload and transport is None:
            v = Verdict(0, cfg.mode, "no device transport for shell inspection", infra_error=True)
        else:
            v = eval_storage(cfg, target)
    else:
        v = eval_callback(cfg, state)
    return Verdict(v.score, v.mode, v.evidence, time.perf_counter() - t0, v.infra_error)
