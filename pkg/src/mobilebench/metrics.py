"""Success rate, step/query/tool-call averages and user-interaction quality."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence


class Category(str, Enum):
    GUI_ONLY = "gui_only"
    INTERACTION = "interaction"
    MCP = "mcp"


class EmptySet(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeRecord:
    task_id: str
    category: Category
    s: int
    t: int
    c: int = 0
    m: int = 0
    infra_error: bool = False
    termination: str = ""

    def __post_init__(self) -> None:
        if self.s not in (0, 1):
            raise ValueError(f"s must be 0 or 1, got {self.s}")
        if min(self.t, self.c, self.m) < 0 or self.c > self.t or self.m > self.t:
            raise ValueError(f"need 0 <= c, m <= t (t={self.t}, c={self.c}, m={self.m})")

    def to_json(self) -> dict[str, Any]:
        d = {"task_id": self.task_id, "category": self.category.value,
             "s": self.s, "t": self.t, "c": self.c, "m": self.m}
        if self.infra_error:
            d["infra_error"] = True
        if self.termination:
            d["termination"] = self.termination
        return d

    @classmethod
    def from_json(cls, d: Mapping[str, Any]) -> EpisodeRecord:
        return cls(d["task_id"], Category(d["category"]), int(d["s"]), int(d["t"]),
                   int(d.get("c", 0)), int(d.get("m", 0)), bool(d.get("infra_error", False)),
                   str(d.get("termination", "")))


def _nonempty(records: Sequence[EpisodeRecord], what: str) -> Sequence[EpisodeRecord]:
    if not records:
        raise EmptySet(what)
    return records


def _of(records: Iterable[EpisodeRecord], category: Category) -> list[EpisodeRecord]:
    return [r for r in records if r.category is category]


def _mean(xs: Sequence[int]) -> float:
    return math.fsum(xs) / len(xs)


def success_rate(records: Sequence[EpisodeRecord]) -> float:
    return _mean([r.s for r in _nonempty(records, "no records")])


def category_sr(records: Sequence[EpisodeRecord], category: Category) -> float:
    return _mean([r.s for r in _nonempty(_of(records, category), f"no {category.value} records")])


def avg_steps(records: Sequence[EpisodeRecord]) -> float:
    return _mean([r.t for r in _nonempty(records, "no records")])


def avg_queries(records: Sequence[EpisodeRecord]) -> float:
    interact = _nonempty(_of(records, Category.INTERACTION), "no interaction records")
    return _mean([r.c for r in interact])


def triggered(records: Iterable[EpisodeRecord]) -> list[EpisodeRecord]:
    """Non-interaction episodes that asked the user at least once."""
    return [r for r in records if r.category is not Category.INTERACTION and r.c >= 1]


def uiq(records: Sequence[EpisodeRecord]) -> float:
    interact = _nonempty(_of(records, Category.INTERACTION), "no interaction records")
    q = [r.s / r.c if r.c > 0 else 0.0 for r in interact]
    return math.fsum(q) / (len(interact) + len(triggered(records)))


def avg_mcp_calls(records: Sequence[EpisodeRecord]) -> float:
    return _mean([r.m for r in _nonempty(_of(records, Category.MCP), "no mcp records")])


# --- report ------------------------------------------------------------------

def _maybe(fn, *args) -> float | None:
    try:
        return fn(*args)
    except EmptySet:
        return None


@dataclass(frozen=True)
class MetricsReport:
    n: int
    counts: Mapping[str, int]
    sr: float | None
    sr_by_category: Mapping[str, float | None]
    avg_steps: float | None
    avg_queries: float | None
    uiq: float | None
    avg_mcp_calls: float | None
    triggered: int
    excluded_infra: int = 0
    strict_infra: bool = True

    def to_json(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "counts": dict(self.counts),
            "sr": self.sr,
            "sr_by_category": dict(self.sr_by_category),
            "avg_steps": self.avg_steps,
            "avg_queries": self.avg_queries,
            "uiq": self.uiq,
            "avg_mcp_calls": self.avg_mcp_calls,
            "triggered": self.triggered,
            "excluded_infra": self.excluded_infra,
            "strict_infra": self.strict_infra,
        }

    def to_json_bytes(self) -> bytes:
        return (json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n").encode("utf-8")

    def to_text(self) -> str:
        pct = lambda v: "-" if v is None else f"{100 * v:.1f}"
        num = lambda v, d: "-" if v is None else f"{v:.{d}f}"
        mode = "strict (infra failures score 0)" if self.strict_infra else \
            f"lenient ({self.excluded_infra} infra-failed episode(s) excluded)"
        rows = [
            ("SR (%)", pct(self.sr)),
            ("SR GUI-only (%)", pct(self.sr_by_category[Category.GUI_ONLY.value])),
            ("SR interaction (%)", pct(self.sr_by_category[Category.INTERACTION.value])),
            ("SR MCP (%)", pct(self.sr_by_category[Category.MCP.value])),
            ("Avg steps", num(self.avg_steps, 1)),
            ("Avg queries", num(self.avg_queries, 2)),
            ("UIQ", num(self.uiq, 2)),
            ("Avg MCP calls", num(self.avg_mcp_calls, 2)),
            ("Triggered (non-interaction asks)", str(self.triggered)),
        ]
        counts = ", ".join(f"{k}={v}" for k, v in self.counts.items())
        width = max(len(k) for k, _ in rows)
        lines = [f"episodes: {self.n} ({counts})", f"infra policy: {mode}", ""]
        lines += [f"{k.ljust(width)}  {v.rjust(6)}" for k, v in rows]
        return "\n".join(lines) + "\n"


def build_report(records: Sequence[EpisodeRecord], strict_infra: bool = True) -> MetricsReport:
    """All metrics over ``records``; a metric whose subset is empty is ``None``.

    With ``strict_infra`` off, infrastructure-failed episodes drop out of
    every denominator instead of counting as failures.
    """
    ordered = sorted(records, key=lambda r: r.task_id)
    excluded = 0
    if not strict_infra:
        kept = [r for r in ordered if not r.infra_error]
        excluded = len(ordered) - len(kept)
        ordered = kept
    return MetricsReport(
        n=len(ordered),
        counts={c.value: len(_of(ordered, c)) for c in Category},
        sr=_maybe(success_rate, ordered),
        sr_by_category={c.value: _maybe(category_sr, ordered, c) for c in Category},
        avg_steps=_maybe(avg_steps, ordered),
        avg_queries=_maybe(avg_queries, ordered),
        uiq=_maybe(uiq, ordered),
        avg_mcp_calls=_maybe(avg_mcp_calls, ordered),
        triggered=len(triggered(ordered)),
        excluded_infra=excluded,
        strict_infra=strict_infra,
    )
