"""Record predicates shared by the simulator, fixtures and evaluators.

A predicate is a mapping of field name to either a literal (equality) or an
operator object such as ``{"ne": ""}``, ``{"in": [1, 2]}`` or
``{"contains": "1458"}``. All clauses must hold.
"""

from __future__ import annotations

from typing import Any, Callable, Mapping

_MISSING = object()


def _op(op: str, actual: Any, expected: Any) -> bool:
    if op == "eq":
        return actual is not _MISSING and actual == expected
    if op == "ne":
        return actual is _MISSING or actual != expected
    if op == "in":
        return actual is not _MISSING and actual in expected
    if op == "not_in":
        return actual is _MISSING or actual not in expected
    if op == "contains":
        return isinstance(actual, str) and expected in actual
    if op == "exists":
        return (actual is not _MISSING) == bool(expected)
    if op in ("lt", "le", "gt", "ge"):
        if actual is _MISSING or actual is None:
            return False
        try:
            return {
                "lt": actual < expected,
                "le": actual <= expected,
                "gt": actual > expected,
                "ge": actual >= expected,
            }[op]
        except TypeError:
            return False
    raise ValueError(f"unknown predicate operator {op!r}")


OPERATORS = ("eq", "ne", "in", "not_in", "contains", "exists", "lt", "le", "gt", "ge")


def _is_operator_obj(v: Any) -> bool:
    return isinstance(v, Mapping) and len(v) > 0 and all(k in OPERATORS for k in v)


def matches(record: Mapping[str, Any], predicate: Mapping[str, Any]) -> bool:
    for key, cond in predicate.items():
        actual = record.get(key, _MISSING)
        if _is_operator_obj(cond):
            if not all(_op(op, actual, exp) for op, exp in cond.items()):
                return False
        elif actual is _MISSING or actual != cond:
            return False
    return True


def validate(predicate: Mapping[str, Any]) -> None:
    if not isinstance(predicate, Mapping):
        raise ValueError("predicate must be a mapping")
    for cond in predicate.values():
        if isinstance(cond, Mapping) and cond and not _is_operator_obj(cond):
            bad = [k for k in cond if k not in OPERATORS]
            raise ValueError(f"unknown predicate operator(s) {bad}")


Predicate = Mapping[str, Any] | Callable[[Mapping[str, Any]], bool]


def as_callable(predicate: Predicate) -> Callable[[Mapping[str, Any]], bool]:
    if callable(predicate):
        return predicate
    validate(predicate)
    return lambda rec: matches(rec, predicate)
