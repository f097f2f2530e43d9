"""Command-line entry point: run, validate, report, list-tasks."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from ..agent.policy import ChatPolicy, ScriptedPolicy
from ..usersim import Backend
from .orchestrate import RunConfig, report, run, validate_task
from .tasks import SchemaError, load_tasks


def _bool(text: str) -> bool:
    v = text.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mobilebench", description="Evaluate mobile GUI agents on simulated tasks.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run tasks and write traces, results and a report")
    r.add_argument("--tasks", type=Path, default=None, help="task file (default: shipped golden tasks)")
    r.add_argument("--filter", default=None, help="comma-separated: category=NAME, id=GLOB, app=NAME or an id glob")
    r.add_argument("--policy", choices=("scripted", "chat"), default="scripted")
    r.add_argument("--script", choices=("solution", "sabotage"), default="solution",
                   help="which fixture script drives the scripted policy")
    r.add_argument("--user", choices=[b.value for b in Backend], default=Backend.SCRIPTED.value,
                   help="simulated user backend")
    r.add_argument("--parallel", type=_positive, default=1)
    r.add_argument("--out", type=Path, default=Path("runs/latest"))
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--strict-infra", type=_bool, default=True,
                   help="score infrastructure failures as 0 (true) or drop them from denominators (false)")
    r.add_argument("--mcp-fixtures", type=Path, default=None)
    r.add_argument("--pre-episode", default=None, help="shell command run before each episode")
    r.add_argument("--post-episode", default=None, help="shell command run after each episode")

    v = sub.add_parser("validate", help="check that a task is solvable within five attempts")
    v.add_argument("--task", required=True)
    v.add_argument("--tasks", type=Path, default=None)
    v.add_argument("--policy", choices=("scripted", "chat"), default="scripted")
    v.add_argument("--script", choices=("solution", "sabotage"), default="solution")
    v.add_argument("--attempts", type=int, default=5)

    rp = sub.add_parser("report", help="recompute the report of a finished run")
    rp.add_argument("--dir", type=Path, required=True)
    rp.add_argument("--json", action="store_true", help="print the structured report instead of the table")

    lt = sub.add_parser("list-tasks", help="list tasks in a task file")
    lt.add_argument("--tasks", type=Path, default=None)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = RunConfig(tasks_path=args.tasks, filter=args.filter, parallelism=args.parallel,
                            policy=args.policy, script=args.script, user_backend=Backend(args.user),
                            out_dir=args.out, seed=args.seed, strict_infra=args.strict_infra,
                            mcp_fixtures=args.mcp_fixtures, pre_episode=args.pre_episode,
                            post_episode=args.post_episode)
            result = run(cfg)
            for ep in result.episodes:
                print(f"{ep.task.id:<28} s={ep.verdict.score} t={ep.record.t:<3} "
                      f"{ep.trace.termination.value:<18} {ep.verdict.evidence}")
            print()
            print(result.report.to_text(), end="")
            print(f"artifacts: {result.out_dir}")
            return 0

        if args.command == "validate":
            tasks = {t.id: t for t in load_tasks(args.tasks)}
            if args.task not in tasks:
                print(f"unknown task {args.task!r}", file=sys.stderr)
                return 2
            task = tasks[args.task]
            if args.policy == "chat":
                operator = lambda attempt: ChatPolicy()
            else:
                operator = lambda attempt: ScriptedPolicy(task.script(args.script))
            res = validate_task(task, operator, max_attempts=args.attempts)
            for i, verdict in enumerate(res.verdicts, 1):
                print(f"attempt {i}: s={verdict.score} {verdict.evidence}")
            print(f"{task.id}: {'valid' if res.valid else 'flagged for revision'} after {res.attempts} attempt(s)")
            return 0 if res.valid else 1

        if args.command == "report":
            rep = report(args.dir)
            if args.json:
                sys.stdout.write(rep.to_json_bytes().decode("utf-8"))
            else:
                print(rep.to_text(), end="")
            return 0

        if args.command == "list-tasks":
            for t in load_tasks(args.tasks):
                tools = ",".join(f"{n}" for _, n in sorted(t.mcp_allowlist)) or "-"
                print(f"{t.id:<28} {t.category.value:<12} start={t.start:<20} eval={t.evaluator.mode.value:<16} tools={tools}")
            return 0
    except SchemaError as e:
        print(f"task file error: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    return 2  # pragma: no cover - argparse enforces a command


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
