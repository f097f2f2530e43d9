"""Adapter contract for real (emulated) devices, plus an adb-backed adapter.

The harness never speaks the ADB wire protocol itself; :class:`AdbTransport`
shells out to the ``adb`` binary.
"""

from __future__ import annotations

import logging
import shlex
import subprocess
import time
from typing import Callable, Protocol, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")


class TransportError(RuntimeError):
    """Device link failure; ``reason`` is ``"timeout"`` or ``"closed"``."""

    def __init__(self, reason: str, message: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {message}" if message else reason)


class RemoteTransport(Protocol):
    def exec(self, command: str) -> tuple[int, bytes]: ...

    def screenshot(self) -> bytes: ...

    def pull(self, path: str) -> bytes: ...

    def load_snapshot(self, tag: str) -> None: ...

    def save_snapshot(self, tag: str) -> None: ...


def with_retries(fn: Callable[[], T], attempts: int = 3, delay: float = 0.0) -> T:
    """Call ``fn`` up to ``attempts`` times, re-raising the last TransportError."""
    last: TransportError | None = None
    for i in range(attempts):
        try:
            return fn()
        except TransportError as e:
            last = e
            logger.warning("transport attempt %d/%d failed: %s", i + 1, attempts, e)
            if delay:
                time.sleep(delay)
    assert last is not None
    raise last


class AdbTransport:
    """Runs ``adb`` against one emulator serial."""

    def __init__(self, serial: str | None = None, adb: str = "adb", timeout: float = 30.0):
        self.serial = serial
        self.adb = adb
        self.timeout = timeout

    def _run(self, *args: str) -> subprocess.CompletedProcess:
        cmd = [self.adb]
        if self.serial:
            cmd += ["-s", self.serial]
        cmd += list(args)
        try:
            return subprocess.run(cmd, capture_output=True, timeout=self.timeout)
        except subprocess.TimeoutExpired as e:
            raise TransportError("timeout", " ".join(cmd)) from e
        except OSError as e:
            raise TransportError("closed", str(e)) from e

    def _checked(self, *args: str) -> bytes:
        proc = self._run(*args)
        if proc.returncode != 0:
            raise TransportError("closed", proc.stderr.decode("utf-8", "replace").strip())
        return proc.stdout

    def exec(self, command: str) -> tuple[int, bytes]:
        proc = self._run("shell", command)
        return proc.returncode, proc.stdout

    def screenshot(self) -> bytes:
        return self._checked("exec-out", "screencap", "-p")

    def pull(self, path: str) -> bytes:
        return self._checked("exec-out", "cat", shlex.quote(path))

    def load_snapshot(self, tag: str) -> None:
        self._checked("emu", "avd", "snapshot", "load", tag)

    def save_snapshot(self, tag: str) -> None:
        self._checked("emu", "avd", "snapshot", "save", tag)
