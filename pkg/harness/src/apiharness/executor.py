"""Isolated execution of test programs with timeout and signal capture.

Each program runs in a fresh child interpreter inside its own process
group, so a crashing or hanging test can never take down the serve loop.
Trace lines arrive on the sentinel-prefixed stderr channel injected by the
instrumenter; everything else on stderr is passed through untouched. The
bug marker check is bit-exact: a stdout line equal to ``BUG FOUND``.
"""

from __future__ import annotations

import json
import os
import signal
import subprocess
import sys
import tempfile
import time
from pathlib import Path

from apiharness.instrument import TRACE_SENTINEL

BUG_MARKER = "BUG FOUND"


def marker_fired(stdout: str) -> bool:
    return any(line == BUG_MARKER for line in stdout.splitlines())


def split_trace_channel(stderr: str) -> tuple[list[dict], str]:
    """Separate sentinel-prefixed trace lines from ordinary stderr output."""
    trace: list[dict] = []
    plain: list[str] = []
    for line in stderr.splitlines():
        if line.startswith(TRACE_SENTINEL):
            try:
                entry = json.loads(line[len(TRACE_SENTINEL):])
            except json.JSONDecodeError:
                plain.append(line)
                continue
            trace.append(
                {
                    "site_kind": str(entry.get("site_kind", "")),
                    "expression_text": str(entry.get("expression_text", "")),
                    "value_repr": str(entry.get("value_repr", "")),
                }
            )
        else:
            plain.append(line)
    plain_text = "\n".join(plain)
    if plain and stderr.endswith("\n"):
        plain_text += "\n"
    return trace, plain_text


def execute_program(
    program: str,
    timeout_seconds: float,
    python: str | None = None,
    extra_env: dict[str, str] | None = None,
) -> dict:
    """Run a program in an isolated child; returns the execution payload."""
    env = dict(os.environ)
    if extra_env:
        env.update(extra_env)
    started = time.monotonic()
    with tempfile.TemporaryDirectory(prefix="apiharness-") as workdir:
        path = Path(workdir) / "main.py"
        path.write_text(program, encoding="utf-8")
        proc = subprocess.Popen(
            [python or sys.executable, "-u", str(path)],
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            encoding="utf-8",
            errors="replace",
            env=env,
            start_new_session=True,
        )
        timed_out = False
        try:
            stdout, stderr = proc.communicate(timeout=timeout_seconds)
        except subprocess.TimeoutExpired:
            timed_out = True
            try:
                os.killpg(proc.pid, signal.SIGKILL)
            except (ProcessLookupError, PermissionError):
                proc.kill()
            stdout, stderr = proc.communicate()
    wall = time.monotonic() - started

    trace, plain_stderr = split_trace_channel(stderr or "")
    exit_code = proc.returncode if proc.returncode is not None else -1
    signal_name: str | None = None
    if timed_out:
        status = "timeout"
    elif exit_code < 0:
        status = "crash"
        try:
            signal_name = signal.Signals(-exit_code).name
        except ValueError:
            signal_name = f"signal {-exit_code}"
    else:
        status = "ok"

    return {
        "status": status,
        "exit_code": exit_code,
        "signal_name": signal_name,
        "stdout": stdout or "",
        "stderr": plain_stderr,
        "bug_found": marker_fired(stdout or ""),
        "trace": trace,
        "wall_time_seconds": wall,
    }
