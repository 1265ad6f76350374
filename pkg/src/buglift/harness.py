"""Client side of the execution-harness sidecar protocol.

The harness is a separate process that catalogs the target library,
instruments test programs, and executes them in isolated children. The
wire protocol is newline-delimited JSON over stdin/stdout, one document per
line, strictly alternating request/response.

The bug marker is bit-exact: a stdout line equal to the nine ASCII bytes
``BUG FOUND``. Anything else (case, spacing, decoration) does not count.
"""

from __future__ import annotations

import json
import subprocess
import threading
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

BUG_MARKER = "BUG FOUND"

SITE_KINDS = frozenset(
    {
        "assignment",
        "attribute_assignment",
        "index_assignment",
        "unpacking",
        "exception",
        "context_manager",
        "condition_subexpr",
        "call_chain_step",
    }
)


class HarnessError(Exception):
    pass


class InstrumentationError(HarnessError):
    """The harness reported the program cannot be instrumented."""


def marker_fired(stdout: str) -> bool:
    return any(line == BUG_MARKER for line in stdout.splitlines())


@dataclass(frozen=True)
class TraceEntry:
    site_kind: str
    expression_text: str
    value_repr: str


@dataclass(frozen=True)
class ExecutionResult:
    status: str  # ok | timeout | crash
    exit_code: int
    signal_name: str | None
    stdout: str
    stderr: str
    bug_found: bool
    trace: tuple[TraceEntry, ...]
    wall_time_seconds: float

    def __post_init__(self) -> None:
        if self.status not in ("ok", "timeout", "crash"):
            raise ValueError(f"invalid execution status {self.status!r}")

    @classmethod
    def from_payload(cls, payload: dict) -> "ExecutionResult":
        return cls(
            status=payload["status"],
            exit_code=int(payload.get("exit_code", 0)),
            signal_name=payload.get("signal_name"),
            stdout=payload.get("stdout", ""),
            stderr=payload.get("stderr", ""),
            bug_found=bool(payload.get("bug_found", False)),
            trace=tuple(
                TraceEntry(
                    site_kind=t["site_kind"],
                    expression_text=t["expression_text"],
                    value_repr=t["value_repr"],
                )
                for t in payload.get("trace", [])
            ),
            wall_time_seconds=float(payload.get("wall_time_seconds", 0.0)),
        )

    def to_payload(self) -> dict:
        return {
            "status": self.status,
            "exit_code": self.exit_code,
            "signal_name": self.signal_name,
            "stdout": self.stdout,
            "stderr": self.stderr,
            "bug_found": self.bug_found,
            "trace": [
                {
                    "site_kind": t.site_kind,
                    "expression_text": t.expression_text,
                    "value_repr": t.value_repr,
                }
                for t in self.trace
            ],
            "wall_time_seconds": self.wall_time_seconds,
        }


def clean_run(stdout: str = "", trace: Sequence[TraceEntry] = ()) -> ExecutionResult:
    """Convenience constructor for scripted results."""
    return ExecutionResult(
        status="ok",
        exit_code=0,
        signal_name=None,
        stdout=stdout,
        stderr="",
        bug_found=marker_fired(stdout),
        trace=tuple(trace),
        wall_time_seconds=0.01,
    )


def crash_run(signal_name: str = "SIGSEGV", stderr: str = "") -> ExecutionResult:
    return ExecutionResult(
        status="crash",
        exit_code=-11,
        signal_name=signal_name,
        stdout="",
        stderr=stderr,
        bug_found=False,
        trace=(),
        wall_time_seconds=0.01,
    )


class Harness(Protocol):
    """What the campaign needs from an execution harness."""

    def catalog(self, library_ref: str) -> list[dict]: ...

    def instrument(self, program: str) -> str: ...

    def execute(self, program: str, timeout_seconds: float) -> ExecutionResult: ...


class ScriptedHarness:
    """Mock harness answering from a transcript; no processes involved.

    ``executions`` maps a recognizer over the program text to a result; the
    first matching rule wins, with a clean run as the fallback.
    """

    def __init__(
        self,
        catalog_payloads: Sequence[dict] = (),
        executions: Sequence[tuple[Callable[[str], bool], ExecutionResult]] = (),
        instrumenter: Callable[[str], str] | None = None,
    ) -> None:
        self.catalog_payloads = list(catalog_payloads)
        self.executions = list(executions)
        self.instrumenter = instrumenter or (lambda program: program)
        self.executed_programs: list[str] = []

    def catalog(self, library_ref: str) -> list[dict]:
        return [dict(p) for p in self.catalog_payloads]

    def instrument(self, program: str) -> str:
        return self.instrumenter(program)

    def execute(self, program: str, timeout_seconds: float) -> ExecutionResult:
        self.executed_programs.append(program)
        for matches, result in self.executions:
            if matches(program):
                return result
        return clean_run()


class SubprocessHarness:
    """Speaks the JSON-lines protocol to a sidecar process.

    Requests and responses alternate strictly; a lock serializes callers so
    concurrent campaign workers each see a coherent exchange.
    """

    def __init__(self, command: Sequence[str]) -> None:
        self.command = list(command)
        self._proc: subprocess.Popen | None = None
        self._lock = threading.Lock()

    def _ensure_proc(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        return self._proc

    def _request(self, payload: dict) -> dict:
        with self._lock:
            proc = self._ensure_proc()
            assert proc.stdin is not None and proc.stdout is not None
            proc.stdin.write(json.dumps(payload, ensure_ascii=False) + "\n")
            proc.stdin.flush()
            line = proc.stdout.readline()
            if not line:
                raise HarnessError(
                    f"harness exited (code {proc.poll()}) without answering"
                )
            try:
                return json.loads(line)
            except json.JSONDecodeError as exc:
                raise HarnessError(f"unparseable harness response: {line!r}") from exc

    def catalog(self, library_ref: str) -> list[dict]:
        response = self._request({"action": "catalog", "library_ref": library_ref})
        if response.get("status") != "ok":
            raise HarnessError(f"catalog failed: {response.get('error')}")
        return response["records"]

    def instrument(self, program: str) -> str:
        response = self._request({"action": "instrument", "program": program})
        if response.get("status") != "ok":
            raise InstrumentationError(str(response.get("error")))
        return response["program"]

    def execute(self, program: str, timeout_seconds: float) -> ExecutionResult:
        response = self._request(
            {
                "action": "execute",
                "program": program,
                "timeout_seconds": timeout_seconds,
            }
        )
        if response.get("status") == "error":
            raise HarnessError(f"execution failed: {response.get('error')}")
        return ExecutionResult.from_payload(response)

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
        self._proc = None

    def __enter__(self) -> "SubprocessHarness":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
