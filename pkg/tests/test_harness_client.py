"""Subprocess harness client against a real sidecar process."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

from buglift.demo import CRASH_API, SILENT_BUG_API, transfer_answer_for
from buglift.harness import (
    BUG_MARKER,
    ExecutionResult,
    HarnessError,
    SubprocessHarness,
    clean_run,
    marker_fired,
)

SIDECAR = [sys.executable, str(Path(__file__).parent / "fixtures" / "scripted_sidecar.py")]


@pytest.fixture
def sidecar():
    with SubprocessHarness(SIDECAR) as harness:
        yield harness


class TestMarkerRule:
    def test_exact_marker_line(self):
        assert marker_fired("setup\nBUG FOUND\ndone\n") is True

    def test_case_variant_rejected(self):
        assert marker_fired("bug found\n") is False

    def test_embedded_marker_rejected(self):
        assert marker_fired("--BUG FOUND--\n") is False
        assert marker_fired("BUG FOUND!") is False

    def test_marker_constant(self):
        assert BUG_MARKER == "BUG FOUND"


class TestSubprocessHarness:
    def test_catalog_round_trip(self, sidecar):
        records = sidecar.catalog("stublib")
        assert len(records) == 36
        assert records[0]["qualified_name"].startswith("stublib.")

    def test_instrument_is_identity_for_scripted(self, sidecar):
        assert sidecar.instrument("a = 1\n") == "a = 1\n"

    def test_silent_bug_execution(self, sidecar):
        program = f"import stublib\n{SILENT_BUG_API}()\n"
        result = sidecar.execute(program, timeout_seconds=5)
        assert isinstance(result, ExecutionResult)
        assert result.bug_found is True
        assert result.status == "ok"

    def test_crash_execution(self, sidecar):
        program = f"import stublib\n{CRASH_API}()\n"
        result = sidecar.execute(program, timeout_seconds=5)
        assert result.status == "crash"
        assert result.signal_name == "SIGSEGV"
        assert result.bug_found is False

    def test_clean_execution(self, sidecar):
        result = sidecar.execute("import stublib\nstublib.ops.op_20()\n", timeout_seconds=5)
        assert result.status == "ok"
        assert result.bug_found is False

    def test_strict_alternation_many_requests(self, sidecar):
        for k in range(1, 11):
            program = transfer_answer_for(f"stublib.ops.op_{k:02d}")
            result = sidecar.execute(program, timeout_seconds=5)
            assert result.status in ("ok", "crash")

    def test_dead_sidecar_raises(self):
        harness = SubprocessHarness([sys.executable, "-c", "pass"])
        with pytest.raises(HarnessError, match="without answering"):
            harness.execute("print('x')", timeout_seconds=5)
        harness.close()


class TestExecutionResultPayload:
    def test_round_trip(self):
        result = clean_run("BUG FOUND\n")
        assert ExecutionResult.from_payload(result.to_payload()) == result

    def test_invalid_status_rejected(self):
        with pytest.raises(ValueError, match="status"):
            ExecutionResult(
                status="exploded",
                exit_code=0,
                signal_name=None,
                stdout="",
                stderr="",
                bug_found=False,
                trace=(),
                wall_time_seconds=0.0,
            )
