"""Full-stack integration: campaign through the real execution harness.

The sidecar (the ``apiharness`` package) is driven exclusively over its
stdio JSON protocol; the fixture library contains a real silent bug
(op_03 returns True instead of False) and a real native crash (op_12
dereferences a null pointer). Requires the harness package to be installed.
"""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

pytest.importorskip("apiharness")

from buglift import demo
from buglift.campaign import CampaignConfig, run_campaign
from buglift.harness import SubprocessHarness
from tests.test_acceptance import REFERENCE_TRACE

REALLIB = Path(__file__).parent / "fixtures" / "reallib"
HARNESS_CMD = [sys.executable, "-m", "apiharness"]


@pytest.fixture
def real_harness(monkeypatch):
    # The sidecar and its children must be able to import the fixture lib.
    monkeypatch.setenv("PYTHONPATH", str(REALLIB))
    with SubprocessHarness(HARNESS_CMD) as harness:
        yield harness


class TestRealHarness:
    def test_catalog_scans_fixture_library(self, real_harness):
        records = real_harness.catalog("stublib")
        names = {r["qualified_name"] for r in records}
        assert len(records) == 36
        assert demo.SILENT_BUG_API in names
        assert demo.ANCHOR_API in names

    def test_instrumented_execution_produces_traces(self, real_harness):
        program = demo.transfer_answer_for(demo.SILENT_BUG_API)
        # Extract the actual test program from the scripted transfer answer.
        from buglift.patterns import parse_fenced_fields

        source = parse_fenced_fields(
            program, ("RATIONALE", "ADAPTED_CONTEXT", "ADAPTED_ORACLE", "TEST_PROGRAM"),
            tail_field="TEST_PROGRAM",
        )["TEST_PROGRAM"]
        instrumented = real_harness.instrument(source)
        result = real_harness.execute(instrumented, timeout_seconds=30)
        assert result.bug_found is True
        assert any(entry.site_kind == "assignment" for entry in result.trace)

    def test_campaign_against_real_library(self, real_harness):
        gateway, matcher, _, validator = demo.build_demo_runtime("record")
        state = run_campaign(
            demo.DEMO_PATTERN,
            matcher,
            gateway,
            real_harness,
            validator,
            CampaignConfig(window_size=10, expansion_count=10, mode="record"),
        )
        assert state.trace == REFERENCE_TRACE
        assert [f.target_api for f in state.findings] == [
            demo.SILENT_BUG_API,
            demo.CRASH_API,
        ]
        crash_finding = state.findings[1]
        assert crash_finding.execution.status == "crash"
        assert crash_finding.execution.signal_name == "SIGSEGV"
        assert crash_finding.bug_category == "Crash"
        silent_finding = state.findings[0]
        assert silent_finding.execution.bug_found is True
        assert any(
            entry.site_kind == "condition_subexpr"
            for entry in silent_finding.execution.trace
        )
