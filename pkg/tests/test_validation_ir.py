"""Structural bug-type matching over hand-built fact fixtures.

One positive and one negative fixture per bug type, plus binding-consistency
and crash-derivation cases.
"""

from __future__ import annotations

import pytest

from buglift.harness import clean_run, crash_run
from buglift.validation.ir import (
    CRASH_FAULTS,
    PRECISION_TOLERANCE,
    IrBugType,
    TraceFact,
    api_call,
    control_block,
    facts_from_execution,
    match_ir,
    oracle_check,
    var_def,
)

DEVICE_FACTS = [
    var_def("v_cpu", "tensor", device="cpu"),
    var_def("v_gpu", "tensor", device="cuda:0"),
    oracle_check("ValueCorrectness", "Compare", ("v_cpu", "v_gpu"), outcome="FAIL"),
]

JIT_FACTS = [
    api_call("lib.op", binding="v1", mode="eager"),
    api_call("lib.op", binding="v2", mode="jit_trace"),
    oracle_check("ValueCorrectness", "Compare", ("v1", "v2"), outcome="FAIL"),
]

COMPILE_FACTS = [
    api_call("lib.op", binding="v1", mode="eager"),
    api_call("lib.op", binding="v2", mode="compile_dynamo"),
    oracle_check("ValueCorrectness", "Compare", ("v1", "v2"), outcome="FAIL"),
]

FUNCTIONAL_FACTS = [
    api_call("lib.op", binding="v5"),
    oracle_check(
        "ValueCorrectness",
        "MatchValue",
        ("v5", "expected"),
        outcome="MISMATCH",
        criteria=("dtype", "shape", "numerical"),
    ),
]

CRASH_FACTS = [
    api_call("lib.op", binding="fault", mode="*", fault="SegFault"),
    oracle_check("ExceptionType", "FaultType", ("fault",), outcome="TRIGGERED"),
]

PRECISION_FACTS = [
    api_call("lib.op", binding="v"),
    oracle_check(
        "ValueCorrectness",
        "Compare",
        ("v", "expected"),
        outcome="FAIL",
        tolerance={"abs": 1e-4, "rel": 1e-5},
    ),
]

SECURITY_FACTS = [
    control_block(binding="blk", security_sensitive="true"),
    oracle_check(
        "SecurityViolation",
        "SecurityPolicyCheck",
        outcome="VIOLATION_DETECTED",
        criteria=("CodeInjection", "high"),
    ),
]

POSITIVE_FIXTURES = {
    IrBugType.DEVICE_INCONSISTENCY: DEVICE_FACTS,
    IrBugType.JIT_EAGER_MISMATCH: JIT_FACTS,
    IrBugType.COMPILE_EAGER_MISMATCH: COMPILE_FACTS,
    IrBugType.FUNCTIONAL_DEFECT: FUNCTIONAL_FACTS,
    IrBugType.EXECUTION_CRASH: CRASH_FACTS,
    IrBugType.PRECISION_DEGRADATION: PRECISION_FACTS,
    IrBugType.SECURITY_RISK: SECURITY_FACTS,
}

NEGATIVE_FIXTURES = {
    # CPU/GPU facts carry no jit-mode API call.
    IrBugType.JIT_EAGER_MISMATCH: DEVICE_FACTS,
    # Both tensors on the CPU family: no cross-device pair.
    IrBugType.DEVICE_INCONSISTENCY: [
        var_def("v_cpu", "tensor", device="cpu"),
        var_def("v_gpu", "tensor", device="cpu:1"),
        oracle_check("ValueCorrectness", "Compare", ("v_cpu", "v_gpu"), outcome="FAIL"),
    ],
    # Eager/compiled pair over *different* APIs: bindings inconsistent.
    IrBugType.COMPILE_EAGER_MISMATCH: [
        api_call("lib.a", binding="v1", mode="eager"),
        api_call("lib.b", binding="v2", mode="compile_fx"),
        oracle_check("ValueCorrectness", "Compare", ("v1", "v2"), outcome="FAIL"),
    ],
    # Wrong outcome token for a functional check.
    IrBugType.FUNCTIONAL_DEFECT: [
        api_call("lib.op", binding="v5"),
        oracle_check(
            "ValueCorrectness",
            "MatchValue",
            ("v5", "expected"),
            outcome="FAIL",
            criteria=("numerical",),
        ),
    ],
    # Fault kind outside {FloatingPointException, SegFault, Aborted}.
    IrBugType.EXECUTION_CRASH: [
        api_call("lib.op", binding="fault", mode="*", fault="Timeout"),
        oracle_check("ExceptionType", "FaultType", ("fault",), outcome="TRIGGERED"),
    ],
    # Tolerance differs from {abs: 1e-4, rel: 1e-5}.
    IrBugType.PRECISION_DEGRADATION: [
        api_call("lib.op", binding="v"),
        oracle_check(
            "ValueCorrectness",
            "Compare",
            ("v", "expected"),
            outcome="FAIL",
            tolerance={"abs": 1e-3, "rel": 1e-5},
        ),
    ],
    # No security-sensitive node anywhere.
    IrBugType.SECURITY_RISK: [
        control_block(binding="blk"),
        oracle_check(
            "SecurityViolation",
            "SecurityPolicyCheck",
            outcome="VIOLATION_DETECTED",
            criteria=("CodeInjection", "high"),
        ),
    ],
}


class TestMatchIr:
    @pytest.mark.parametrize("bug_type", list(IrBugType))
    def test_positive_fixture(self, bug_type):
        assert match_ir(POSITIVE_FIXTURES[bug_type], bug_type) is True

    @pytest.mark.parametrize("bug_type", list(IrBugType))
    def test_negative_fixture(self, bug_type):
        assert match_ir(NEGATIVE_FIXTURES[bug_type], bug_type) is False

    def test_device_bindings_must_be_consistent(self):
        facts = [
            var_def("v_cpu", "tensor", device="cpu"),
            var_def("v_gpu", "tensor", device="cuda"),
            oracle_check("ValueCorrectness", "Compare", ("v_cpu", "v_other"), outcome="FAIL"),
        ]
        assert match_ir(facts, IrBugType.DEVICE_INCONSISTENCY) is False

    def test_device_wildcard_suffixes(self):
        facts = [
            var_def("a", "tensor", device="cpu:0"),
            var_def("b", "tensor", device="cuda:3"),
            oracle_check("ValueCorrectness", "Compare", ("a", "b"), outcome="FAIL"),
        ]
        assert match_ir(facts, IrBugType.DEVICE_INCONSISTENCY) is True

    def test_jit_script_mode_also_matches(self):
        facts = [
            api_call("lib.op", binding="v1", mode="eager"),
            api_call("lib.op", binding="v2", mode="jit_script"),
            oracle_check("ValueCorrectness", "Compare", ("v1", "v2"), outcome="FAIL"),
        ]
        assert match_ir(facts, IrBugType.JIT_EAGER_MISMATCH) is True

    def test_every_crash_fault_kind_matches(self):
        for fault in CRASH_FAULTS:
            facts = [
                api_call("lib.op", binding="fault", mode="*", fault=fault),
                oracle_check("ExceptionType", "FaultType", ("fault",), outcome="TRIGGERED"),
            ]
            assert match_ir(facts, IrBugType.EXECUTION_CRASH) is True

    def test_precision_tolerance_is_pinned(self):
        assert PRECISION_TOLERANCE == {"abs": 1e-4, "rel": 1e-5}

    def test_functional_criteria_subset_allowed(self):
        facts = [
            api_call("lib.op", binding="v5"),
            oracle_check(
                "ValueCorrectness",
                "MatchValue",
                ("v5", "expected"),
                outcome="MISMATCH",
                criteria=("numerical",),
            ),
        ]
        assert match_ir(facts, IrBugType.FUNCTIONAL_DEFECT) is True


class TestFactInvariants:
    def test_oracle_check_requires_condition(self):
        with pytest.raises(ValueError, match="condition"):
            TraceFact(kind="oracle_check")

    def test_unknown_outcome_rejected(self):
        with pytest.raises(ValueError, match="outcome"):
            oracle_check("ValueCorrectness", "Compare", ("a", "b"), outcome="EXPLODED")

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError, match="kind"):
            TraceFact(kind="wormhole")


class TestFactsFromExecution:
    def test_segfault_classifies_as_crash(self):
        facts = facts_from_execution(crash_run("SIGSEGV"), api="lib.op")
        assert match_ir(facts, IrBugType.EXECUTION_CRASH) is True

    def test_sigfpe_and_sigabrt_map_to_fault_kinds(self):
        for signal_name, fault in (("SIGFPE", "FloatingPointException"), ("SIGABRT", "Aborted")):
            facts = facts_from_execution(crash_run(signal_name), api="lib.op")
            call = next(f for f in facts if f.kind == "api_call")
            assert call.fault == fault

    def test_unknown_signal_does_not_classify(self):
        facts = facts_from_execution(crash_run("SIGKILL"), api="lib.op")
        assert match_ir(facts, IrBugType.EXECUTION_CRASH) is False

    def test_clean_run_yields_no_crash_facts(self):
        assert facts_from_execution(clean_run("fine"), api="lib.op") == []

    def test_label_parse_closed_set(self):
        assert IrBugType.parse("functional_defect") is IrBugType.FUNCTIONAL_DEFECT
        with pytest.raises(ValueError):
            IrBugType.parse("Quantum_Flutter")
