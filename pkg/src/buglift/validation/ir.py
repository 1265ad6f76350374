"""Structural bug-type definitions over execution facts.

Seven bug types are defined as conjunctions of clauses over a small node
grammar (variable definitions, API calls, oracle checks, control blocks).
``match_ir`` decides satisfiability of a type's clauses against a list of
facts with consistent value bindings; it is fully deterministic and doubles
as the classifier for signal-detected crashes, which therefore need no LLM
round-trip.

Facts are never invented: they are derived from the test program text and
the instrumented execution log (or, for crashes, the recorded signal).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence

from buglift.harness import ExecutionResult


class IrBugType(str, Enum):
    DEVICE_INCONSISTENCY = "Device_Inconsistency"
    JIT_EAGER_MISMATCH = "JIT_Eager_Mismatch"
    COMPILE_EAGER_MISMATCH = "Compile_Eager_Mismatch"
    FUNCTIONAL_DEFECT = "Functional_Defect"
    EXECUTION_CRASH = "Execution_Crash"
    PRECISION_DEGRADATION = "Precision_Degradation"
    SECURITY_RISK = "Security_Risk"

    @classmethod
    def parse(cls, label: str) -> "IrBugType":
        cleaned = label.strip()
        for member in cls:
            if member.value.lower() == cleaned.lower():
                return member
        raise ValueError(f"label {label!r} is outside the closed bug-type set")


# Types whose oracle compares the same computation across two environments.
MISMATCH_TYPES = frozenset(
    {
        IrBugType.DEVICE_INCONSISTENCY,
        IrBugType.JIT_EAGER_MISMATCH,
        IrBugType.COMPILE_EAGER_MISMATCH,
    }
)

CRASH_FAULTS = ("FloatingPointException", "SegFault", "Aborted")
PRECISION_TOLERANCE = {"abs": 1e-4, "rel": 1e-5}
FUNCTIONAL_CRITERIA = frozenset({"dtype", "shape", "numerical"})

JIT_MODES = frozenset({"jit_trace", "jit_script"})
COMPILE_MODES = frozenset({"compile_fx", "compile_dynamo"})

_SIGNAL_FAULTS = {
    "SIGFPE": "FloatingPointException",
    "SIGSEGV": "SegFault",
    "SIGABRT": "Aborted",
}

_OUTCOMES = frozenset({"FAIL", "TRIGGERED", "MISMATCH", "VIOLATION_DETECTED"})
_FACT_KINDS = frozenset({"var_def", "api_call", "oracle_check", "control_block"})


@dataclass(frozen=True)
class TraceFact:
    """One execution-relevant fact in the IR node grammar.

    ``binding`` names the value a node produces (v1, v_cpu, fault, ...);
    oracle checks reference bindings through ``operands``.
    """

    kind: str
    binding: str = ""
    var_type: str = ""
    api: str = ""
    attrs: Mapping[str, str] = field(default_factory=dict)
    fault: str | None = None
    check_kind: str = ""
    condition: str = ""
    operands: tuple[str, ...] = ()
    tolerance: Mapping[str, float] | None = None
    criteria: tuple[str, ...] = ()
    capture_tensors: tuple[str, ...] = ()
    outcome: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in _FACT_KINDS:
            raise ValueError(f"unknown fact kind {self.kind!r}")
        if self.kind == "oracle_check" and not self.condition:
            raise ValueError("every oracle check must name a condition")
        if self.outcome is not None and self.outcome not in _OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")


def var_def(binding: str, var_type: str, **attrs: str) -> TraceFact:
    return TraceFact(kind="var_def", binding=binding, var_type=var_type, attrs=dict(attrs))


def api_call(
    api: str,
    binding: str = "",
    mode: str = "",
    fault: str | None = None,
    **attrs: str,
) -> TraceFact:
    merged = dict(attrs)
    if mode:
        merged["mode"] = mode
    return TraceFact(kind="api_call", api=api, binding=binding, fault=fault, attrs=merged)


def oracle_check(
    check_kind: str,
    condition: str,
    operands: Sequence[str] = (),
    outcome: str | None = None,
    tolerance: Mapping[str, float] | None = None,
    criteria: Sequence[str] = (),
    capture_tensors: Sequence[str] = (),
) -> TraceFact:
    return TraceFact(
        kind="oracle_check",
        check_kind=check_kind,
        condition=condition,
        operands=tuple(operands),
        outcome=outcome,
        tolerance=dict(tolerance) if tolerance is not None else None,
        criteria=tuple(criteria),
        capture_tensors=tuple(capture_tensors),
    )


def control_block(binding: str = "", **attrs: str) -> TraceFact:
    return TraceFact(kind="control_block", binding=binding, attrs=dict(attrs))


# ---------------------------------------------------------------------------
# Clause matching
# ---------------------------------------------------------------------------


def _device_family(fact: TraceFact) -> str:
    # device=cpu:* matches "cpu" as well as "cpu:0".
    return fact.attrs.get("device", "").split(":")[0]


def _checks(facts: Iterable[TraceFact], check_kind: str, condition: str) -> list[TraceFact]:
    return [
        f
        for f in facts
        if f.kind == "oracle_check" and f.check_kind == check_kind and f.condition == condition
    ]


def _match_device_inconsistency(facts: Sequence[TraceFact]) -> bool:
    cpu_defs = [
        f for f in facts if f.kind == "var_def" and f.var_type == "tensor" and _device_family(f) == "cpu"
    ]
    gpu_defs = [
        f for f in facts if f.kind == "var_def" and f.var_type == "tensor" and _device_family(f) == "cuda"
    ]
    for check in _checks(facts, "ValueCorrectness", "Compare"):
        if check.outcome != "FAIL":
            continue
        for cpu in cpu_defs:
            for gpu in gpu_defs:
                if set(check.operands) == {cpu.binding, gpu.binding}:
                    return True
    return False


def _match_execution_pair(facts: Sequence[TraceFact], other_modes: frozenset[str]) -> bool:
    eager_calls = [
        f for f in facts if f.kind == "api_call" and f.attrs.get("mode") == "eager"
    ]
    other_calls = [
        f for f in facts if f.kind == "api_call" and f.attrs.get("mode") in other_modes
    ]
    for check in _checks(facts, "ValueCorrectness", "Compare"):
        if check.outcome != "FAIL":
            continue
        for eager in eager_calls:
            for other in other_calls:
                if eager.api != other.api:
                    continue
                if set(check.operands) == {eager.binding, other.binding}:
                    return True
    return False


def _match_functional_defect(facts: Sequence[TraceFact]) -> bool:
    calls = [f for f in facts if f.kind == "api_call"]
    for check in _checks(facts, "ValueCorrectness", "MatchValue"):
        if check.outcome != "MISMATCH":
            continue
        if not check.criteria or not set(check.criteria) <= FUNCTIONAL_CRITERIA:
            continue
        if len(check.operands) != 2:
            continue
        if any(call.binding == check.operands[0] for call in calls):
            return True
    return False


def _match_execution_crash(facts: Sequence[TraceFact]) -> bool:
    faulted = [
        f
        for f in facts
        if f.kind == "api_call" and f.fault is not None and f.fault in CRASH_FAULTS
    ]
    for check in _checks(facts, "ExceptionType", "FaultType"):
        if check.outcome != "TRIGGERED":
            continue
        for call in faulted:
            if call.binding in check.operands:
                return True
    return False


def _match_precision_degradation(facts: Sequence[TraceFact]) -> bool:
    calls = [f for f in facts if f.kind == "api_call"]
    for check in _checks(facts, "ValueCorrectness", "Compare"):
        if check.outcome != "FAIL":
            continue
        if check.tolerance != PRECISION_TOLERANCE:
            continue
        if len(check.operands) != 2:
            continue
        if any(call.binding == check.operands[0] for call in calls):
            return True
    return False


def _match_security_risk(facts: Sequence[TraceFact]) -> bool:
    sensitive = any(
        f.kind in ("var_def", "api_call", "control_block")
        and str(f.attrs.get("security_sensitive", "")).lower() == "true"
        for f in facts
    )
    if not sensitive:
        return False
    for check in _checks(facts, "SecurityViolation", "SecurityPolicyCheck"):
        if check.outcome != "VIOLATION_DETECTED":
            continue
        # The policy check carries (violation_type, severity) as its criteria.
        if (
            len(check.criteria) >= 2
            and check.criteria[0]
            and check.criteria[1] in ("high", "medium", "low")
        ):
            return True
    return False


_MATCHERS = {
    IrBugType.DEVICE_INCONSISTENCY: _match_device_inconsistency,
    IrBugType.JIT_EAGER_MISMATCH: lambda facts: _match_execution_pair(facts, JIT_MODES),
    IrBugType.COMPILE_EAGER_MISMATCH: lambda facts: _match_execution_pair(
        facts, COMPILE_MODES
    ),
    IrBugType.FUNCTIONAL_DEFECT: _match_functional_defect,
    IrBugType.EXECUTION_CRASH: _match_execution_crash,
    IrBugType.PRECISION_DEGRADATION: _match_precision_degradation,
    IrBugType.SECURITY_RISK: _match_security_risk,
}


def match_ir(facts: Sequence[TraceFact], bug_type: IrBugType) -> bool:
    """True iff the conjunction of the type's clauses is satisfiable against
    the facts with consistent bindings."""
    return _MATCHERS[bug_type](list(facts))


def facts_from_execution(execution: ExecutionResult, api: str) -> list[TraceFact]:
    """Derive facts from one execution; for signal terminations the
    harness's crash detector is the oracle, with the signal as evidence."""
    facts: list[TraceFact] = []
    if execution.status == "crash" and execution.signal_name:
        fault = _SIGNAL_FAULTS.get(execution.signal_name, execution.signal_name)
        facts.append(api_call(api=api, binding="fault", mode="*", fault=fault))
        if fault in CRASH_FAULTS:
            facts.append(
                oracle_check(
                    "ExceptionType",
                    "FaultType",
                    operands=("fault",),
                    outcome="TRIGGERED",
                )
            )
    return facts


# ---------------------------------------------------------------------------
# Catalog rendering (for classification prompts)
# ---------------------------------------------------------------------------

IR_CATALOG_TEXT = """\
Identifiers: VarDef(<type>)[attrs] defines a typed variable; APICall(<api>)[mode]
is a call and its produced value; OracleCheck(<kind>)(condition=...) is an
assertion; ControlBlock[attrs] is a structured block. "->" binds the produced
value or names the check outcome.

Device_Inconsistency ::=
  VarDef(tensor)[device=cpu:*] -> v_cpu
  VarDef(tensor)[device=cuda:*] -> v_gpu
  OracleCheck(ValueCorrectness)(condition=Compare(v_cpu, v_gpu)) -> FAIL

JIT_Eager_Mismatch ::=
  APICall(api)[mode=eager] -> v1
  APICall(api)[mode=(jit_trace|jit_script)] -> v2
  OracleCheck(ValueCorrectness)(condition=Compare(v1, v2)) -> FAIL

Compile_Eager_Mismatch ::=
  APICall(api)[mode=eager] -> v1
  APICall(api)[mode=compile(fx|dynamo)] -> v2
  OracleCheck(ValueCorrectness)(condition=Compare(v1, v2)) -> FAIL

Functional_Defect ::=
  APICall(api) -> v5
  OracleCheck(ValueCorrectness)(condition=MatchValue(v5, expected),
    criteria=[dtype, shape, numerical]) -> MISMATCH

Execution_Crash ::=
  APICall(api)[mode=*] -> fault
  OracleCheck(ExceptionType)(condition=FaultType(fault) in
    {FloatingPointException, SegFault, Aborted}) -> TRIGGERED

Precision_Degradation ::=
  APICall(api) -> v
  OracleCheck(ValueCorrectness)(condition=Compare(v, expected),
    tolerance={abs: 1e-4, rel: 1e-5}) -> FAIL

Security_Risk ::=
  (VarDef | APICall | ControlBlock)[security_sensitive=true]
  OracleCheck(SecurityViolation)(condition=SecurityPolicyCheck(
    violation_type=(CodeInjection | ...), severity=(high|medium|low)),
    capture_tensors=[security_relevant_vars ...]) -> VIOLATION_DETECTED
"""
