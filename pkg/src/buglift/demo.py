"""Synthetic replay scenario: stub catalog, controlled geometry, scripted answers.

Builds a self-contained campaign fixture with no network and no real
library: a 36-API stub catalog whose embedding geometry pins the similar-API
queue order exactly, a scripted chat provider whose answers are parseable by
the real pipeline, and a scripted harness that seeds one silent bug and one
signal crash.

Embedding geometry (unit vectors, 37 dims):

* anchor ``stublib.core.probe_feature`` sits on axis u.
* queue APIs ``op_i`` = a_i * u + sqrt(1-a_i^2) * v_i with private axes v_i
  and a_i = 0.62 - 0.04 i, so the anchor queue is exactly op_01..op_25.
* ``op_03`` instead spends its residual on the shared axis w, which makes
  the expansion APIs ``ext_k`` = -0.5 u + g_k w + r_k its nearest
  neighbors: fresh targets that rank below every op in the anchor queue.

The seeded silent bug lives in op_03 (oracle marker), the seeded crash in
op_12 (SIGSEGV).
"""

from __future__ import annotations

import math
import re

from buglift.corpus import IssueRecord
from buglift.gateway import EmbeddingVector
from buglift.harness import ScriptedHarness, clean_run, crash_run
from buglift.matching import ApiMatcher, ApiRecord, EmbeddingDb
from buglift.patterns import ContextAwareBugPattern

ANCHOR_API = "stublib.core.probe_feature"
QUEUE_APIS = [f"stublib.ops.op_{i:02d}" for i in range(1, 26)]
EXPANSION_APIS = [f"stublib.ext.ext_{k:02d}" for k in range(1, 11)]
SILENT_BUG_API = QUEUE_APIS[2]  # op_03
CRASH_API = QUEUE_APIS[11]  # op_12

DEMO_ISSUE = IssueRecord(
    repo="demo/stublib",
    number=41,
    title="probe_feature raises instead of returning False without hardware",
    body=(
        "Calling stublib.core.probe_feature() on a machine without the "
        "accelerator raises RuntimeError instead of returning False. "
        "Repro:\n\n    import stublib\n    stublib.core.probe_feature()\n"
    ),
    comments=(("maintainer", "Confirmed; probes must not raise."),),
    linked_pr_numbers=(42,),
)

DEMO_PATTERN = ContextAwareBugPattern(
    source_issue=(DEMO_ISSUE.repo, DEMO_ISSUE.number),
    bug_api=ANCHOR_API,
    bug_category="Wrong Outputs",
    triggering_context="Invoke the capability probe on a host without the accelerator.",
    oracle_design="Return-value check: the probe must return False rather than raise.",
    expected_behavior="Returns False when the hardware is absent.",
    actual_behavior="Raises RuntimeError.",
    repro_program=(
        "import stublib\n"
        "try:\n"
        "    ok = stublib.core.probe_feature()\n"
        "    if ok is not False:\n"
        '        print("BUG FOUND")\n'
        "except RuntimeError:\n"
        '    print("BUG FOUND")\n'
    ),
)


def demo_catalog() -> list[ApiRecord]:
    names = [ANCHOR_API, *QUEUE_APIS, *EXPANSION_APIS]
    return [
        ApiRecord(
            qualified_name=name,
            module_path=name.rsplit(".", 1)[0],
            signature_params=(("x", "positional_or_keyword", True),),
            doc_text=f"Stub callable {name.rsplit('.', 1)[1]} for scenario testing.",
        )
        for name in names
    ]


def demo_embeddings(dim: int = 37) -> EmbeddingDb:
    db = EmbeddingDb()

    def unit(values: dict[int, float]) -> EmbeddingVector:
        vec = [0.0] * dim
        for axis, value in values.items():
            vec[axis] = value
        norm = math.sqrt(sum(v * v for v in vec))
        return EmbeddingVector.of([v / norm for v in vec], "demo-embed")

    axis_u, axis_w = 0, 1
    db.add(ANCHOR_API, unit({axis_u: 1.0}))
    for i, name in enumerate(QUEUE_APIS, start=1):
        a = 0.62 - 0.04 * i
        residual = math.sqrt(1.0 - a * a)
        if name == SILENT_BUG_API:
            db.add(name, unit({axis_u: a, axis_w: residual}))
        else:
            db.add(name, unit({axis_u: a, 1 + i: residual}))
    for k, name in enumerate(EXPANSION_APIS, start=1):
        g = 0.85 - 0.01 * (k - 1)
        residual = math.sqrt(1.0 - 0.25 - g * g)
        db.add(name, unit({axis_u: -0.5, axis_w: g, 26 + k: residual}))
    return db


def demo_matcher() -> ApiMatcher:
    return ApiMatcher(demo_catalog(), demo_embeddings())


# ---------------------------------------------------------------------------
# Scripted chat answers
# ---------------------------------------------------------------------------

# Distinctive instruction lines routing a rendered prompt back to its slot.
TEMPLATE_NEEDLES = {
    "pattern_repair": "single fenced ```pattern block",
    "transfer_repair": "single fenced ```transfer block",
    "api_analysis": "context-free functional description of this library API",
    "issue_analysis": "```pattern\nBUG_API:",
    "bug_transfer": "```transfer\nRATIONALE:",
    "same_bug_type": "ORIGINAL_TYPE: <type name>",
    "real_mismatch": "REAL_MISMATCH: <yes or no>",
    "same_bug_pattern": "SAME_PATTERN: <yes or no>",
    "oracle_soundness": "ORACLE_VALID: <yes or no>",
    "issue_check_api_bug": "bug in a specific library API",
    "issue_check_demo": "runnable reproduction code",
    "issue_check_feedback": "free of negative feedback",
    "issue_check_complexity": "complexity of the reproduction",
    "criteria_extraction": "CRITERIA: <the bug determination criteria>",
    "criteria_judgment": "JUDGMENT: <real_bug or false_positive>",
    "debate_challenge": "challenge this from the opposing viewpoint",
    "debate_summary": "FINAL_VERDICT: <real_bug or false_positive>",
}

PASSING_VALIDATION_ANSWERS = {
    "same_bug_type": (
        "ORIGINAL_TYPE: Functional_Defect\n"
        "TRANSFERRED_TYPE: Functional_Defect\n"
        "SAME_TYPE: yes\n"
    ),
    "real_mismatch": "REAL_MISMATCH: yes\n",
    "same_bug_pattern": "SAME_PATTERN: yes\n",
    "oracle_soundness": "ORACLE_VALID: yes\n",
    "issue_check_api_bug": "ANSWER: yes\n",
    "issue_check_demo": "ANSWER: yes\n",
    "issue_check_feedback": "ANSWER: yes\n",
    "issue_check_complexity": "ANSWER: yes\n",
    "criteria_extraction": (
        "CRITERIA: Capability probes must return False, never raise, when the "
        "probed hardware is absent; an exception or a non-False return on a "
        "bare host violates the probe contract.\n"
    ),
    "criteria_judgment": (
        "The execution log shows the probe raising on a bare host, which the "
        "criteria forbid.\nJUDGMENT: real_bug\n"
    ),
    "debate_challenge": (
        "Opposing view: the probe might legitimately raise when the driver "
        "stack is missing rather than the device; the oracle could be "
        "conflating configuration errors with API bugs.\n"
    ),
    "debate_summary": (
        "The challenge does not hold up: the documented contract covers the "
        "bare-host case explicitly.\nFINAL_VERDICT: real_bug\n"
    ),
}

_TARGET_RE = re.compile(r"^Target API:\s*(\S+)\s*$", re.MULTILINE)
_API_RE = re.compile(r"^API:\s*(\S+)\s*$", re.MULTILINE)


def route_template(prompt: str) -> str | None:
    for template_id, needle in TEMPLATE_NEEDLES.items():
        if needle in prompt:
            return template_id
    return None


def transfer_answer_for(target_api: str) -> str:
    short = target_api.rsplit(".", 1)[1]
    return (
        "Reasoning omitted.\n\n"
        "```transfer\n"
        f"RATIONALE: {short} performs an analogous capability probe, so the "
        "absent-hardware edge case transfers.\n"
        f"ADAPTED_CONTEXT: Call {target_api} on a host without the accelerator.\n"
        f"ADAPTED_ORACLE: {short} must return False; raising or returning "
        "anything else fires the oracle.\n"
        "TEST_PROGRAM:\n"
        "import stublib\n"
        "try:\n"
        f"    ok = {target_api}()\n"
        "    if ok is not False:\n"
        '        print("BUG FOUND")\n'
        "except RuntimeError:\n"
        '    print("BUG FOUND")\n'
        "```\n"
    )


class ScenarioChatProvider:
    """Answers every pipeline prompt in the synthetic scenario.

    Transfer prompts get a target-specific test program; validation prompts
    get the passing answers (the scenario's two seeded bugs are both real).
    """

    def __init__(self, overrides: dict[str, str] | None = None) -> None:
        self.overrides = overrides or {}
        self.calls: list[str] = []

    def complete(
        self, model_id: str, prompt: str, temperature: float, max_tokens: int
    ) -> tuple[str, int, int]:
        template_id = route_template(prompt)
        self.calls.append(template_id or "?")
        if template_id is None:
            raise AssertionError(f"unroutable prompt: {prompt[:120]}...")
        if template_id in self.overrides:
            text = self.overrides[template_id]
        elif template_id == "bug_transfer":
            match = _TARGET_RE.search(prompt)
            if match is None:
                raise AssertionError("transfer prompt lacks a Target API line")
            text = transfer_answer_for(match.group(1))
        elif template_id == "issue_analysis":
            from buglift.patterns import serialize_pattern

            text = serialize_pattern(DEMO_PATTERN)
        elif template_id == "api_analysis":
            match = _API_RE.search(prompt)
            name = match.group(1).rsplit(".", 1)[1] if match else "unknown"
            text = (
                f"Probes the {name} capability; accepts one optional argument "
                "and returns a boolean."
            )
        elif template_id in PASSING_VALIDATION_ANSWERS:
            text = PASSING_VALIDATION_ANSWERS[template_id]
        else:
            raise AssertionError(f"no scripted answer for template {template_id}")
        return text, len(prompt.split()), len(text.split())


# ---------------------------------------------------------------------------
# Scripted harness with the two seeded bugs
# ---------------------------------------------------------------------------


def build_demo_runtime(
    mode: str,
    cassette=None,
    overrides: dict[str, str] | None = None,
):
    """Gateway + matcher + harness + validator wired for the scenario."""
    from buglift.gateway import Cassette, LlmGateway
    from buglift.validation.pipeline import ValidationConfig, Validator

    gateway = LlmGateway(
        chat_provider=ScenarioChatProvider(overrides),
        cassette=cassette if cassette is not None else Cassette(),
    )
    validator = Validator(
        gateway,
        ValidationConfig(repeats=3, mode=mode),
        issues={DEMO_ISSUE.key: DEMO_ISSUE},
    )
    return gateway, demo_matcher(), demo_harness(), validator


def demo_harness() -> ScriptedHarness:
    catalog_payloads = [
        {
            "qualified_name": record.qualified_name,
            "module_path": record.module_path,
            "params": [
                {"name": n, "kind": k, "has_default": d}
                for n, k, d in record.signature_params
            ],
            "doc_text": record.doc_text,
        }
        for record in demo_catalog()
    ]
    silent_stdout = "probing...\nBUG FOUND\n"
    return ScriptedHarness(
        catalog_payloads=catalog_payloads,
        executions=[
            (lambda program: SILENT_BUG_API in program, clean_run(silent_stdout)),
            (lambda program: CRASH_API in program, crash_run("SIGSEGV")),
        ],
    )
