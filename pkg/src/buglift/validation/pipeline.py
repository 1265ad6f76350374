"""Staged self-validation of bug-found candidates.

Stage order for marker-detected candidates: bug-type classification, then
real-mismatch (mismatch types) or same-bug-pattern (everything else), then
oracle soundness under the reverse hypothesis, then criteria-based judgment
(issue suitability, criteria extraction, three-turn debate). Signal-detected
crashes skip the LLM entirely: the deterministic structural matcher
classifies them.

Every boolean check runs ``repeats`` epochs and passes only if every epoch
passes; one failed epoch fails the check. Stages short-circuit: nothing
after the first failed stage is executed. Suitability and criteria depend
only on the original issue and are cached per issue.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Protocol, Sequence

from buglift import templates
from buglift.corpus import IssueRecord
from buglift.gateway import GatewayError, LlmGateway, LlmRequest, Mode
from buglift.harness import ExecutionResult
from buglift.patterns import ContextAwareBugPattern, render_comments
from buglift.validation.ir import (
    IR_CATALOG_TEXT,
    MISMATCH_TYPES,
    IrBugType,
    facts_from_execution,
    match_ir,
)

STAGE_CRASH_CLASSIFICATION = "crash_classification"
STAGE_SAME_BUG_TYPE = "same_bug_type"
STAGE_REAL_MISMATCH = "real_mismatch"
STAGE_SAME_BUG_PATTERN = "same_bug_pattern"
STAGE_ORACLE_CORRECTNESS = "oracle_correctness"
STAGE_SUITABILITY = (
    "suitability_api_bug",
    "suitability_demo",
    "suitability_feedback",
    "suitability_complexity",
)
STAGE_CRITERIA_EXTRACTION = "criteria_extraction"
STAGE_CRITERIA_JUDGMENT = "criteria_judgment"

UNVERIFIABLE_REASON = "unverifiable: bug determination criteria unavailable"


class StageParseError(Exception):
    pass


def vote(epoch_results: Sequence[bool]) -> bool:
    """Conjunction over repeated checks: any failing epoch fails the vote."""
    if not epoch_results:
        raise ValueError("vote requires at least one epoch result")
    return all(epoch_results)


@dataclass(frozen=True)
class ValidationConfig:
    repeats: int = 3
    mode: Mode = "replay"


@dataclass(frozen=True)
class StageResult:
    stage: str
    epochs: tuple[bool, ...]
    passed: bool


@dataclass(frozen=True)
class TranscriptEntry:
    stage: str
    epoch: int
    template_id: str
    response_sha256: str


@dataclass(frozen=True)
class ValidationVerdict:
    stage_results: tuple[StageResult, ...]
    final: bool
    failure_stage: str | None
    reason: str
    incomplete: bool = False
    original_type: str | None = None
    transferred_type: str | None = None
    transcripts: tuple[TranscriptEntry, ...] = ()

    def __post_init__(self) -> None:
        executed_and = all(s.passed for s in self.stage_results)
        if not self.incomplete and self.final != executed_and:
            raise ValueError("final verdict must equal the AND of executed stages")


@dataclass(frozen=True)
class BugCriteria:
    issue_ref: tuple[str, int]
    api_level_relevance: bool
    has_demo: bool
    developer_negative_feedback_absent: bool
    complexity_acceptable: bool
    criteria_text: str = ""

    def __post_init__(self) -> None:
        if self.criteria_text and not self.all_suitable:
            raise ValueError("criteria_text present for an unsuitable issue")

    @property
    def all_suitable(self) -> bool:
        return (
            self.api_level_relevance
            and self.has_demo
            and self.developer_negative_feedback_absent
            and self.complexity_acceptable
        )


@dataclass(frozen=True)
class CaseView:
    """Everything the prompts need to know about one side of a transfer."""

    api: str
    program: str
    trace_text: str
    context: str = ""
    oracle: str = ""


class TransferredCase(Protocol):
    """Structural view of a transferred test (defined by the fuzz engine)."""

    target_api: str
    program_source: str
    adapted_context: str
    adapted_oracle: str


def render_trace(execution: ExecutionResult | None, stdout_cap: int = 2000) -> str:
    if execution is None:
        return "(no execution log available)"
    lines = [f"status: {execution.status}"]
    if execution.signal_name:
        lines.append(f"terminated by signal: {execution.signal_name}")
    for entry in execution.trace:
        lines.append(f"[{entry.site_kind}] {entry.expression_text} = {entry.value_repr}")
    stdout = execution.stdout.strip()
    if stdout:
        if len(stdout) > stdout_cap:
            stdout = stdout[:stdout_cap] + "...(truncated)"
        lines.append("stdout:")
        lines.extend("  " + line for line in stdout.splitlines())
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Response parsing
# ---------------------------------------------------------------------------


def _parse_token_line(text: str, token: str) -> str:
    match = re.search(rf"^{token}:\s*(.+?)\s*$", text, re.MULTILINE | re.IGNORECASE)
    if not match:
        raise StageParseError(f"answer lacks a {token} line")
    return match.group(1)


def _parse_yes_no(text: str, token: str) -> bool:
    value = _parse_token_line(text, token).lower()
    if value.startswith("yes"):
        return True
    if value.startswith("no"):
        return False
    raise StageParseError(f"{token} value {value!r} is not yes/no")


def _parse_verdict_word(text: str, token: str) -> bool:
    value = _parse_token_line(text, token).lower().strip(".")
    if "real_bug" in value or value == "real bug":
        return True
    if "false_positive" in value or value == "false positive":
        return False
    raise StageParseError(f"{token} value {value!r} is not real_bug/false_positive")


# ---------------------------------------------------------------------------
# Validator
# ---------------------------------------------------------------------------


@dataclass
class _ClassificationOutcome:
    original_type: IrBugType | None
    transferred_type: IrBugType | None
    epochs: tuple[bool, ...]
    passed: bool


class Validator:
    """Runs the staged pipeline against one gateway/cassette."""

    def __init__(
        self,
        gateway: LlmGateway,
        config: ValidationConfig | None = None,
        issues: Mapping[tuple[str, int], IssueRecord] | None = None,
        original_executions: Mapping[tuple[str, int], ExecutionResult] | None = None,
    ) -> None:
        self.gateway = gateway
        self.config = config or ValidationConfig()
        self.issues = dict(issues or {})
        self.original_executions = dict(original_executions or {})
        self._suitability_cache: dict[tuple[str, int], list[StageResult]] = {}
        self._criteria_cache: dict[tuple[str, int], BugCriteria] = {}
        self._transcripts: list[TranscriptEntry] = []

    # -- prompting ------------------------------------------------------------

    def _ask(
        self, stage: str, template_id: str, fields: dict[str, str], epoch: int, suffix: str = ""
    ) -> str:
        template = templates.get_template(template_id)
        prompt = template.render(**fields) + suffix
        request = LlmRequest(
            template_id=template_id,
            rendered_prompt=prompt,
            model_id=self.gateway.settings.model_for(template.component),
            temperature=self.gateway.settings.temperature_for(template.component),
            max_tokens=self.gateway.settings.max_tokens,
        )
        response = self.gateway.complete(request, self.config.mode, epoch=epoch)
        self._transcripts.append(
            TranscriptEntry(
                stage=stage,
                epoch=epoch,
                template_id=template_id,
                response_sha256=hashlib.sha256(response.text.encode("utf-8")).hexdigest(),
            )
        )
        return response.text

    def _voted_check(
        self,
        stage: str,
        template_id: str,
        fields: dict[str, str],
        parse,
    ) -> StageResult:
        epochs = tuple(
            parse(self._ask(stage, template_id, fields, epoch))
            for epoch in range(self.config.repeats)
        )
        return StageResult(stage=stage, epochs=epochs, passed=vote(epochs))

    # -- stages ---------------------------------------------------------------

    def classify_ir_type(
        self, original: CaseView, transferred: CaseView
    ) -> _ClassificationOutcome:
        fields = {
            "ir_catalog": IR_CATALOG_TEXT,
            "original_api": original.api,
            "original_program": original.program,
            "original_trace": original.trace_text,
            "transferred_api": transferred.api,
            "transferred_program": transferred.program,
            "transferred_trace": transferred.trace_text,
        }
        first_original: IrBugType | None = None
        first_transferred: IrBugType | None = None
        epochs: list[bool] = []
        for epoch in range(self.config.repeats):
            parsed = self._classify_once(fields, epoch)
            if parsed is None:
                epochs.append(False)
                continue
            orig_type, trans_type, same = parsed
            if first_original is None:
                first_original, first_transferred = orig_type, trans_type
            epochs.append(same)
        return _ClassificationOutcome(
            original_type=first_original,
            transferred_type=first_transferred,
            epochs=tuple(epochs),
            passed=vote(epochs),
        )

    def _classify_once(
        self, fields: dict[str, str], epoch: int
    ) -> tuple[IrBugType, IrBugType, bool] | None:
        suffix = ""
        for _ in range(2):  # one repair re-ask for labels outside the set
            text = self._ask(STAGE_SAME_BUG_TYPE, "same_bug_type", fields, epoch, suffix)
            try:
                orig = IrBugType.parse(_parse_token_line(text, "ORIGINAL_TYPE"))
                trans = IrBugType.parse(_parse_token_line(text, "TRANSFERRED_TYPE"))
                same = _parse_yes_no(text, "SAME_TYPE")
                return orig, trans, same
            except (StageParseError, ValueError):
                suffix = (
                    "\n\nYour previous answer used a label outside the catalog or "
                    "an invalid layout. Answer again with the three required lines, "
                    "using only catalog type names."
                )
        return None

    def check_real_mismatch(self, transferred: CaseView) -> StageResult:
        return self._voted_check(
            STAGE_REAL_MISMATCH,
            "real_mismatch",
            {
                "transferred_api": transferred.api,
                "transferred_program": transferred.program,
                "transferred_trace": transferred.trace_text,
            },
            lambda text: _parse_yes_no(text, "REAL_MISMATCH"),
        )

    def check_same_bug_pattern(
        self, original: CaseView, transferred: CaseView
    ) -> StageResult:
        return self._voted_check(
            STAGE_SAME_BUG_PATTERN,
            "same_bug_pattern",
            {
                "original_api": original.api,
                "original_context": original.context,
                "original_oracle": original.oracle,
                "original_program": original.program,
                "original_trace": original.trace_text,
                "transferred_api": transferred.api,
                "transferred_context": transferred.context,
                "transferred_oracle": transferred.oracle,
                "transferred_program": transferred.program,
                "transferred_trace": transferred.trace_text,
            },
            lambda text: _parse_yes_no(text, "SAME_PATTERN"),
        )

    def check_oracle_correctness(self, transferred: CaseView) -> StageResult:
        return self._voted_check(
            STAGE_ORACLE_CORRECTNESS,
            "oracle_soundness",
            {
                "transferred_api": transferred.api,
                "transferred_oracle": transferred.oracle,
                "transferred_program": transferred.program,
                "transferred_trace": transferred.trace_text,
            },
            lambda text: _parse_yes_no(text, "ORACLE_VALID"),
        )

    def assess_issue_suitability(self, issue: IssueRecord) -> list[StageResult]:
        key = (issue.repo, issue.number)
        cached = self._suitability_cache.get(key)
        if cached is not None:
            return cached
        body_fields = {
            "repo": issue.repo,
            "issue_number": str(issue.number),
            "issue_title": issue.title,
            "issue_body": issue.body,
        }
        comment_fields = {
            "repo": issue.repo,
            "issue_number": str(issue.number),
            "issue_title": issue.title,
            "issue_comments": render_comments(issue),
        }
        checks = [
            (STAGE_SUITABILITY[0], "issue_check_api_bug", body_fields),
            (STAGE_SUITABILITY[1], "issue_check_demo", body_fields),
            (STAGE_SUITABILITY[2], "issue_check_feedback", comment_fields),
            (STAGE_SUITABILITY[3], "issue_check_complexity", body_fields),
        ]
        results = [
            self._voted_check(stage, template_id, fields, lambda t: _parse_yes_no(t, "ANSWER"))
            for stage, template_id, fields in checks
        ]
        self._suitability_cache[key] = results
        return results

    def extract_criteria(self, issue: IssueRecord, flags: Sequence[StageResult]) -> BugCriteria:
        key = (issue.repo, issue.number)
        cached = self._criteria_cache.get(key)
        if cached is not None:
            return cached
        fields = {
            "repo": issue.repo,
            "issue_number": str(issue.number),
            "issue_title": issue.title,
            "issue_body": issue.body,
            "issue_comments": render_comments(issue),
        }
        text = ""
        for attempt in range(self.config.repeats):
            answer = self._ask(STAGE_CRITERIA_EXTRACTION, "criteria_extraction", fields, attempt)
            match = re.search(r"CRITERIA:\s*(.+)", answer, re.DOTALL | re.IGNORECASE)
            if match and match.group(1).strip():
                text = match.group(1).strip()
                break
        if not text:
            raise StageParseError("empty criteria extraction")
        criteria = BugCriteria(
            issue_ref=key,
            api_level_relevance=flags[0].passed,
            has_demo=flags[1].passed,
            developer_negative_feedback_absent=flags[2].passed,
            complexity_acceptable=flags[3].passed,
            criteria_text=text,
        )
        self._criteria_cache[key] = criteria
        return criteria

    def judge_with_debate(self, criteria: BugCriteria, transferred: CaseView) -> StageResult:
        epochs: list[bool] = []
        for epoch in range(self.config.repeats):
            judgment = self._ask(
                STAGE_CRITERIA_JUDGMENT,
                "criteria_judgment",
                {
                    "criteria_text": criteria.criteria_text,
                    "transferred_api": transferred.api,
                    "transferred_program": transferred.program,
                    "transferred_trace": transferred.trace_text,
                },
                epoch,
            )
            challenge = self._ask(
                STAGE_CRITERIA_JUDGMENT,
                "debate_challenge",
                {
                    "initial_judgment": judgment,
                    "transferred_trace": transferred.trace_text,
                },
                epoch,
            )
            summary = self._ask(
                STAGE_CRITERIA_JUDGMENT,
                "debate_summary",
                {"initial_judgment": judgment, "challenge": challenge},
                epoch,
            )
            epochs.append(_parse_verdict_word(summary, "FINAL_VERDICT"))
        return StageResult(
            stage=STAGE_CRITERIA_JUDGMENT, epochs=tuple(epochs), passed=vote(epochs)
        )

    # -- pipeline -------------------------------------------------------------

    def validate_candidate(
        self,
        original_issue: IssueRecord,
        pattern: ContextAwareBugPattern,
        transferred: TransferredCase,
        execution: ExecutionResult,
        original_execution: ExecutionResult | None = None,
    ) -> ValidationVerdict:
        self._transcripts = []

        # Signal-detected crashes have a general oracle; the deterministic
        # structural matcher settles them without an LLM round-trip.
        if execution.status == "crash":
            facts = facts_from_execution(execution, transferred.target_api)
            ok = match_ir(facts, IrBugType.EXECUTION_CRASH)
            stage = StageResult(STAGE_CRASH_CLASSIFICATION, (ok,), ok)
            return ValidationVerdict(
                stage_results=(stage,),
                final=ok,
                failure_stage=None if ok else STAGE_CRASH_CLASSIFICATION,
                reason=(
                    "signal-detected crash confirmed by structural classification"
                    if ok
                    else f"signal {execution.signal_name} outside the crash fault set"
                ),
                original_type=IrBugType.EXECUTION_CRASH.value,
                transferred_type=IrBugType.EXECUTION_CRASH.value,
                transcripts=tuple(self._transcripts),
            )

        original = CaseView(
            api=pattern.bug_api,
            program=pattern.repro_program,
            trace_text=render_trace(original_execution),
            context=pattern.triggering_context,
            oracle=pattern.oracle_design,
        )
        candidate = CaseView(
            api=transferred.target_api,
            program=transferred.program_source,
            trace_text=render_trace(execution),
            context=transferred.adapted_context,
            oracle=transferred.adapted_oracle,
        )

        stages: list[StageResult] = []
        current_stage = STAGE_SAME_BUG_TYPE
        classification: _ClassificationOutcome | None = None
        try:
            classification = self.classify_ir_type(original, candidate)
            stages.append(
                StageResult(
                    STAGE_SAME_BUG_TYPE, classification.epochs, classification.passed
                )
            )
            if not classification.passed:
                return self._failed(stages, STAGE_SAME_BUG_TYPE, classification)

            if classification.transferred_type in MISMATCH_TYPES:
                current_stage = STAGE_REAL_MISMATCH
                stages.append(self.check_real_mismatch(candidate))
            else:
                current_stage = STAGE_SAME_BUG_PATTERN
                stages.append(self.check_same_bug_pattern(original, candidate))
            if not stages[-1].passed:
                return self._failed(stages, stages[-1].stage, classification)

            current_stage = STAGE_ORACLE_CORRECTNESS
            stages.append(self.check_oracle_correctness(candidate))
            if not stages[-1].passed:
                return self._failed(stages, STAGE_ORACLE_CORRECTNESS, classification)

            current_stage = "suitability"
            suitability = self.assess_issue_suitability(original_issue)
            for result in suitability:
                stages.append(result)
                if not result.passed:
                    return self._failed(
                        stages, result.stage, classification, reason=UNVERIFIABLE_REASON
                    )

            current_stage = STAGE_CRITERIA_EXTRACTION
            criteria = self.extract_criteria(original_issue, suitability)
            stages.append(StageResult(STAGE_CRITERIA_EXTRACTION, (True,), True))

            current_stage = STAGE_CRITERIA_JUDGMENT
            stages.append(self.judge_with_debate(criteria, candidate))
            if not stages[-1].passed:
                return self._failed(stages, STAGE_CRITERIA_JUDGMENT, classification)
        except (GatewayError, StageParseError) as exc:
            return ValidationVerdict(
                stage_results=tuple(stages),
                final=False,
                failure_stage=current_stage,
                reason=f"incomplete at {current_stage}: {exc}",
                incomplete=True,
                original_type=(
                    classification.original_type.value
                    if classification and classification.original_type
                    else None
                ),
                transferred_type=(
                    classification.transferred_type.value
                    if classification and classification.transferred_type
                    else None
                ),
                transcripts=tuple(self._transcripts),
            )

        return ValidationVerdict(
            stage_results=tuple(stages),
            final=True,
            failure_stage=None,
            reason="all validation stages passed",
            original_type=(
                classification.original_type.value if classification.original_type else None
            ),
            transferred_type=(
                classification.transferred_type.value
                if classification.transferred_type
                else None
            ),
            transcripts=tuple(self._transcripts),
        )

    def _failed(
        self,
        stages: list[StageResult],
        failure_stage: str,
        classification: _ClassificationOutcome | None,
        reason: str | None = None,
    ) -> ValidationVerdict:
        return ValidationVerdict(
            stage_results=tuple(stages),
            final=False,
            failure_stage=failure_stage,
            reason=reason or f"stage {failure_stage} failed its vote",
            original_type=(
                classification.original_type.value
                if classification and classification.original_type
                else None
            ),
            transferred_type=(
                classification.transferred_type.value
                if classification and classification.transferred_type
                else None
            ),
            transcripts=tuple(self._transcripts),
        )

    # -- campaign protocol ----------------------------------------------------

    def validate(
        self,
        pattern: ContextAwareBugPattern,
        transferred: TransferredCase,
        execution: ExecutionResult,
    ) -> ValidationVerdict:
        issue = self.issues.get(pattern.source_issue)
        if issue is None:
            issue = IssueRecord(
                repo=pattern.source_issue[0],
                number=pattern.source_issue[1],
                title="(issue record unavailable)",
                body="",
            )
        return self.validate_candidate(
            issue,
            pattern,
            transferred,
            execution,
            original_execution=self.original_executions.get(pattern.source_issue),
        )


# ---------------------------------------------------------------------------
# Verdict persistence (verdicts.jsonl with per-epoch transcripts)
# ---------------------------------------------------------------------------


def verdict_to_json(verdict: ValidationVerdict) -> dict:
    return {
        "final": verdict.final,
        "failure_stage": verdict.failure_stage,
        "reason": verdict.reason,
        "incomplete": verdict.incomplete,
        "original_type": verdict.original_type,
        "transferred_type": verdict.transferred_type,
        "stages": [
            {"stage": s.stage, "epochs": list(s.epochs), "passed": s.passed}
            for s in verdict.stage_results
        ],
        "transcripts": [
            {
                "stage": t.stage,
                "epoch": t.epoch,
                "template_id": t.template_id,
                "response_sha256": t.response_sha256,
            }
            for t in verdict.transcripts
        ],
    }


def verdict_from_json(raw: dict) -> ValidationVerdict:
    return ValidationVerdict(
        stage_results=tuple(
            StageResult(s["stage"], tuple(bool(e) for e in s["epochs"]), s["passed"])
            for s in raw["stages"]
        ),
        final=raw["final"],
        failure_stage=raw.get("failure_stage"),
        reason=raw.get("reason", ""),
        incomplete=raw.get("incomplete", False),
        original_type=raw.get("original_type"),
        transferred_type=raw.get("transferred_type"),
        transcripts=tuple(
            TranscriptEntry(t["stage"], t["epoch"], t["template_id"], t["response_sha256"])
            for t in raw.get("transcripts", [])
        ),
    )


def save_verdicts(verdicts: Sequence[tuple[str, ValidationVerdict]], path: Path | str) -> Path:
    """Persist (target_api, verdict) rows for audit."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for target_api, verdict in verdicts:
            row = {"target_api": target_api, **verdict_to_json(verdict)}
            handle.write(json.dumps(row, ensure_ascii=False) + "\n")
    return path


def load_verdicts(path: Path | str) -> list[tuple[str, ValidationVerdict]]:
    rows = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            rows.append((raw["target_api"], verdict_from_json(raw)))
    return rows
