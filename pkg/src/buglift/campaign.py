"""Feedback-driven bug-transfer fuzzing.

One campaign transfers a single bug pattern across the similar-API queue.
Each round tests the top window of untested queue entries; every validated
discovery enqueues its own most-similar APIs for the next round, so
selection adapts to where bugs are actually being found. The loop runs at
least once and continues while the previous round produced validated
findings, with hard stops on queue exhaustion, the per-pattern test cap,
and the cost budget.

The ordered tested-API trace is a deterministic function of (pattern,
catalog, cassettes, config): batches preserve queue rank order, expansion
order follows discovery order, and results are applied in submission order.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Protocol

from buglift.gateway import BudgetExceededError, LlmGateway, Mode
from buglift.harness import ExecutionResult, Harness, InstrumentationError
from buglift.matching import ApiRecord, SimilarApiQueue
from buglift.patterns import (
    ContextAwareBugPattern,
    parse_fenced_fields,
    pattern_from_json,
    pattern_to_json,
    PatternParseError,
)
from buglift.validation.pipeline import (
    ValidationVerdict,
    verdict_from_json,
    verdict_to_json,
)

LOGGER = logging.getLogger("buglift.campaign")

SNAPSHOT_VERSION = "buglift-campaign-v1"
TRANSFER_FIELDS = ("RATIONALE", "ADAPTED_CONTEXT", "ADAPTED_ORACLE", "TEST_PROGRAM")
MAX_TRANSFER_ASKS = 3

OUTCOME_CLEAN = "clean"
OUTCOME_GENERATION_FAILED = "generation-failed"
OUTCOME_REJECTED = "rejected"
OUTCOME_FINDING = "finding"


class CampaignError(Exception):
    pass


class TransferError(CampaignError):
    """Test synthesis for a target failed after the allowed re-asks."""


class SnapshotError(CampaignError):
    """Snapshot missing, incompatible, or inconsistent."""


@dataclass(frozen=True)
class TransferredTest:
    source_issue: tuple[str, int]
    target_api: str
    program_source: str
    adapted_context: str
    adapted_oracle: str
    rationale: str

    def __post_init__(self) -> None:
        if not self.program_source.strip():
            raise ValueError("program_source must be non-empty")


@dataclass(frozen=True)
class CampaignConfig:
    window_size: int = 10
    queue_depth: int = 1000
    expansion_count: int = 10
    repeats: int = 3
    timeout_seconds: float = 30.0
    max_tests_per_pattern: int = 200
    budget_units: float | None = None
    mode: Mode = "replay"
    parallelism: int = 1

    def __post_init__(self) -> None:
        for name in ("window_size", "queue_depth", "expansion_count", "repeats",
                     "max_tests_per_pattern", "parallelism"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.timeout_seconds <= 0:
            raise ValueError("timeout_seconds must be positive")
        if self.window_size > self.queue_depth:
            raise ValueError("window_size must not exceed queue_depth")


@dataclass(frozen=True)
class Finding:
    target_api: str
    source_issue: tuple[str, int]
    bug_category: str
    test: TransferredTest
    execution: ExecutionResult
    verdict: ValidationVerdict


@dataclass
class CampaignState:
    pattern: ContextAwareBugPattern
    api_queue: SimilarApiQueue
    tested: set[str] = field(default_factory=set)
    trace: list[str] = field(default_factory=list)
    # Ordered and deduplicated; a raw set would make expansion order depend
    # on string hashing and break trace reproducibility across processes.
    found_new_bug_api: list[str] = field(default_factory=list)
    findings: list[Finding] = field(default_factory=list)
    outcomes: list[tuple[str, str]] = field(default_factory=list)
    round: int = 0
    init: bool = True
    tests_generated: int = 0
    round_batch_sizes: list[int] = field(default_factory=list)
    halt_reason: str = ""
    warnings: list[str] = field(default_factory=list)


class MatcherPort(Protocol):
    """What the campaign needs from the API matcher."""

    def has_embedding(self, api: str) -> bool: ...

    def record_for(self, api: str) -> ApiRecord: ...

    def queue_for(self, api: str, k: int) -> SimilarApiQueue: ...


class ValidatorPort(Protocol):
    def validate(
        self,
        pattern: ContextAwareBugPattern,
        transferred: TransferredTest,
        execution: ExecutionResult,
    ) -> ValidationVerdict: ...


# ---------------------------------------------------------------------------
# Bug transfer
# ---------------------------------------------------------------------------


def transfer_bug(
    pattern: ContextAwareBugPattern,
    target: ApiRecord,
    gateway: LlmGateway,
    mode: Mode = "replay",
) -> TransferredTest:
    """Synthesize a test for the target API by adapting the pattern's
    trigger and oracle; the response is a fenced, field-labeled block."""
    if target.qualified_name == pattern.bug_api:
        raise ValueError("transferring a bug onto its own source API is vacuous")
    response = gateway.complete_template(
        "bug_transfer",
        {
            "bug_api": pattern.bug_api,
            "triggering_context": pattern.triggering_context,
            "oracle_design": pattern.oracle_design,
            "expected_behavior": pattern.expected_behavior,
            "actual_behavior": pattern.actual_behavior,
            "repro_program": pattern.repro_program,
            "target_api": target.qualified_name,
            "target_module": target.module_path,
            "target_signature": target.signature_text(),
            "target_doc": target.doc_text or "(no documentation)",
        },
        mode=mode,
    )
    answer = response.text
    last_error: Exception | None = None
    for _ in range(MAX_TRANSFER_ASKS + 1):
        try:
            values = parse_fenced_fields(answer, TRANSFER_FIELDS, tail_field="TEST_PROGRAM")
            return TransferredTest(
                source_issue=pattern.source_issue,
                target_api=target.qualified_name,
                program_source=values["TEST_PROGRAM"],
                adapted_context=values["ADAPTED_CONTEXT"],
                adapted_oracle=values["ADAPTED_ORACLE"],
                rationale=values["RATIONALE"],
            )
        except PatternParseError as exc:
            last_error = exc
        answer = gateway.complete_template(
            "transfer_repair",
            {"parse_error": str(last_error), "previous_answer": answer},
            mode=mode,
        ).text
    raise TransferError(
        f"unparseable transfer for {target.qualified_name} "
        f"after {MAX_TRANSFER_ASKS} repair asks: {last_error}"
    )


# ---------------------------------------------------------------------------
# Batch selection
# ---------------------------------------------------------------------------


def next_batch(
    state: CampaignState, config: CampaignConfig, matcher: MatcherPort
) -> list[str]:
    """Top-window untested queue entries plus expansions of every API in the
    found set (drained here); duplicates and tested APIs removed."""
    batch: list[str] = [
        api
        for api, _ in state.api_queue.entries
        if api not in state.tested
    ][: config.window_size]

    for found_api in state.found_new_bug_api:
        if not matcher.has_embedding(found_api):
            state.warnings.append(f"no embedding for found API {found_api}; not expanded")
            continue
        sims = matcher.queue_for(found_api, config.expansion_count + 1)
        expansion = [api for api in sims.names() if api != found_api]
        expansion = expansion[: config.expansion_count]
        for api in expansion:
            if api not in state.tested and api not in batch:
                batch.append(api)
    state.found_new_bug_api.clear()
    return batch


# ---------------------------------------------------------------------------
# Result application
# ---------------------------------------------------------------------------


def record_finding(
    state: CampaignState,
    test: TransferredTest,
    execution: ExecutionResult,
    verdict: ValidationVerdict | None,
) -> CampaignState:
    """Apply one test result: the target always joins the tested set; a
    finding is appended only when the bug signal fired and self-validation
    passed. Signal-level crashes count as a bug signal alongside the
    marker."""
    target = test.target_api
    state.tested.add(target)
    state.trace.append(target)
    bug_signalled = execution.bug_found or execution.status == "crash"
    if bug_signalled and verdict is not None and verdict.final:
        state.findings.append(
            Finding(
                target_api=target,
                source_issue=test.source_issue,
                bug_category=(
                    "Crash" if execution.status == "crash" else state.pattern.bug_category
                ),
                test=test,
                execution=execution,
                verdict=verdict,
            )
        )
        if target not in state.found_new_bug_api:
            state.found_new_bug_api.append(target)
        state.outcomes.append((target, OUTCOME_FINDING))
    elif bug_signalled:
        state.outcomes.append((target, OUTCOME_REJECTED))
    else:
        state.outcomes.append((target, OUTCOME_CLEAN))
    return state


def _mark_generation_failed(state: CampaignState, target: str) -> None:
    # Counting failures as tested prevents infinite retries on bad targets.
    state.tested.add(target)
    state.trace.append(target)
    state.outcomes.append((target, OUTCOME_GENERATION_FAILED))


# ---------------------------------------------------------------------------
# Campaign loop
# ---------------------------------------------------------------------------


def run_campaign(
    pattern: ContextAwareBugPattern,
    matcher: MatcherPort,
    gateway: LlmGateway,
    harness: Harness,
    validator: ValidatorPort,
    config: CampaignConfig | None = None,
    out_dir: Path | str | None = None,
    state: CampaignState | None = None,
) -> CampaignState:
    """Execute the feedback-driven loop for one pattern; returns final state.

    Passing a previously snapshotted ``state`` resumes the campaign with
    tested/found sets intact.
    """
    config = config or CampaignConfig()
    out_path = Path(out_dir) if out_dir is not None else None

    if config.budget_units is not None:
        gateway.settings.budget_units = Fraction(str(config.budget_units))

    if state is None:
        if not matcher.has_embedding(pattern.bug_api):
            skipped = CampaignState(
                pattern=pattern,
                api_queue=SimilarApiQueue(pattern.bug_api, (), capacity=config.queue_depth),
                halt_reason="skipped",
            )
            skipped.warnings.append(
                f"bug API {pattern.bug_api} has no embedding; campaign skipped"
            )
            LOGGER.warning("%s", skipped.warnings[-1])
            return skipped
        state = CampaignState(
            pattern=pattern,
            api_queue=matcher.queue_for(pattern.bug_api, config.queue_depth),
            # The anchor is never a fuzz target: transferring a bug onto its
            # own source API is vacuous.
            tested={pattern.bug_api},
        )

    try:
        while state.init or state.found_new_bug_api:
            # Check the cap before building a batch: next_batch drains the
            # found set, which must survive in the snapshot when we halt here.
            remaining = config.max_tests_per_pattern - state.tests_generated
            if remaining <= 0:
                state.halt_reason = "max_tests"
                break
            batch = next_batch(state, config, matcher)
            if len(batch) > remaining:
                batch = batch[:remaining]
            if not batch:
                state.halt_reason = "queue_exhausted"
                break
            state.round += 1
            state.round_batch_sizes.append(len(batch))
            for target, prepared in _prepare_batch(state, batch, matcher, gateway, harness, config):
                _apply_one_result(
                    state, target, prepared, harness, validator, config, out_path
                )
            state.init = False
            if out_path is not None:
                save_snapshot(state, config, out_path / "snapshot.json")
    except BudgetExceededError as exc:
        state.halt_reason = "budget"
        state.warnings.append(f"halted on budget: {exc}")
        LOGGER.warning("campaign halted on budget: %s", exc)
    if not state.halt_reason:
        state.halt_reason = "completed"
    if out_path is not None:
        save_snapshot(state, config, out_path / "snapshot.json")
    return state


def _generate_and_execute(
    pattern: ContextAwareBugPattern,
    target: str,
    matcher: MatcherPort,
    gateway: LlmGateway,
    harness: Harness,
    config: CampaignConfig,
) -> tuple[TransferredTest, ExecutionResult] | Exception:
    try:
        test = transfer_bug(pattern, matcher.record_for(target), gateway, config.mode)
        instrumented = harness.instrument(test.program_source)
        return test, harness.execute(instrumented, config.timeout_seconds)
    except (TransferError, InstrumentationError, BudgetExceededError) as exc:
        return exc


def _prepare_batch(
    state: CampaignState,
    batch: list[str],
    matcher: MatcherPort,
    gateway: LlmGateway,
    harness: Harness,
    config: CampaignConfig,
):
    """Generate and execute the batch, possibly concurrently; yield results
    in submission order so traces stay reproducible."""
    if config.parallelism <= 1:
        for target in batch:
            yield target, _generate_and_execute(
                state.pattern, target, matcher, gateway, harness, config
            )
        return
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=config.parallelism) as pool:
        futures = [
            pool.submit(
                _generate_and_execute, state.pattern, target, matcher, gateway, harness, config
            )
            for target in batch
        ]
        for target, future in zip(batch, futures):
            yield target, future.result()


def _apply_one_result(
    state: CampaignState,
    target: str,
    prepared: tuple[TransferredTest, ExecutionResult] | Exception,
    harness: Harness,
    validator: ValidatorPort,
    config: CampaignConfig,
    out_path: Path | None,
) -> None:
    if isinstance(prepared, BudgetExceededError):
        raise prepared
    state.tests_generated += 1
    if isinstance(prepared, Exception):
        LOGGER.info("generation failed for %s: %s", target, prepared)
        _mark_generation_failed(state, target)
        return
    test, execution = prepared
    verdict: ValidationVerdict | None = None
    if execution.bug_found or execution.status == "crash":
        verdict = validator.validate(state.pattern, test, execution)
    record_finding(state, test, execution, verdict)
    if out_path is not None:
        _write_artifact(out_path, state, target, test, execution, verdict)
        if verdict is not None:
            _append_verdict(out_path, target, verdict)


def _append_verdict(out_path: Path, target: str, verdict: ValidationVerdict) -> None:
    # Full audit row per validated candidate, findings and rejections alike.
    out_path.mkdir(parents=True, exist_ok=True)
    row = {"target_api": target, **verdict_to_json(verdict)}
    with (out_path / "verdicts.jsonl").open("a", encoding="utf-8") as handle:
        handle.write(json.dumps(row, ensure_ascii=False) + "\n")


def _write_artifact(
    out_path: Path,
    state: CampaignState,
    target: str,
    test: TransferredTest,
    execution: ExecutionResult,
    verdict: ValidationVerdict | None,
) -> None:
    artifact_dir = out_path / "artifacts"
    artifact_dir.mkdir(parents=True, exist_ok=True)
    safe = target.replace("/", "_").replace(".", "_")
    payload = {
        "target_api": target,
        "outcome": state.outcomes[-1][1] if state.outcomes else "",
        "test": _test_to_json(test),
        "execution": execution.to_payload(),
        "verdict": verdict_to_json(verdict) if verdict is not None else None,
    }
    (artifact_dir / f"{len(state.trace):04d}_{safe}.json").write_text(
        json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# Snapshots
# ---------------------------------------------------------------------------


def _test_to_json(test: TransferredTest) -> dict:
    return {
        "source_issue": list(test.source_issue),
        "target_api": test.target_api,
        "program_source": test.program_source,
        "adapted_context": test.adapted_context,
        "adapted_oracle": test.adapted_oracle,
        "rationale": test.rationale,
    }


def _test_from_json(raw: dict) -> TransferredTest:
    return TransferredTest(
        source_issue=(raw["source_issue"][0], int(raw["source_issue"][1])),
        target_api=raw["target_api"],
        program_source=raw["program_source"],
        adapted_context=raw["adapted_context"],
        adapted_oracle=raw["adapted_oracle"],
        rationale=raw["rationale"],
    )


def _finding_to_json(finding: Finding) -> dict:
    return {
        "target_api": finding.target_api,
        "source_issue": list(finding.source_issue),
        "bug_category": finding.bug_category,
        "test": _test_to_json(finding.test),
        "execution": finding.execution.to_payload(),
        "verdict": verdict_to_json(finding.verdict),
    }


def _finding_from_json(raw: dict) -> Finding:
    return Finding(
        target_api=raw["target_api"],
        source_issue=(raw["source_issue"][0], int(raw["source_issue"][1])),
        bug_category=raw["bug_category"],
        test=_test_from_json(raw["test"]),
        execution=ExecutionResult.from_payload(raw["execution"]),
        verdict=verdict_from_json(raw["verdict"]),
    )


def _config_to_json(config: CampaignConfig) -> dict:
    return {
        "window_size": config.window_size,
        "queue_depth": config.queue_depth,
        "expansion_count": config.expansion_count,
        "repeats": config.repeats,
        "timeout_seconds": config.timeout_seconds,
        "max_tests_per_pattern": config.max_tests_per_pattern,
        "budget_units": config.budget_units,
        "mode": config.mode,
        "parallelism": config.parallelism,
    }


def config_from_json(raw: dict) -> CampaignConfig:
    return CampaignConfig(**raw)


def save_snapshot(state: CampaignState, config: CampaignConfig, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": SNAPSHOT_VERSION,
        "config": _config_to_json(config),
        "state": {
            "pattern": pattern_to_json(state.pattern),
            "api_queue": {
                "anchor_api": state.api_queue.anchor_api,
                "entries": [[api, score] for api, score in state.api_queue.entries],
                "capacity": state.api_queue.capacity,
            },
            "tested": sorted(state.tested),
            "trace": list(state.trace),
            "found_new_bug_api": list(state.found_new_bug_api),
            "findings": [_finding_to_json(f) for f in state.findings],
            "outcomes": [list(o) for o in state.outcomes],
            "round": state.round,
            "init": state.init,
            "tests_generated": state.tests_generated,
            "round_batch_sizes": list(state.round_batch_sizes),
            "halt_reason": state.halt_reason,
            "warnings": list(state.warnings),
        },
    }
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2) + "\n", encoding="utf-8")
    return path


def load_snapshot(path: Path | str) -> tuple[CampaignState, CampaignConfig]:
    path = Path(path)
    if not path.exists():
        raise SnapshotError(f"snapshot {path} does not exist")
    payload = json.loads(path.read_text(encoding="utf-8"))
    version = payload.get("version")
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(
            f"snapshot version {version!r} is incompatible with {SNAPSHOT_VERSION!r}"
        )
    raw = payload["state"]
    state = CampaignState(
        pattern=pattern_from_json(raw["pattern"]),
        api_queue=SimilarApiQueue(
            anchor_api=raw["api_queue"]["anchor_api"],
            entries=tuple((api, float(score)) for api, score in raw["api_queue"]["entries"]),
            capacity=int(raw["api_queue"]["capacity"]),
        ),
        tested=set(raw["tested"]),
        trace=list(raw["trace"]),
        found_new_bug_api=list(raw["found_new_bug_api"]),
        findings=[_finding_from_json(f) for f in raw["findings"]],
        outcomes=[tuple(o) for o in raw["outcomes"]],
        round=int(raw["round"]),
        init=bool(raw["init"]),
        tests_generated=int(raw["tests_generated"]),
        round_batch_sizes=list(raw["round_batch_sizes"]),
        halt_reason=raw.get("halt_reason", ""),
        warnings=list(raw.get("warnings", [])),
    )
    return state, config_from_json(payload["config"])


def resume_campaign(
    snapshot_path: Path | str,
    matcher: MatcherPort,
    gateway: LlmGateway,
    harness: Harness,
    validator: ValidatorPort,
    out_dir: Path | str | None = None,
    max_tests_per_pattern: int | None = None,
    budget_units: float | None = None,
) -> CampaignState:
    """Continue an interrupted campaign; only operational caps may be
    overridden on resume."""
    state, config = load_snapshot(snapshot_path)
    if max_tests_per_pattern is not None or budget_units is not None:
        config = CampaignConfig(
            window_size=config.window_size,
            queue_depth=config.queue_depth,
            expansion_count=config.expansion_count,
            repeats=config.repeats,
            timeout_seconds=config.timeout_seconds,
            max_tests_per_pattern=(
                max_tests_per_pattern
                if max_tests_per_pattern is not None
                else config.max_tests_per_pattern
            ),
            budget_units=budget_units if budget_units is not None else config.budget_units,
            mode=config.mode,
            parallelism=config.parallelism,
        )
    state.halt_reason = ""
    return run_campaign(
        state.pattern,
        matcher,
        gateway,
        harness,
        validator,
        config=config,
        out_dir=out_dir,
        state=state,
    )
