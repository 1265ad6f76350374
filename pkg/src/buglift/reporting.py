"""Finding records, deduplication, and report emission.

A finding record carries its full provenance chain (source issue, pattern's
bug API, target API) plus an oracle-kind tag for the oracle-type frequency
table. Reports are a pure function of the campaign directory contents:
corrupt snapshot files are reported per file and the rest still renders.
"""

from __future__ import annotations

import hashlib
import json
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from buglift.campaign import Finding, load_snapshot

REPORT_VERSION = 1

ORACLE_KINDS = (
    "crash_detection",
    "value_conformance",
    "error_message_analysis",
    "special_value_detection",
    "device_consistency",
    "eager_compile_consistency",
    "eager_jit_consistency",
)


@dataclass(frozen=True)
class FindingRecord:
    source_issue: tuple[str, int]
    # A set of APIs for interaction bugs; single-API findings use one entry.
    target_apis: tuple[str, ...]
    bug_category: str
    pattern_bug_api: str
    program_source: str
    verdict_final: bool
    trace_digest: str
    oracle_kind: str

    def __post_init__(self) -> None:
        if not self.verdict_final:
            raise ValueError("finding records require a passing verdict")
        if self.oracle_kind not in ORACLE_KINDS:
            raise ValueError(f"unknown oracle kind {self.oracle_kind!r}")

    @property
    def dedup_key(self) -> tuple:
        return (self.source_issue, frozenset(self.target_apis), self.bug_category)


def tag_oracle_kind(bug_category: str, adapted_oracle: str, crashed: bool) -> str:
    """Classify the oracle that detected a finding; crash and consistency
    categories have fixed kinds, the rest is keyed off the oracle text."""
    if crashed or bug_category == "Crash":
        return "crash_detection"
    if bug_category == "CPU vs GPU":
        return "device_consistency"
    if bug_category == "Eager vs Compiled":
        return "eager_compile_consistency"
    if bug_category == "Eager vs JIT":
        return "eager_jit_consistency"
    oracle = adapted_oracle.lower()
    if any(word in oracle for word in ("message", "warning", "error text", "stderr")):
        return "error_message_analysis"
    if any(word in oracle for word in ("nan", "inf", "special value")):
        return "special_value_detection"
    return "value_conformance"


def record_from_finding(finding: Finding, pattern_bug_api: str = "") -> FindingRecord:
    digest = hashlib.sha256(
        json.dumps(finding.execution.to_payload(), sort_keys=True).encode("utf-8")
    ).hexdigest()
    return FindingRecord(
        source_issue=finding.source_issue,
        target_apis=(finding.target_api,),
        bug_category=finding.bug_category,
        pattern_bug_api=pattern_bug_api,
        program_source=finding.test.program_source,
        verdict_final=finding.verdict.final,
        trace_digest=digest,
        oracle_kind=tag_oracle_kind(
            finding.bug_category,
            finding.test.adapted_oracle,
            finding.execution.status == "crash",
        ),
    )


def dedup_findings(records: Sequence[FindingRecord]) -> list[FindingRecord]:
    """Keep the first occurrence per (source issue, target API set, category)."""
    seen: set = set()
    kept = []
    for record in records:
        if record.dedup_key in seen:
            continue
        seen.add(record.dedup_key)
        kept.append(record)
    return kept


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def record_to_json(record: FindingRecord) -> dict:
    return {
        "schema_version": REPORT_VERSION,
        "source_issue": list(record.source_issue),
        "target_apis": list(record.target_apis),
        "bug_category": record.bug_category,
        "pattern_bug_api": record.pattern_bug_api,
        "program_source": record.program_source,
        "verdict_final": record.verdict_final,
        "trace_digest": record.trace_digest,
        "oracle_kind": record.oracle_kind,
    }


def record_from_json(raw: dict) -> FindingRecord:
    return FindingRecord(
        source_issue=(raw["source_issue"][0], int(raw["source_issue"][1])),
        target_apis=tuple(raw["target_apis"]),
        bug_category=raw["bug_category"],
        pattern_bug_api=raw.get("pattern_bug_api", ""),
        program_source=raw["program_source"],
        verdict_final=raw["verdict_final"],
        trace_digest=raw["trace_digest"],
        oracle_kind=raw["oracle_kind"],
    )


def save_findings(records: Sequence[FindingRecord], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record_to_json(record), ensure_ascii=False) + "\n")
    return path


def load_findings(path: Path | str) -> list[FindingRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                records.append(record_from_json(json.loads(line)))
    return records


# ---------------------------------------------------------------------------
# Report emission
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReportOutput:
    report_path: Path
    findings_path: Path
    records: tuple[FindingRecord, ...]
    errors: tuple[str, ...]


def _collect_records(campaign_dir: Path) -> tuple[list[FindingRecord], list[str], list[dict]]:
    records: list[FindingRecord] = []
    errors: list[str] = []
    summaries: list[dict] = []
    snapshots = sorted(campaign_dir.rglob("snapshot.json"))
    for snapshot_path in snapshots:
        try:
            state, _ = load_snapshot(snapshot_path)
        except Exception as exc:
            errors.append(f"{snapshot_path.relative_to(campaign_dir)}: {exc}")
            continue
        for finding in state.findings:
            records.append(record_from_finding(finding, pattern_bug_api=state.pattern.bug_api))
        summaries.append(
            {
                "pattern": state.pattern.bug_api,
                "source_issue": state.pattern.source_issue,
                "tests": state.tests_generated,
                "rounds": state.round,
                "findings": len(state.findings),
                "halt": state.halt_reason,
            }
        )
    return records, errors, summaries


def emit_report(campaign_dir: Path | str, out_dir: Path | str | None = None) -> ReportOutput:
    """Render report.md, findings.jsonl, and the oracle-kind frequency table
    from everything under a campaign directory."""
    campaign_dir = Path(campaign_dir)
    out_path = Path(out_dir) if out_dir is not None else campaign_dir
    out_path.mkdir(parents=True, exist_ok=True)

    raw_records, errors, summaries = _collect_records(campaign_dir)
    records = dedup_findings(raw_records)
    findings_path = save_findings(records, out_path / "findings.jsonl")

    category_counts = Counter(record.bug_category for record in records)
    oracle_counts = Counter(record.oracle_kind for record in records)

    lines = [
        f"# Campaign report (v{REPORT_VERSION})",
        "",
        f"Campaigns: {len(summaries)}  |  Findings after dedup: {len(records)}",
        "",
        "## Campaigns",
        "",
        "| Pattern API | Source Issue | Tests | Rounds | Findings | Halt |",
        "|---|---|---:|---:|---:|---|",
    ]
    for summary in summaries:
        repo, number = summary["source_issue"]
        lines.append(
            f"| {summary['pattern']} | {repo}#{number} | {summary['tests']} "
            f"| {summary['rounds']} | {summary['findings']} | {summary['halt']} |"
        )
    lines += [
        "",
        "## Findings by category",
        "",
        "| Bug Type | Count |",
        "|---|---:|",
    ]
    for category in sorted(category_counts):
        lines.append(f"| {category} | {category_counts[category]} |")
    if not category_counts:
        lines.append("| (none) | 0 |")
    lines += [
        "",
        "## Findings",
        "",
        "| Bug Type | Target API | Source Issue | Oracle Kind |",
        "|---|---|---|---|",
    ]
    for record in records:
        repo, number = record.source_issue
        lines.append(
            f"| {record.bug_category} | {' + '.join(record.target_apis)} "
            f"| {repo}#{number} | {record.oracle_kind} |"
        )
    lines += [
        "",
        "## Provenance chains",
        "",
    ]
    for record in records:
        repo, number = record.source_issue
        lines.append(
            f"- {repo}#{number} -> pattern {record.pattern_bug_api} -> "
            f"{' + '.join(record.target_apis)} [{record.bug_category}]"
        )
    if not records:
        lines.append("- (no findings)")
    lines += [
        "",
        "## Oracle kinds",
        "",
        "| Oracle Kind | Count |",
        "|---|---:|",
    ]
    for kind in ORACLE_KINDS:
        if oracle_counts.get(kind):
            lines.append(f"| {kind} | {oracle_counts[kind]} |")
    if not oracle_counts:
        lines.append("| (none) | 0 |")
    if errors:
        lines += ["", "## Corrupt artifacts", ""]
        lines += [f"- {error}" for error in errors]
    lines.append("")

    report_path = out_path / "report.md"
    report_path.write_text("\n".join(lines), encoding="utf-8")
    return ReportOutput(
        report_path=report_path,
        findings_path=findings_path,
        records=tuple(records),
        errors=tuple(errors),
    )
