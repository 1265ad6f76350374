"""Context-aware bug patterns distilled from issue/PR pairs.

A pattern is the triple (bug API, triggering context, oracle design) plus
the expected/actual behavior contrast and a reproduction program. The
extraction prompt demands a fenced, field-labeled answer block; the parser
is strict, with a bounded number of repair re-asks. Free-text category
labels are normalized against a closed ten-value set; unknown labels are a
hard error, never a guess.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from buglift.corpus import IssueRecord, PullRequestRecord
from buglift.gateway import LlmGateway, Mode

# Closed category set: nine silent-bug categories plus Crash.
BUG_CATEGORIES = (
    "Eager vs Compiled",
    "Eager vs JIT",
    "CPU vs GPU",
    "Performance Degradation",
    "Wrong Save/Reload",
    "Wrong Displayed Message",
    "Wrong Gradient",
    "Wrong Outputs",
    "Functionality Not Working as Expected",
    "Crash",
)

_CATEGORY_ALIASES = {
    "eager vs compiled": "Eager vs Compiled",
    "eager vs compile": "Eager vs Compiled",
    "compiled vs eager": "Eager vs Compiled",
    "eager vs jit": "Eager vs JIT",
    "eager vs just in time": "Eager vs JIT",
    "eager vs just in time jit": "Eager vs JIT",
    "jit vs eager": "Eager vs JIT",
    "cpu vs gpu": "CPU vs GPU",
    "gpu vs cpu": "CPU vs GPU",
    "device inconsistency": "CPU vs GPU",
    "performance degradation": "Performance Degradation",
    "performance regression": "Performance Degradation",
    "wrong save reload": "Wrong Save/Reload",
    "wrong save/reload": "Wrong Save/Reload",
    "save reload": "Wrong Save/Reload",
    "wrong displayed message": "Wrong Displayed Message",
    "wrong message": "Wrong Displayed Message",
    "misleading message": "Wrong Displayed Message",
    "wrong gradient": "Wrong Gradient",
    "wrong gradients": "Wrong Gradient",
    "wrong output": "Wrong Outputs",
    "wrong outputs": "Wrong Outputs",
    "functionality not working as expected": "Functionality Not Working as Expected",
    "functionality not working": "Functionality Not Working as Expected",
    "crash": "Crash",
}

PATTERN_FIELDS = (
    "BUG_API",
    "BUG_CATEGORY",
    "TRIGGERING_CONTEXT",
    "ORACLE_DESIGN",
    "EXPECTED_BEHAVIOR",
    "ACTUAL_BEHAVIOR",
    "REPRO_PROGRAM",
)

MAX_REPAIR_ASKS = 3


class PatternError(Exception):
    pass


class UnknownCategoryError(PatternError):
    def __init__(self, label: str) -> None:
        super().__init__(f"unknown bug category label {label!r}")
        self.label = label


class PatternParseError(PatternError):
    def __init__(self, message: str, field: str | None = None) -> None:
        super().__init__(message)
        self.field = field


class PatternExtractionError(PatternError):
    """Extraction failed after the allowed repair re-asks."""


def normalize_category(label: str) -> str:
    """Map a free-text category label to the canonical ten-value set."""
    if label in BUG_CATEGORIES:
        return label
    cleaned = re.sub(r"[^a-z/ ]+", " ", label.lower().replace("-", " "))
    cleaned = " ".join(cleaned.split())
    canonical = _CATEGORY_ALIASES.get(cleaned) or _CATEGORY_ALIASES.get(
        cleaned.replace("/", " ")
    )
    if canonical is None:
        raise UnknownCategoryError(label)
    return canonical


@dataclass(frozen=True)
class ContextAwareBugPattern:
    source_issue: tuple[str, int]
    bug_api: str
    triggering_context: str
    oracle_design: str
    expected_behavior: str
    actual_behavior: str
    repro_program: str
    bug_category: str

    def __post_init__(self) -> None:
        for name in ("bug_api", "triggering_context", "oracle_design"):
            if not getattr(self, name).strip():
                raise ValueError(f"{name} must be non-empty")
        if self.bug_category not in BUG_CATEGORIES:
            raise ValueError(f"bug_category {self.bug_category!r} not in the closed set")
        object.__setattr__(
            self, "source_issue", (self.source_issue[0], int(self.source_issue[1]))
        )


def check_balanced_delimiters(source: str) -> bool:
    """Cheap plausibility check on program text: (), [], {} balance,
    skipping string literals."""
    pairs = {")": "(", "]": "[", "}": "{"}
    stack: list[str] = []
    quote: str | None = None
    i = 0
    while i < len(source):
        ch = source[i]
        if quote is not None:
            if ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch in "([{":
            stack.append(ch)
        elif ch in ")]}":
            if not stack or stack.pop() != pairs[ch]:
                return False
        i += 1
    return not stack


_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_FIELD_RE = re.compile(r"^([A-Z_]+):[ \t]*(.*)$")


def _parse_field_block(block: str, fields: tuple[str, ...], tail_field: str) -> dict[str, str]:
    """Split a field-labeled block into a dict; the tail field (program
    text) swallows everything after its marker."""
    values: dict[str, str] = {}
    current: str | None = None
    buffer: list[str] = []

    def flush() -> None:
        if current is not None:
            values[current] = "\n".join(buffer).strip()

    for line in block.splitlines():
        match = _FIELD_RE.match(line)
        if match and match.group(1) in fields and current != tail_field:
            flush()
            current = match.group(1)
            buffer = [match.group(2)] if match.group(2) else []
        elif current is not None:
            buffer.append(line)
    flush()
    return values


def parse_fenced_fields(
    text: str, fields: tuple[str, ...], tail_field: str
) -> dict[str, str]:
    match = _FENCE_RE.search(text)
    if not match:
        raise PatternParseError("no fenced answer block found")
    values = _parse_field_block(match.group(1), fields, tail_field)
    missing = [f for f in fields if not values.get(f)]
    if missing:
        raise PatternParseError(
            f"missing or empty field(s): {', '.join(missing)}", field=missing[0]
        )
    return values


def parse_pattern_response(
    text: str, source_issue: tuple[str, int]
) -> ContextAwareBugPattern:
    """Parse the extraction answer; raises PatternParseError naming the
    first missing field, UnknownCategoryError on a label outside the set."""
    values = parse_fenced_fields(text, PATTERN_FIELDS, tail_field="REPRO_PROGRAM")
    program = values["REPRO_PROGRAM"]
    if not check_balanced_delimiters(program):
        raise PatternParseError(
            "REPRO_PROGRAM has unbalanced delimiters", field="REPRO_PROGRAM"
        )
    return ContextAwareBugPattern(
        source_issue=source_issue,
        bug_api=values["BUG_API"],
        bug_category=normalize_category(values["BUG_CATEGORY"]),
        triggering_context=values["TRIGGERING_CONTEXT"],
        oracle_design=values["ORACLE_DESIGN"],
        expected_behavior=values["EXPECTED_BEHAVIOR"],
        actual_behavior=values["ACTUAL_BEHAVIOR"],
        repro_program=program,
    )


def serialize_pattern(pattern: ContextAwareBugPattern) -> str:
    """Render a pattern in the same fenced layout the extraction prompt
    demands, so serialize followed by parse is the identity."""
    return (
        "```pattern\n"
        f"BUG_API: {pattern.bug_api}\n"
        f"BUG_CATEGORY: {pattern.bug_category}\n"
        f"TRIGGERING_CONTEXT: {pattern.triggering_context}\n"
        f"ORACLE_DESIGN: {pattern.oracle_design}\n"
        f"EXPECTED_BEHAVIOR: {pattern.expected_behavior}\n"
        f"ACTUAL_BEHAVIOR: {pattern.actual_behavior}\n"
        "REPRO_PROGRAM:\n"
        f"{pattern.repro_program}\n"
        "```\n"
    )


def render_comments(issue: IssueRecord) -> str:
    if not issue.comments:
        return "(no comments)"
    return "\n".join(f"{author}: {text}" for author, text in issue.comments)


def extract_pattern(
    issue: IssueRecord,
    pr: PullRequestRecord,
    gateway: LlmGateway,
    mode: Mode = "replay",
) -> ContextAwareBugPattern:
    """Distill one context-aware bug pattern from an issue/PR pair.

    Pure given a cassette: identical (issue, pr, cassette) yields an
    identical pattern. Unparseable answers trigger up to three repair
    re-asks before the extraction fails.
    """
    category_list = ", ".join(BUG_CATEGORIES)
    response = gateway.complete_template(
        "issue_analysis",
        {
            "repo": issue.repo,
            "issue_number": str(issue.number),
            "issue_title": issue.title,
            "issue_body": issue.body,
            "issue_comments": render_comments(issue),
            "pr_number": str(pr.number),
            "pr_title": pr.title,
            "pr_description": pr.description,
            "pr_diff": pr.diff_text,
            "category_list": category_list,
        },
        mode=mode,
    )
    last_error: PatternError | None = None
    answer = response.text
    for _ in range(MAX_REPAIR_ASKS + 1):
        try:
            return parse_pattern_response(answer, (issue.repo, issue.number))
        except (PatternParseError, UnknownCategoryError) as exc:
            last_error = exc
        answer = gateway.complete_template(
            "pattern_repair",
            {
                "parse_error": str(last_error),
                "previous_answer": answer,
                "category_list": category_list,
            },
            mode=mode,
        ).text
    raise PatternExtractionError(
        f"issue {issue.repo}#{issue.number}: unparseable extraction answer "
        f"after {MAX_REPAIR_ASKS} repair asks: {last_error}"
    )


# ---------------------------------------------------------------------------
# Persistence (patterns.jsonl keyed by source issue)
# ---------------------------------------------------------------------------


def pattern_to_json(pattern: ContextAwareBugPattern) -> dict:
    return {
        "source_issue": list(pattern.source_issue),
        "bug_api": pattern.bug_api,
        "bug_category": pattern.bug_category,
        "triggering_context": pattern.triggering_context,
        "oracle_design": pattern.oracle_design,
        "expected_behavior": pattern.expected_behavior,
        "actual_behavior": pattern.actual_behavior,
        "repro_program": pattern.repro_program,
    }


def pattern_from_json(raw: dict) -> ContextAwareBugPattern:
    return ContextAwareBugPattern(
        source_issue=(raw["source_issue"][0], int(raw["source_issue"][1])),
        bug_api=raw["bug_api"],
        bug_category=raw["bug_category"],
        triggering_context=raw["triggering_context"],
        oracle_design=raw["oracle_design"],
        expected_behavior=raw["expected_behavior"],
        actual_behavior=raw["actual_behavior"],
        repro_program=raw["repro_program"],
    )


def save_patterns(patterns: list[ContextAwareBugPattern], path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for pattern in patterns:
            handle.write(json.dumps(pattern_to_json(pattern), ensure_ascii=False) + "\n")
    return path


def load_patterns(path: Path | str) -> list[ContextAwareBugPattern]:
    patterns = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                patterns.append(pattern_from_json(json.loads(line)))
    return patterns
