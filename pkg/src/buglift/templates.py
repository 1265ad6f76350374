"""Prompt template registry.

Every LLM call in the pipeline goes through a named template slot so that
cassette keys, cost attribution, and audit records stay stable even when
template wording is revised. Template ids double as the routing key for
per-component model selection.
"""

from __future__ import annotations

from dataclasses import dataclass

# Pipeline components, used for model routing and cost attribution.
PATTERN_EXTRACTION = "pattern_extraction"
API_MATCHING = "api_matching"
FUZZING = "fuzzing"
VALIDATION = "validation"

COMPONENTS = (PATTERN_EXTRACTION, API_MATCHING, FUZZING, VALIDATION)


@dataclass(frozen=True)
class PromptTemplate:
    """A registered prompt slot: stable id, owning component, format text."""

    template_id: str
    component: str
    text: str

    def render(self, **fields: str) -> str:
        try:
            return self.text.format(**fields)
        except KeyError as exc:
            raise KeyError(
                f"template {self.template_id!r} missing field {exc.args[0]!r}"
            ) from exc


_TEMPLATES: dict[str, PromptTemplate] = {}


def _register(template_id: str, component: str, text: str) -> PromptTemplate:
    if template_id in _TEMPLATES:
        raise ValueError(f"duplicate template id {template_id!r}")
    template = PromptTemplate(template_id, component, text)
    _TEMPLATES[template_id] = template
    return template


def get_template(template_id: str) -> PromptTemplate:
    try:
        return _TEMPLATES[template_id]
    except KeyError:
        raise KeyError(f"unknown template id {template_id!r}") from None


def is_registered(template_id: str) -> bool:
    return template_id in _TEMPLATES


def registered_ids() -> list[str]:
    return sorted(_TEMPLATES)


def component_of(template_id: str) -> str:
    return get_template(template_id).component


# ---------------------------------------------------------------------------
# Pattern extraction
# ---------------------------------------------------------------------------

ISSUE_ANALYSIS = _register(
    "issue_analysis",
    PATTERN_EXTRACTION,
    """You are analyzing a resolved bug report from a library's issue tracker
together with the pull request that fixed it. Distill the bug into a reusable
pattern.

Issue {repo}#{issue_number}: {issue_title}

Issue body:
{issue_body}

Discussion:
{issue_comments}

Fix (PR #{pr_number}): {pr_title}
{pr_description}

Diff of the fix:
{pr_diff}

Work through these steps:
1. Identify the exact public API the bug lives in (fully qualified name).
2. State the conditions needed to trigger the bug: inputs, environment,
   and any required sequence of API calls.
3. Contrast what the API should have done with what it actually did.
4. State the oracle: a programmatic check that detects the bug without a
   human in the loop.
5. Write a minimal, self-contained Python program that reproduces the bug
   and prints the line BUG FOUND when the oracle fires.
6. Classify the bug into exactly one category from this list:
   {category_list}

Answer with a single fenced block in exactly this layout:

```pattern
BUG_API: <qualified API name>
BUG_CATEGORY: <one category from the list>
TRIGGERING_CONTEXT: <conditions that activate the bug>
ORACLE_DESIGN: <how the bug is detected programmatically>
EXPECTED_BEHAVIOR: <what should happen>
ACTUAL_BEHAVIOR: <what happens instead>
REPRO_PROGRAM:
<the complete Python program>
```
""",
)

PATTERN_REPAIR = _register(
    "pattern_repair",
    PATTERN_EXTRACTION,
    """Your previous answer could not be parsed: {parse_error}

Reproduce the full answer again as a single fenced ```pattern block with all
of these fields present: BUG_API, BUG_CATEGORY, TRIGGERING_CONTEXT,
ORACLE_DESIGN, EXPECTED_BEHAVIOR, ACTUAL_BEHAVIOR, REPRO_PROGRAM.
BUG_CATEGORY must be one of: {category_list}

Previous answer:
{previous_answer}
""",
)

# ---------------------------------------------------------------------------
# API matching
# ---------------------------------------------------------------------------

API_ANALYSIS = _register(
    "api_analysis",
    API_MATCHING,
    """Write a context-free functional description of this library API.
Describe only what the API itself does: its input parameter types and its
core operation. Do not describe usage scenarios, examples, or callers.

API: {qualified_name}
Module: {module_path}
Parameters: {signature}
Documentation:
{doc_text}

Answer with the description text only.
""",
)

# ---------------------------------------------------------------------------
# Bug transfer
# ---------------------------------------------------------------------------

BUG_TRANSFER = _register(
    "bug_transfer",
    FUZZING,
    """A known bug pattern is being transferred from one API to a functionally
similar target API. Reason step by step, then synthesize a complete test.

Known bug pattern (source API {bug_api}):
- Triggering context: {triggering_context}
- Oracle design: {oracle_design}
- Expected behavior: {expected_behavior}
- Actual behavior: {actual_behavior}
- Reproduction program:
{repro_program}

Target API: {target_api}
Target module: {target_module}
Target parameters: {target_signature}
Target documentation:
{target_doc}

Steps:
1. Compare the functional semantics of the source and target APIs and note
   the differences that matter for this bug.
2. Assuming the target API harbors an analogous bug, infer the triggering
   context for the target. Trigger conditions usually shift between APIs
   (an edge case at input 0 for one API may sit at input -1 for another).
3. Design an oracle fitted to the target API's contract and the expected
   abnormal behavior. When the oracle fires, the program must print a line
   containing exactly BUG FOUND and nothing else on that line.
4. Synthesize a complete, self-contained Python test program that sets up
   the triggering context, invokes the target API, and applies the oracle.

Answer with a single fenced block in exactly this layout:

```transfer
RATIONALE: <why this transfer is plausible, key semantic differences>
ADAPTED_CONTEXT: <triggering context rewritten for the target API>
ADAPTED_ORACLE: <oracle design rewritten for the target API>
TEST_PROGRAM:
<the complete Python program>
```
""",
)

TRANSFER_REPAIR = _register(
    "transfer_repair",
    FUZZING,
    """Your previous answer could not be parsed: {parse_error}

Reproduce the full answer again as a single fenced ```transfer block with all
of these fields present: RATIONALE, ADAPTED_CONTEXT, ADAPTED_ORACLE,
TEST_PROGRAM.

Previous answer:
{previous_answer}
""",
)

# ---------------------------------------------------------------------------
# Validation: symptom similarity
# ---------------------------------------------------------------------------

SAME_BUG_TYPE = _register(
    "same_bug_type",
    VALIDATION,
    """Classify two bug cases against a closed catalog of bug types defined in
a structural intermediate representation, then decide whether both cases are
the same type.

Bug type catalog:
{ir_catalog}

Original case (API {original_api}):
Program:
{original_program}
Execution log:
{original_trace}

Transferred case (API {transferred_api}):
Program:
{transferred_program}
Execution log:
{transferred_trace}

For each case, match the program and execution log against the catalog
clauses and pick the single best-fitting type name. Use only type names from
the catalog.

Answer with exactly these three lines:
ORIGINAL_TYPE: <type name>
TRANSFERRED_TYPE: <type name>
SAME_TYPE: <yes or no>
""",
)

REAL_MISMATCH = _register(
    "real_mismatch",
    VALIDATION,
    """A transferred test flagged an output mismatch across execution
environments. Decide whether it is a genuine mismatch bug or an artifact.

Artifacts to rule out: inputs regenerated from random sources per
environment, tolerance-level numerical noise, environment-dependent defaults
that are documented to differ.

Transferred case (API {transferred_api}):
Program:
{transferred_program}
Execution log:
{transferred_trace}

Answer with exactly one line:
REAL_MISMATCH: <yes or no>
""",
)

SAME_BUG_PATTERN = _register(
    "same_bug_pattern",
    VALIDATION,
    """Compare the original bug case and the transferred case on three axes:
trigger conditions, runtime behaviors, and oracle designs. Decide whether
the transferred case preserves the original bug pattern, using the execution
logs as ground truth for what actually happened at runtime.

Original case (API {original_api}):
Triggering context: {original_context}
Oracle design: {original_oracle}
Program:
{original_program}
Execution log:
{original_trace}

Transferred case (API {transferred_api}):
Adapted context: {transferred_context}
Adapted oracle: {transferred_oracle}
Program:
{transferred_program}
Execution log:
{transferred_trace}

Pay attention to which oracle actually fired at runtime; an oracle that
checks a different symptom than the original encodes a different pattern.

Answer with exactly one line:
SAME_PATTERN: <yes or no>
""",
)

# ---------------------------------------------------------------------------
# Validation: oracle correctness (reverse hypothesis)
# ---------------------------------------------------------------------------

ORACLE_SOUNDNESS = _register(
    "oracle_soundness",
    VALIDATION,
    """Assume the target API is implemented correctly and has no bug. Under
that assumption, reason about whether the oracle in this test would still
fire. An oracle that fires on a correct implementation encodes an invalid
assumption (for example, asserting a property the target API does not
guarantee by definition) and is unsound.

Target API: {transferred_api}
Adapted oracle: {transferred_oracle}
Program:
{transferred_program}
Execution log:
{transferred_trace}

Answer with exactly one line, yes meaning the oracle is sound (it would stay
quiet on a correct implementation):
ORACLE_VALID: <yes or no>
""",
)

# ---------------------------------------------------------------------------
# Validation: criteria-based judgment
# ---------------------------------------------------------------------------

ISSUE_CHECK_API_BUG = _register(
    "issue_check_api_bug",
    VALIDATION,
    """Does this issue describe a bug in a specific library API, as opposed to
a build problem, a feature request, a usage question, or an environment
problem?

Issue {repo}#{issue_number}: {issue_title}
{issue_body}

Answer with exactly one line:
ANSWER: <yes or no>
""",
)

ISSUE_CHECK_DEMO = _register(
    "issue_check_demo",
    VALIDATION,
    """Does this issue provide runnable reproduction code (a self-contained
snippet a developer could execute to observe the reported behavior)?

Issue {repo}#{issue_number}: {issue_title}
{issue_body}

Answer with exactly one line:
ANSWER: <yes or no>
""",
)

ISSUE_CHECK_FEEDBACK = _register(
    "issue_check_feedback",
    VALIDATION,
    """Read the maintainer and developer comments on this issue. Is the issue
free of negative feedback, i.e. no maintainer disputed that the reported
behavior is a bug?

Issue {repo}#{issue_number}: {issue_title}
Comments:
{issue_comments}

Answer with exactly one line, yes meaning nobody rejected the bug claim:
ANSWER: <yes or no>
""",
)

ISSUE_CHECK_COMPLEXITY = _register(
    "issue_check_complexity",
    VALIDATION,
    """Assess the complexity of the reproduction in this issue. Is the bug
simple enough that its determination rationale can be stated as a short,
objective criterion (single API focus, small repro, no deep internal state)?

Issue {repo}#{issue_number}: {issue_title}
{issue_body}

Answer with exactly one line:
ANSWER: <yes or no>
""",
)

CRITERIA_EXTRACTION = _register(
    "criteria_extraction",
    VALIDATION,
    """From this resolved issue, extract the bug determination criteria: the
core rationale by which the observed behavior was judged a bug rather than
expected behavior. Name the specific functional requirement or intended
behavior that was violated. The criteria must be objective enough to apply
to a different API.

Issue {repo}#{issue_number}: {issue_title}
{issue_body}

Discussion:
{issue_comments}

Answer in this layout (criteria text may span lines):
CRITERIA: <the bug determination criteria>
""",
)

CRITERIA_JUDGMENT = _register(
    "criteria_judgment",
    VALIDATION,
    """A transferred test printed BUG FOUND. Using the bug determination
criteria extracted from the original issue as the reasoning framework,
decide whether the behavior observed in the target API is a real bug.

Bug determination criteria (from the original issue):
{criteria_text}

Target API: {transferred_api}
Program:
{transferred_program}
Execution log:
{transferred_trace}

First explain why the oracle fired, grounded in the execution log. Then
check whether the criteria's semantic preconditions hold for the target API
at all (a criterion about one API's contract may not apply to another).
Conclude with exactly one line:
JUDGMENT: <real_bug or false_positive>
""",
)

DEBATE_CHALLENGE = _register(
    "debate_challenge",
    VALIDATION,
    """Here is an initial judgment of whether a transferred test exposed a
real bug:

{initial_judgment}

Please challenge this from the opposing viewpoint. Argue the strongest case
that the judgment is wrong, citing the execution log and the target API's
documented contract where possible.

Execution log:
{transferred_trace}
""",
)

DEBATE_SUMMARY = _register(
    "debate_summary",
    VALIDATION,
    """Two viewpoints on the same candidate bug:

Initial judgment:
{initial_judgment}

Opposing challenge:
{challenge}

Based on both viewpoints, summarize whether this is a false positive.
Conclude with exactly one line:
FINAL_VERDICT: <real_bug or false_positive>
""",
)

# ---------------------------------------------------------------------------
# Embeddings
# ---------------------------------------------------------------------------

# Embedding calls are not chat prompts, but they share the cassette key
# scheme; the pseudo-slot keeps their keys inside the template namespace.
EMBEDDING = _register("embedding", API_MATCHING, "{text}")
