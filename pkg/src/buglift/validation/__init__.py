"""Self-validation pipeline: IR classification, staged checks, AND voting."""

from buglift.validation.ir import (
    CRASH_FAULTS,
    IR_CATALOG_TEXT,
    MISMATCH_TYPES,
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
from buglift.validation.pipeline import (
    BugCriteria,
    CaseView,
    StageResult,
    ValidationConfig,
    ValidationVerdict,
    Validator,
    load_verdicts,
    render_trace,
    save_verdicts,
    vote,
)

__all__ = [
    "CRASH_FAULTS",
    "IR_CATALOG_TEXT",
    "MISMATCH_TYPES",
    "PRECISION_TOLERANCE",
    "IrBugType",
    "TraceFact",
    "api_call",
    "control_block",
    "facts_from_execution",
    "match_ir",
    "oracle_check",
    "var_def",
    "BugCriteria",
    "CaseView",
    "StageResult",
    "ValidationConfig",
    "ValidationVerdict",
    "Validator",
    "load_verdicts",
    "render_trace",
    "save_verdicts",
    "vote",
]
