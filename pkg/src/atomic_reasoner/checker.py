"""Fine-grained reflection: per-category error taxonomy, verdict parsing,
and bounded revision of flagged nodes."""

from __future__ import annotations

import enum
import re
from typing import Optional

from . import model, prompts
from .backends import ChatMessage, CompletionRequest
from .errors import EmptyCompletion
from .model import ActionCategory, AtomicAction, CheckReport, Node

MAX_REVISIONS = 2  # revision cycles per node before accept-with-flag


class ErrorKind(enum.Enum):
    # premise category
    CONTENT_CONFLICT = "ContentConflict"
    LOGICAL_CONTRADICTION = "LogicalContradiction"
    EXPRESSION_INCONSISTENCY = "ExpressionInconsistency"
    # reasoning category
    CALCULATION_ERROR = "CalculationError"
    COMMON_SENSE_ERROR = "CommonSenseError"
    RECAPITULATION_ERROR = "RecapitulationError"
    IGNORING_OF_PREMISES = "IgnoringOfPremises"
    MISUSING_OF_PREMISES = "MisusingOfPremises"
    CONCLUSION_ERROR = "ConclusionError"
    # ending category
    RESULT_OMISSION = "ResultOmission"
    RESULTS_INCONSISTENCY = "ResultsInconsistency"
    JUDGMENT_ERROR = "JudgmentError"
    SORTING_ERROR = "SortingError"


_KIND_CATEGORY = {
    ErrorKind.CONTENT_CONFLICT: ActionCategory.PREMISE,
    ErrorKind.LOGICAL_CONTRADICTION: ActionCategory.PREMISE,
    ErrorKind.EXPRESSION_INCONSISTENCY: ActionCategory.PREMISE,
    ErrorKind.CALCULATION_ERROR: ActionCategory.REASONING,
    ErrorKind.COMMON_SENSE_ERROR: ActionCategory.REASONING,
    ErrorKind.RECAPITULATION_ERROR: ActionCategory.REASONING,
    ErrorKind.IGNORING_OF_PREMISES: ActionCategory.REASONING,
    ErrorKind.MISUSING_OF_PREMISES: ActionCategory.REASONING,
    ErrorKind.CONCLUSION_ERROR: ActionCategory.REASONING,
    ErrorKind.RESULT_OMISSION: ActionCategory.ENDING,
    ErrorKind.RESULTS_INCONSISTENCY: ActionCategory.ENDING,
    ErrorKind.JUDGMENT_ERROR: ActionCategory.ENDING,
    ErrorKind.SORTING_ERROR: ActionCategory.ENDING,
}

# Fallback kind when the checker reports an error without a recognizable tag.
_CATEGORY_DEFAULT = {
    ActionCategory.PREMISE: ErrorKind.CONTENT_CONFLICT,
    ActionCategory.REASONING: ErrorKind.CONCLUSION_ERROR,
    ActionCategory.ENDING: ErrorKind.JUDGMENT_ERROR,
}

# Definitions and suggested checking methods, instantiated per category so
# the checker prompt only carries the applicable subset.
_DEFINITIONS = {
    ErrorKind.CONTENT_CONFLICT: (
        "Content Conflict: extracted premise information directly conflicts with "
        "the original statement. Compare every stated premise against the original "
        "question and flag any discrepancy."
    ),
    ErrorKind.LOGICAL_CONTRADICTION: (
        "Logical Contradiction: information in one step is inconsistent with or "
        "does not follow from earlier steps. Verify each step sequentially against "
        "its premises, checking conditional branches individually."
    ),
    ErrorKind.EXPRESSION_INCONSISTENCY: (
        "Expression Inconsistency: expressions or equations are rewritten "
        "inconsistently across steps. Compare adjacent steps, verify substitutions, "
        "and keep symbols, units, and values consistent."
    ),
    ErrorKind.CALCULATION_ERROR: (
        "Calculation Error: miscalculation or transcription mistakes between "
        "consecutive equations. Recompute each step and confirm intermediate results "
        "carry over correctly."
    ),
    ErrorKind.COMMON_SENSE_ERROR: (
        "Common Sense Error: claims that violate basic common knowledge, such as "
        "wrong numerical comparisons or unrealistic assertions. Check conclusions "
        "against fundamental facts."
    ),
    ErrorKind.RECAPITULATION_ERROR: (
        "Recapitulation Error: an idea is redundantly repeated or restated. Look "
        "for repetitive statements within the reasoning."
    ),
    ErrorKind.IGNORING_OF_PREMISES: (
        "Ignoring of Premises: a constraint or scenario from the premises is "
        "neglected. Confirm every premise constraint was actually applied."
    ),
    ErrorKind.MISUSING_OF_PREMISES: (
        "Misusing of Premises: a statement deviates from the premises by confusing "
        "references or altering given information. Compare each statement directly "
        "with the premises."
    ),
    ErrorKind.CONCLUSION_ERROR: (
        "Conclusion Error: a conclusion is not logically derived from the prior "
        "steps or conflicts with a premise. Map each conclusion back to its "
        "supporting evidence."
    ),
    ErrorKind.RESULT_OMISSION: (
        "Result Omission: a required outcome is missing from the final step. Check "
        "that all necessary conclusions are explicitly stated."
    ),
    ErrorKind.RESULTS_INCONSISTENCY: (
        "Results Inconsistency: the outcome is stated differently in different "
        "places. Compare all statements of the result across the process."
    ),
    ErrorKind.JUDGMENT_ERROR: (
        "Judgment Error: the final step reaches a conclusion conflicting with the "
        "established logic. Ensure the final judgment follows from the preceding "
        "reasoning without abrupt shifts."
    ),
    ErrorKind.SORTING_ERROR: (
        "Sorting Error: the final output sequence deviates from the ordering "
        "established during intermediate steps. Re-sort explicitly and cross-verify "
        "positional claims against the re-sorted sequence."
    ),
}


def kind_category(kind: ErrorKind) -> ActionCategory:
    return _KIND_CATEGORY[kind]


def applicable_errors(action: AtomicAction) -> list[ErrorKind]:
    """Error kinds applicable to a node, keyed by its action category."""
    cat = model.category(action)
    return [k for k in ErrorKind if _KIND_CATEGORY[k] is cat]


def error_definitions(action: AtomicAction) -> str:
    parts = []
    for i, kind in enumerate(applicable_errors(action), start=1):
        parts.append(f"{i}. **{_human_name(kind)}**:\n   {_DEFINITIONS[kind]}")
    return "\n\n".join(parts)


def _human_name(kind: ErrorKind) -> str:
    return re.sub(r"(?<!^)([A-Z])", r" \1", kind.value)


def _normalize_kind_token(token: str) -> str:
    return re.sub(r"[^a-z]", "", token.lower()).rstrip("s")


_KIND_LOOKUP = {}
for _kind in ErrorKind:
    _KIND_LOOKUP[_normalize_kind_token(_kind.value)] = _kind
    _KIND_LOOKUP[_normalize_kind_token(_human_name(_kind))] = _kind
# Plural / variant surface forms seen in the wild.
_KIND_LOOKUP[_normalize_kind_token("Expression Inconsistencies")] = ErrorKind.EXPRESSION_INCONSISTENCY
_KIND_LOOKUP[_normalize_kind_token("Conclusion Errors")] = ErrorKind.CONCLUSION_ERROR

_RESULT_LINE = re.compile(r"check\s+result\s*[:\-]\s*(.+)", re.IGNORECASE)
_TYPE_LINE = re.compile(r"error\s+type\s*[:\-]\s*(.+)", re.IGNORECASE)
_SUGGESTION_LINE = re.compile(r"suggestion\s*[:\-]\s*(.+)", re.IGNORECASE)


def parse_check_response(text: str, action: AtomicAction) -> Optional[CheckReport]:
    """Parse a checker response; None when no verdict line is present."""
    verdict_match = None
    for match in _RESULT_LINE.finditer(text):
        verdict_match = match
    if verdict_match is None:
        return None
    verdict_text = verdict_match.group(1).strip().strip("*. ").lower()
    if verdict_text.startswith("no error"):
        return CheckReport(verdict="NoError", rationale=text.strip())

    # Explicit "Error Type:" tags are trusted across the whole taxonomy: a
    # checker may legitimately flag, say, a sorting problem while reviewing a
    # verification step.  The looser prose scan below stays restricted to the
    # action's own category.
    allowed = set(applicable_errors(action))
    kinds: list[ErrorKind] = []
    for match in _TYPE_LINE.finditer(text):
        token = _normalize_kind_token(match.group(1).strip().strip("*."))
        kind = _KIND_LOOKUP.get(token)
        if kind is not None and kind not in kinds:
            kinds.append(kind)
    if not kinds:
        # Scan prose for any applicable kind name.
        body = _normalize_kind_token(text)
        for kind in allowed:
            if _normalize_kind_token(_human_name(kind)) in body:
                kinds.append(kind)
    if not kinds:
        kinds = [_CATEGORY_DEFAULT[model.category(action)]]

    suggestion = None
    for match in _SUGGESTION_LINE.finditer(text):
        suggestion = match.group(1).strip()
    return CheckReport(
        verdict="Error",
        kinds=[k.value for k in sorted(kinds, key=lambda k: k.value)],
        rationale=text.strip(),
        suggestion=suggestion,
    )


def check(tree: model.AtomicTree, node: Node, backend) -> CheckReport:
    """One checker pass over a node.  Fail-open: unparseable output after one
    re-ask yields a NoError report with rationale 'unparseable'."""
    process = _node_process(tree, node)
    bundle = prompts.build_checker_prompt(error_definitions(node.action), process)
    report = None
    for attempt in range(2):
        result = backend.complete(_to_request(bundle, "check"))
        report = parse_check_response(result.text, node.action)
        if report is not None:
            break
    if report is None:
        report = CheckReport(verdict="NoError", rationale="unparseable")
    node.check_reports.append(report)
    return report


def _node_process(tree: model.AtomicTree, node: Node) -> str:
    lines = [f"Problem: {tree.problem.statement}", ""]
    path = model.active_path(tree)
    for step, prior in enumerate(path, start=1):
        marker = "  <-- step under review" if prior.id == node.id else ""
        lines.append(f"Step {step} ({prior.action.value}): {prior.content}{marker}")
    if node.id not in {n.id for n in path}:
        lines.append(f"Step under review ({node.action.value}): {node.content}")
    return "\n".join(lines)


def revise(tree: model.AtomicTree, node: Node, report: CheckReport, backend) -> Node:
    """Rewrite a node's content from a checker error report (in place)."""
    if not report.is_error:
        raise ValueError("revise requires an Error report")
    parts = [
        "A checker reviewed the reasoning step below and found an error. "
        "Rewrite the step so the error is fixed, keeping everything that was correct.",
        "",
        "# Original step content:",
        node.content,
        "",
        "# Checker findings:",
        report.rationale,
    ]
    if report.suggestion:
        parts += ["", "# Suggested fix:", report.suggestion]
    parts += ["", "Respond with the full revised step content only."]
    bundle = prompts.PromptBundle(
        messages=[
            ChatMessage("system", prompts.load_template("solver_system")),
            ChatMessage("user", "\n".join(parts)),
        ],
        params=prompts.SamplingParams(temperature=prompts.SOLVE_TEMPERATURE),
    )
    for attempt in range(2):
        result = backend.complete(_to_request(bundle, "solve"))
        if result.text.strip():
            node.content = result.text.strip()
            node.revised = True
            return node
    raise EmptyCompletion("revision produced a blank completion twice")


def run_check_cycle(
    tree: model.AtomicTree,
    node: Node,
    check_backend,
    revise_backend,
    max_revisions: int = MAX_REVISIONS,
) -> Node:
    """check -> revise loop, bounded: after max_revisions revisions a still-
    erroring node is accepted with its flag set."""
    revisions = 0
    while True:
        report = check(tree, node, check_backend)
        if not report.is_error:
            return node
        if revisions >= max_revisions:
            node.flagged = True
            return node
        revise(tree, node, report, revise_backend)
        revisions += 1


def _to_request(bundle: prompts.PromptBundle, tag: str) -> CompletionRequest:
    return CompletionRequest(
        messages=bundle.messages,
        temperature=bundle.params.temperature,
        max_tokens=bundle.params.max_tokens,
        seed=bundle.params.seed,
        tag=tag,
    )
