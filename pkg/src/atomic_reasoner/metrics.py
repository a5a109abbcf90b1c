"""Trace serialization, run statistics, SFT-corpus export, and discrete
entropy diagnostics over action-selection profiles."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from . import model
from .errors import DimensionMismatch, InvalidDistribution, ParseError
from .model import (
    AtomicAction,
    AtomicTree,
    Chain,
    ChainStatus,
    CheckReport,
    FreeText,
    GridSchema,
    MultipleChoice,
    Node,
    Numeric,
    Problem,
    Termination,
    TerminationMode,
)

PROB_TOLERANCE = 1e-9
NUM_ACTIONS = len(AtomicAction)
TRACE_FORMAT_VERSION = 1


# --- entropy diagnostics --------------------------------------------------------

@dataclass
class DiscreteDistribution:
    """Finite outcome distribution: (label, probability) pairs."""

    outcomes: list[tuple[str, float]]

    def __post_init__(self):
        if not self.outcomes:
            raise InvalidDistribution("distribution needs at least one outcome")
        total = 0.0
        for _, p in self.outcomes:
            if p < 0:
                raise InvalidDistribution(f"negative probability {p}")
            total += p
        if abs(total - 1.0) > PROB_TOLERANCE:
            raise InvalidDistribution(f"probabilities sum to {total}, not 1")

    @classmethod
    def uniform(cls, labels: Sequence[str]) -> "DiscreteDistribution":
        p = 1.0 / len(labels)
        return cls([(label, p) for label in labels])


def entropy(dist: DiscreteDistribution) -> float:
    """Shannon entropy in bits; 0 log 0 := 0."""
    total = 0.0
    for _, p in dist.outcomes:
        if p > 0.0:
            total -= p * math.log2(p)
    return total


@dataclass
class ActionSelectionProfile:
    """Per-step action-selection probabilities: steps x actions matrix, each
    row a distribution over the six actions."""

    rows: list[list[float]]

    def __post_init__(self):
        for i, row in enumerate(self.rows):
            if len(row) != NUM_ACTIONS:
                raise DimensionMismatch(
                    f"row {i} has {len(row)} entries, expected {NUM_ACTIONS}"
                )
            if any(p < 0 for p in row):
                raise InvalidDistribution(f"row {i} has a negative probability")
            if abs(sum(row) - 1.0) > PROB_TOLERANCE:
                raise InvalidDistribution(f"row {i} sums to {sum(row)}, not 1")

    @property
    def steps(self) -> int:
        return len(self.rows)


def weighted_step_entropy(selection_row: Sequence[float], per_action_entropies: Sequence[float]) -> float:
    """Expected per-step entropy when each action j (with its own output
    entropy E_j) is selected with probability r_j: sum_j r_j * E_j."""
    if len(selection_row) != len(per_action_entropies):
        raise DimensionMismatch(
            f"{len(selection_row)} selection probabilities vs "
            f"{len(per_action_entropies)} entropies"
        )
    if any(p < 0 for p in selection_row):
        raise InvalidDistribution("negative selection probability")
    if abs(sum(selection_row) - 1.0) > PROB_TOLERANCE:
        raise InvalidDistribution("selection row must sum to 1")
    if any(e < 0 for e in per_action_entropies):
        raise InvalidDistribution("entropies must be non-negative")
    return sum(r * e for r, e in zip(selection_row, per_action_entropies))


# --- run statistics ---------------------------------------------------------------

@dataclass
class TraceStats:
    rounds: int
    action_histogram: dict[str, int]
    chains: int
    backtracks: int
    revisions: int
    check_errors: int
    prompt_tokens: int = 0
    completion_tokens: int = 0
    wall_time_ms: float = 0.0


def trace_stats(
    tree: AtomicTree,
    prompt_tokens: int = 0,
    completion_tokens: int = 0,
    wall_time_ms: float = 0.0,
) -> TraceStats:
    """Counts computed purely from the trace; token/time totals are supplied
    by the caller (the tree does not record backend usage)."""
    histogram = {action.value: 0 for action in AtomicAction}
    revisions = 0
    check_errors = 0
    for node in tree.nodes.values():
        histogram[node.action.value] += 1
        if node.revised:
            revisions += 1
        check_errors += sum(1 for r in node.check_reports if r.is_error)
    return TraceStats(
        rounds=model.round_count(tree),
        action_histogram=histogram,
        chains=len(tree.chains),
        backtracks=max(0, len(tree.chains) - 1),
        revisions=revisions,
        check_errors=check_errors,
        prompt_tokens=prompt_tokens,
        completion_tokens=completion_tokens,
        wall_time_ms=wall_time_ms,
    )


# --- trace serialization ------------------------------------------------------------

def _schema_to_json(schema) -> dict:
    if isinstance(schema, FreeText):
        return {"kind": "free_text"}
    if isinstance(schema, Numeric):
        return {"kind": "numeric"}
    if isinstance(schema, MultipleChoice):
        return {"kind": "mcq", "options": list(schema.options)}
    if isinstance(schema, GridSchema):
        return {
            "kind": "grid",
            "houses": schema.houses,
            "attributes": [[name, list(values)] for name, values in schema.attributes],
        }
    raise TypeError(f"unknown schema type {type(schema)!r}")


def schema_from_json(data: dict):
    kind = data.get("kind")
    if kind == "free_text":
        return FreeText()
    if kind == "numeric":
        return Numeric()
    if kind == "mcq":
        return MultipleChoice(options=tuple(data["options"]))
    if kind == "grid":
        return GridSchema(
            houses=data["houses"],
            attributes=tuple((name, tuple(values)) for name, values in data["attributes"]),
        )
    raise ParseError(f"unknown answer schema kind {kind!r}")


def tree_to_json(tree: AtomicTree) -> dict:
    return {
        "format_version": TRACE_FORMAT_VERSION,
        "problem": {
            "id": tree.problem.id,
            "statement": tree.problem.statement,
            "domain_hint": tree.problem.domain_hint,
            "answer_schema": _schema_to_json(tree.problem.answer_schema),
        },
        "nodes": {
            nid: {
                "action": node.action.value,
                "guidance": node.guidance,
                "content": node.content,
                "created_round": node.created_round,
                "revised": node.revised,
                "flagged": node.flagged,
                "check_reports": [
                    {
                        "verdict": r.verdict,
                        "kinds": list(r.kinds),
                        "rationale": r.rationale,
                        "suggestion": r.suggestion,
                    }
                    for r in node.check_reports
                ],
            }
            for nid, node in tree.nodes.items()
        },
        "chains": {
            cid: {
                "parent": list(chain.parent) if chain.parent else None,
                "node_ids": list(chain.node_ids),
                "status": chain.status.value,
                "summary": chain.summary,
            }
            for cid, chain in tree.chains.items()
        },
        "chain_order": list(tree.chains),
        "active_chain": tree.active_chain_id,
        "terminated": (
            {
                "mode": tree.terminated.mode.value,
                "final_answer": tree.terminated.final_answer,
            }
            if tree.terminated
            else None
        ),
        "next_node_seq": tree.next_node_seq,
        "next_chain_seq": tree.next_chain_seq,
    }


def serialize_trace(tree: AtomicTree) -> str:
    """Canonical document: sorted keys, fixed indentation, trailing newline.
    Equal trees serialize identically."""
    return json.dumps(tree_to_json(tree), sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def deserialize_trace(document: str) -> AtomicTree:
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid trace document: {exc.msg}", line=exc.lineno)
    try:
        problem = Problem(
            id=data["problem"]["id"],
            statement=data["problem"]["statement"],
            domain_hint=data["problem"]["domain_hint"],
            answer_schema=schema_from_json(data["problem"]["answer_schema"]),
        )
        nodes = {}
        for nid, nd in data["nodes"].items():
            nodes[nid] = Node(
                id=nid,
                action=AtomicAction(nd["action"]),
                guidance=nd["guidance"],
                content=nd["content"],
                created_round=nd["created_round"],
                revised=nd["revised"],
                flagged=nd["flagged"],
                check_reports=[
                    CheckReport(
                        verdict=r["verdict"],
                        kinds=list(r["kinds"]),
                        rationale=r["rationale"],
                        suggestion=r["suggestion"],
                    )
                    for r in nd["check_reports"]
                ],
            )
        chains = {}
        for cid in data["chain_order"]:
            cd = data["chains"][cid]
            chains[cid] = Chain(
                id=cid,
                parent=tuple(cd["parent"]) if cd["parent"] else None,
                node_ids=list(cd["node_ids"]),
                status=ChainStatus(cd["status"]),
                summary=cd["summary"],
            )
        terminated = None
        if data["terminated"]:
            terminated = Termination(
                mode=TerminationMode(data["terminated"]["mode"]),
                final_answer=data["terminated"]["final_answer"],
            )
        return AtomicTree(
            problem=problem,
            chains=chains,
            nodes=nodes,
            active_chain_id=data["active_chain"],
            terminated=terminated,
            next_node_seq=data["next_node_seq"],
            next_chain_seq=data["next_chain_seq"],
        )
    except (KeyError, ValueError, TypeError) as exc:
        raise ParseError(f"malformed trace document: {exc!r}")


# --- SFT export -------------------------------------------------------------------

@dataclass
class SftRecord:
    instruction: str
    reasoning: str
    answer: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (self.instruction.strip() and self.reasoning.strip() and self.answer.strip()):
            raise ValueError("instruction, reasoning, and answer must be non-empty")


@dataclass
class ScoredTrace:
    tree: AtomicTree
    correct: bool
    suite: str = ""


def linearize_final_path(tree: AtomicTree) -> str:
    """The terminating chain's ancestry, root to tip, one line per step;
    revised content already replaced the originals in place."""
    lines = []
    for step, node in enumerate(model.active_path(tree), start=1):
        lines.append(f"Step {step} ({node.action.value}): {node.content}")
    return "\n".join(lines)


def to_sft_records(
    traces: Iterable[Union[ScoredTrace, AtomicTree]],
    filter: str = "correct_only",
    max_chars: Optional[int] = None,
) -> list[SftRecord]:
    """Export terminated, scored traces as instruction/reasoning/answer
    records.  ``filter`` is 'all' or 'correct_only'; ``max_chars`` drops
    records whose reasoning exceeds a character budget."""
    if filter not in ("all", "correct_only"):
        raise ValueError("filter must be 'all' or 'correct_only'")
    records = []
    for entry in traces:
        scored = entry if isinstance(entry, ScoredTrace) else ScoredTrace(entry, correct=True)
        tree = scored.tree
        if tree.terminated is None:
            continue
        if filter == "correct_only" and not scored.correct:
            continue
        reasoning = linearize_final_path(tree)
        if not reasoning.strip() or not tree.terminated.final_answer.strip():
            continue
        if max_chars is not None and len(reasoning) > max_chars:
            continue
        records.append(
            SftRecord(
                instruction=tree.problem.statement,
                reasoning=reasoning,
                answer=tree.terminated.final_answer,
                meta={
                    "suite": scored.suite,
                    "rounds": model.round_count(tree),
                    "correct": scored.correct,
                },
            )
        )
    return records


def sft_records_to_jsonl(records: Iterable[SftRecord]) -> str:
    lines = []
    for record in records:
        lines.append(
            json.dumps(
                {
                    "instruction": record.instruction,
                    "reasoning": record.reasoning,
                    "answer": record.answer,
                    "meta": record.meta,
                },
                sort_keys=True,
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")
