"""Atomic tree data model: actions, nodes, chains, and tree operations.

The tree is the full record of one solving session.  Every executed atomic
action becomes a node on some chain; backtracking forks a new chain off a
historical node.  Exactly one chain is Active until the tree terminates.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import (
    AlreadyTerminated,
    EmptyProblem,
    MissingHypothesis,
    NodeNotOnActivePath,
    Terminated,
    UnknownAction,
)

ELISION_MARKER = "[... earlier steps elided ...]"

# Minimum number of trailing nodes the active chain keeps under truncation,
# so the router always sees the recent context.
ACTIVE_CHAIN_KEEP = 3


class AtomicAction(enum.Enum):
    """The closed six-action taxonomy."""

    PREMISE_DISCOVERY = "PremiseDiscovery"
    PREMISE_RETRIEVAL = "PremiseRetrieval"
    PREMISE_SUMMARIZATION = "PremiseSummarization"
    HYPOTHESIS_GENERATION = "HypothesisGeneration"
    HYPOTHESIS_VERIFICATION = "HypothesisVerification"
    SUMMARY_FINISHED = "SummaryFinished"


class ActionCategory(enum.Enum):
    PREMISE = "Premise"
    REASONING = "Reasoning"
    ENDING = "Ending"


_CATEGORY = {
    AtomicAction.PREMISE_DISCOVERY: ActionCategory.PREMISE,
    AtomicAction.PREMISE_RETRIEVAL: ActionCategory.PREMISE,
    AtomicAction.PREMISE_SUMMARIZATION: ActionCategory.PREMISE,
    AtomicAction.HYPOTHESIS_GENERATION: ActionCategory.REASONING,
    AtomicAction.HYPOTHESIS_VERIFICATION: ActionCategory.REASONING,
    AtomicAction.SUMMARY_FINISHED: ActionCategory.ENDING,
}


def category(action: AtomicAction) -> ActionCategory:
    return _CATEGORY[action]


def parse_action(name: str) -> AtomicAction:
    """Parse an action name; the enumeration is closed."""
    cleaned = name.strip()
    for action in AtomicAction:
        if cleaned.lower() == action.value.lower():
            return action
        # Accept snake_case spellings used by SOP files.
        if cleaned.lower().replace("_", "") == action.value.lower():
            return action
    raise UnknownAction(f"unknown atomic action: {name!r}")


# --- answer schemas ---------------------------------------------------------

@dataclass(frozen=True)
class FreeText:
    kind: str = "free_text"


@dataclass(frozen=True)
class Numeric:
    kind: str = "numeric"


@dataclass(frozen=True)
class MultipleChoice:
    options: tuple[str, ...]
    kind: str = "mcq"

    def __post_init__(self):
        if len(self.options) < 2:
            raise ValueError("multiple choice needs at least 2 options")


@dataclass(frozen=True)
class GridSchema:
    """Logic-grid schema: n houses, each attribute has exactly n values."""

    houses: int
    attributes: tuple[tuple[str, tuple[str, ...]], ...]
    kind: str = "grid"

    def __post_init__(self):
        if self.houses < 1:
            raise ValueError("grid schema needs at least 1 house")
        if len(self.attributes) < 1:
            raise ValueError("grid schema needs at least 1 attribute")

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.attributes)

    def values_for(self, attribute: str) -> tuple[str, ...]:
        for name, values in self.attributes:
            if name == attribute:
                return values
        raise KeyError(attribute)


AnswerSchema = Union[FreeText, Numeric, MultipleChoice, GridSchema]


@dataclass
class Problem:
    id: str
    statement: str
    domain_hint: Optional[str] = None
    answer_schema: AnswerSchema = field(default_factory=FreeText)


# --- check reports (owned by checker module, stored on nodes) ---------------

@dataclass
class CheckReport:
    verdict: str  # "NoError" | "Error"
    kinds: list[str] = field(default_factory=list)
    rationale: str = ""
    suggestion: Optional[str] = None

    def __post_init__(self):
        if self.verdict == "Error" and not self.kinds:
            raise ValueError("Error verdict requires at least one kind")
        if self.verdict == "NoError" and self.kinds:
            raise ValueError("NoError verdict must not carry kinds")

    @property
    def is_error(self) -> bool:
        return self.verdict == "Error"


# --- nodes and chains -------------------------------------------------------

@dataclass
class Node:
    id: str
    action: AtomicAction
    guidance: str
    content: str
    created_round: int
    check_reports: list[CheckReport] = field(default_factory=list)
    revised: bool = False
    flagged: bool = False


class ChainStatus(enum.Enum):
    ACTIVE = "Active"
    SUSPENDED = "Suspended"
    DORMANT = "Dormant"


@dataclass
class Chain:
    id: str
    parent: Optional[tuple[str, int]]  # (chain id, node index on that chain)
    node_ids: list[str] = field(default_factory=list)
    status: ChainStatus = ChainStatus.ACTIVE
    summary: Optional[str] = None


class TerminationMode(enum.Enum):
    ACTIVE_SOLVED = "ActiveSolved"
    PASSIVE_LIMIT = "PassiveLimit"


@dataclass
class Termination:
    mode: TerminationMode
    final_answer: str


@dataclass
class AtomicTree:
    problem: Problem
    chains: dict[str, Chain] = field(default_factory=dict)
    nodes: dict[str, Node] = field(default_factory=dict)
    active_chain_id: str = ""
    terminated: Optional[Termination] = None
    next_node_seq: int = 1
    next_chain_seq: int = 1


# --- operations ---------------------------------------------------------------

def new_tree(problem: Problem) -> AtomicTree:
    """Fresh tree: one empty Active root chain, zero nodes."""
    if not problem.statement.strip():
        raise EmptyProblem("problem statement is blank")
    tree = AtomicTree(problem=problem)
    root = Chain(id=_chain_id(tree), parent=None)
    tree.chains[root.id] = root
    tree.active_chain_id = root.id
    return tree


def _chain_id(tree: AtomicTree) -> str:
    cid = f"c{tree.next_chain_seq}"
    tree.next_chain_seq += 1
    return cid


def _node_id(tree: AtomicTree) -> str:
    nid = f"n{tree.next_node_seq}"
    tree.next_node_seq += 1
    return nid


def round_count(tree: AtomicTree) -> int:
    return len(tree.nodes)


def active_chain(tree: AtomicTree) -> Chain:
    return tree.chains[tree.active_chain_id]


def active_path(tree: AtomicTree) -> list[Node]:
    """Nodes from the root to the tip of the active chain, in order."""
    segments: list[list[str]] = []
    chain: Optional[Chain] = active_chain(tree)
    cutoff: Optional[int] = None
    while chain is not None:
        ids = chain.node_ids if cutoff is None else chain.node_ids[: cutoff + 1]
        segments.append(ids)
        if chain.parent is None:
            chain = None
        else:
            parent_id, index = chain.parent
            chain = tree.chains[parent_id]
            cutoff = index
    path: list[Node] = []
    for ids in reversed(segments):
        path.extend(tree.nodes[nid] for nid in ids)
    return path


def append_node(tree: AtomicTree, action: AtomicAction, guidance: str, content: str) -> str:
    """Append one executed action to the active chain; returns the node id."""
    if tree.terminated is not None:
        raise Terminated("tree is terminated")
    if action is AtomicAction.HYPOTHESIS_VERIFICATION:
        if not any(n.action is AtomicAction.HYPOTHESIS_GENERATION for n in active_path(tree)):
            raise MissingHypothesis("verification with no prior hypothesis on the active path")
    node = Node(
        id=_node_id(tree),
        action=action,
        guidance=guidance,
        content=content,
        created_round=round_count(tree) + 1,
    )
    tree.nodes[node.id] = node
    active_chain(tree).node_ids.append(node.id)
    return node.id


def branch_at(
    tree: AtomicTree,
    target_node: str,
    old_status: Optional[ChainStatus] = None,
) -> str:
    """Fork a new Active chain off a node on the active path.

    The old active chain becomes Suspended when it ran to a SummaryFinished
    ending (or the caller says so), Dormant when merely paused.
    """
    if tree.terminated is not None:
        raise Terminated("tree is terminated")
    location = _locate_on_active_path(tree, target_node)
    if location is None:
        raise NodeNotOnActivePath(f"node {target_node} is not on the active path")
    chain_id, index = location

    old = active_chain(tree)
    if old_status is None:
        ended_in_summary = bool(old.node_ids) and (
            tree.nodes[old.node_ids[-1]].action is AtomicAction.SUMMARY_FINISHED
        )
        old_status = ChainStatus.SUSPENDED if ended_in_summary else ChainStatus.DORMANT
    old.status = old_status

    new = Chain(id=_chain_id(tree), parent=(chain_id, index))
    tree.chains[new.id] = new
    tree.active_chain_id = new.id
    return new.id


def _locate_on_active_path(tree: AtomicTree, node_id: str) -> Optional[tuple[str, int]]:
    chain: Optional[Chain] = active_chain(tree)
    cutoff: Optional[int] = None
    while chain is not None:
        ids = chain.node_ids if cutoff is None else chain.node_ids[: cutoff + 1]
        if node_id in ids:
            return chain.id, ids.index(node_id)
        if chain.parent is None:
            return None
        parent_id, index = chain.parent
        chain = tree.chains[parent_id]
        cutoff = index
    return None


def set_termination(tree: AtomicTree, mode: TerminationMode, final_answer: str) -> None:
    if tree.terminated is not None:
        raise AlreadyTerminated("tree already terminated")
    tree.terminated = Termination(mode=mode, final_answer=final_answer)


def reactivate_chain(tree: AtomicTree, chain_id: str) -> None:
    """Wake a Dormant chain.  Implemented for completeness; the routing
    prompt never solicits it."""
    if tree.terminated is not None:
        raise Terminated("tree is terminated")
    target = tree.chains[chain_id]
    if target.status is not ChainStatus.DORMANT:
        raise ValueError(f"chain {chain_id} is not dormant")
    active_chain(tree).status = ChainStatus.DORMANT
    target.status = ChainStatus.ACTIVE
    tree.active_chain_id = chain_id


# --- rendering ----------------------------------------------------------------

def _render_node(step: int, node: Node) -> str:
    text = f"Step {step} ({node.action.value}): {node.content}"
    if node.revised:
        text += "\n  [revised after check]"
    return text


def _chain_header(tree: AtomicTree, chain: Chain, ordinal: int) -> str:
    header = f"Chain {ordinal} [{chain.status.value}]"
    if chain.parent is not None:
        parent_id, index = chain.parent
        parent_ord = list(tree.chains).index(parent_id) + 1
        header += f" (branched from Chain {parent_ord}, Step {index + 1})"
    return header


def render_tree(tree: AtomicTree, budget: Optional[int] = None) -> str:
    """Deterministic textual outline of the whole tree.

    Non-active chains render via their summary when present.  Under a
    character budget, nodes are dropped oldest-first (non-active chains
    first), each truncated chain showing one elision marker; the active
    chain never drops below its last ACTIVE_CHAIN_KEEP nodes.
    """
    # drops[chain_id] = number of leading nodes elided
    drops: dict[str, int] = {cid: 0 for cid in tree.chains}

    def build() -> str:
        lines = [f"Problem: {tree.problem.statement}"]
        for ordinal, (cid, chain) in enumerate(tree.chains.items(), start=1):
            lines.append("")
            lines.append(_chain_header(tree, chain, ordinal))
            if chain.status is not ChainStatus.ACTIVE and chain.summary:
                lines.append(f"Summary: {chain.summary}")
                continue
            dropped = drops[cid]
            if dropped:
                lines.append(ELISION_MARKER)
            for offset, nid in enumerate(chain.node_ids[dropped:], start=dropped + 1):
                lines.append(_render_node(offset, tree.nodes[nid]))
        return "\n".join(lines)

    text = build()
    if budget is None or len(text) <= budget:
        return text

    # Oldest-first truncation: walk non-active chains in creation order,
    # then the active chain down to its keep-suffix.
    candidates: list[tuple[str, int]] = []
    for cid, chain in tree.chains.items():
        if cid == tree.active_chain_id:
            continue
        if chain.status is not ChainStatus.ACTIVE and chain.summary:
            continue  # already compact
        candidates.extend((cid, i) for i in range(len(chain.node_ids)))
    act = active_chain(tree)
    droppable = max(0, len(act.node_ids) - ACTIVE_CHAIN_KEEP)
    candidates.extend((act.id, i) for i in range(droppable))

    for cid, _ in candidates:
        drops[cid] += 1
        text = build()
        if len(text) <= budget:
            return text
    # Everything droppable is gone; hard-cut the head as a last resort.
    return text[-budget:] if budget >= 0 else ""
