"""Cognitive routing: decide each round whether to extend the active chain,
backtrack and branch, or terminate.

Hard engine rules take priority over anything the routing backend says:

  R1. At or past the round cap, terminate passively.
  R2. Right after a hypothesis is generated, the next action is its
      verification; the backend is consulted only for guidance text.
  R3. A finish proposal on a path with no verification is converted into a
      forced hypothesis verification.
  R4. Unparseable routing output, after one re-ask, falls back to a safe
      premise-summarization step.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from . import checker as checker_mod
from . import executor as executor_mod
from . import model, prompts, sop as sop_mod
from .backends import CompletionRequest
from .errors import BackendFailure, NoBacktrackCandidate, Terminated, UnknownAction
from .executor import FinalAnswer
from .model import (
    ActionCategory,
    AtomicAction,
    AtomicTree,
    ChainStatus,
    Problem,
    TerminationMode,
)


class BacktrackReason(enum.Enum):
    INCORRECT_CONTENT = "IncorrectContent"
    KEY_NODE = "KeyNode"
    UNEXPLORED_BRANCH = "UnexploredBranch"


@dataclass(frozen=True)
class Extend:
    action: AtomicAction
    guidance: str

    def __post_init__(self):
        if not self.guidance.strip():
            raise ValueError("Extend.guidance must be non-empty")


@dataclass(frozen=True)
class Backtrack:
    target: str  # node id
    reason: BacktrackReason


@dataclass(frozen=True)
class Terminate:
    mode: TerminationMode


RoutingDecision = Union[Extend, Backtrack, Terminate]


@dataclass
class RouterConfig:
    max_rounds: int = 12
    force_verify_on_first_finish: bool = True
    max_chains: int = 4
    backtrack_after_summary: bool = True

    def __post_init__(self):
        if self.max_rounds < 2:
            raise ValueError("max_rounds must be >= 2")
        if self.max_chains < 1:
            raise ValueError("max_chains must be >= 1")


CHECKER_MODES = ("every", "reasoning-only", "ending-only", "off")


@dataclass
class SessionConfig:
    router: RouterConfig = field(default_factory=RouterConfig)
    checker_mode: str = "every"
    max_revisions: int = checker_mod.MAX_REVISIONS
    compress_chains: bool = True
    use_sop: bool = True

    def __post_init__(self):
        if self.checker_mode not in CHECKER_MODES:
            raise ValueError(f"checker_mode must be one of {CHECKER_MODES}")


@dataclass
class RoleBackends:
    """Per-role completion backends; a single backend may serve all roles."""

    routing: object
    solving: object
    checking: object
    summarizing: object

    @classmethod
    def single(cls, backend) -> "RoleBackends":
        return cls(routing=backend, solving=backend, checking=backend, summarizing=backend)


def _as_role_backends(backends) -> RoleBackends:
    if isinstance(backends, RoleBackends):
        return backends
    return RoleBackends.single(backends)


@dataclass
class SessionHooks:
    on_decision: Optional[Callable[[AtomicTree, RoutingDecision], None]] = None
    on_node: Optional[Callable[[AtomicTree, model.Node], None]] = None
    on_check: Optional[Callable[[AtomicTree, model.Node, model.CheckReport], None]] = None
    on_terminate: Optional[Callable[[AtomicTree, FinalAnswer], None]] = None


# --- routing-response parsing ---------------------------------------------------

_ACTION_LINE = re.compile(r"^\s*\**ACTION\s*[:\-]\s*(.+?)\s*\**$", re.IGNORECASE | re.MULTILINE)
_GUIDANCE_LINE = re.compile(r"^\s*\**GUIDANCE\s*[:\-]\s*(.+?)\s*$", re.IGNORECASE | re.MULTILINE)
_TARGET_LINE = re.compile(r"^\s*\**TARGET\s*[:\-]\s*(?:Step\s*)?(\d+)\s*\**\s*$", re.IGNORECASE | re.MULTILINE)
_REASON_LINE = re.compile(r"^\s*\**REASON\s*[:\-]\s*(.+?)\s*\**$", re.IGNORECASE | re.MULTILINE)

FALLBACK_GUIDANCE = (
    "Restate and organize all premises gathered so far, grouping related clues "
    "and highlighting the ones not yet used."
)


@dataclass(frozen=True)
class RoutingProposal:
    kind: str  # "extend" | "finish" | "terminate" | "backtrack"
    action: Optional[AtomicAction] = None
    guidance: str = ""


def parse_routing_response(text: str) -> Optional[RoutingProposal]:
    """Parse the ACTION/GUIDANCE footer; None when no ACTION line parses."""
    matches = list(_ACTION_LINE.finditer(text))
    if not matches:
        return None
    raw_action = matches[-1].group(1).strip().strip("*").strip()
    guidance_matches = list(_GUIDANCE_LINE.finditer(text))
    guidance = guidance_matches[-1].group(1).strip().strip("*").strip() if guidance_matches else ""

    normalized = raw_action.upper().replace(" ", "")
    if "SUMMARY<FINISHED>" in normalized or "SUMMARYFINISHED" in normalized:
        return RoutingProposal(kind="finish", action=AtomicAction.SUMMARY_FINISHED, guidance=guidance)
    if normalized.startswith("TERMINATE"):
        return RoutingProposal(kind="terminate", guidance=guidance)
    if normalized.startswith("BACKTRACK"):
        return RoutingProposal(kind="backtrack", guidance=guidance)
    try:
        action = model.parse_action(raw_action)
    except UnknownAction:
        return None
    if action is AtomicAction.SUMMARY_FINISHED:
        return RoutingProposal(kind="finish", action=action, guidance=guidance)
    return RoutingProposal(kind="extend", action=action, guidance=guidance)


def parse_guidance_only(text: str) -> Optional[str]:
    matches = list(_GUIDANCE_LINE.finditer(text))
    if matches:
        return matches[-1].group(1).strip().strip("*").strip()
    return None


# --- decision logic -------------------------------------------------------------

def _chain_completed(tree: AtomicTree) -> bool:
    chain = model.active_chain(tree)
    return bool(chain.node_ids) and (
        tree.nodes[chain.node_ids[-1]].action is AtomicAction.SUMMARY_FINISHED
    )


def _has_verification(path: list[model.Node]) -> bool:
    return any(n.action is AtomicAction.HYPOTHESIS_VERIFICATION for n in path)


def _has_hypothesis(path: list[model.Node]) -> bool:
    return any(n.action is AtomicAction.HYPOTHESIS_GENERATION for n in path)


def _verification_guidance(path: list[model.Node]) -> str:
    for node in reversed(path):
        if node.action is AtomicAction.HYPOTHESIS_GENERATION:
            excerpt = node.content.strip().replace("\n", " ")
            if len(excerpt) > 300:
                excerpt = excerpt[:300] + "..."
            return (
                "Verify the most recently proposed hypothesis against every premise, "
                f"one premise at a time. The hypothesis step was: {excerpt}"
            )
    return "Verify the current conclusion against every premise, one premise at a time."


def _routing_call(tree: AtomicTree, backend, sop_hints: str) -> str:
    bundle = prompts.build_routing_prompt(tree, sop_hints)
    result = backend.complete(
        CompletionRequest(
            messages=bundle.messages,
            temperature=bundle.params.temperature,
            max_tokens=bundle.params.max_tokens,
            tag="routing",
        )
    )
    return result.text


def decide(
    tree: AtomicTree,
    config: RouterConfig,
    backend,
    sop_hints: str = "",
) -> RoutingDecision:
    """One routing decision honoring R1-R4; see module docstring."""
    if tree.terminated is not None:
        raise Terminated("tree is terminated")

    # R1: hard round cap, no backend consultation.
    if model.round_count(tree) >= config.max_rounds:
        return Terminate(TerminationMode.PASSIVE_LIMIT)

    path = model.active_path(tree)

    # Completed chain: backtrack once, then conclude.
    if _chain_completed(tree):
        explored_before = any(
            c.status is not ChainStatus.ACTIVE and c.id != tree.active_chain_id
            for c in tree.chains.values()
        )
        if (
            not config.backtrack_after_summary
            or explored_before
            or len(tree.chains) >= config.max_chains
            or model.round_count(tree) + 2 > config.max_rounds
        ):
            return Terminate(TerminationMode.ACTIVE_SOLVED)
        target, reason = select_backtrack_target(tree, backend)
        return Backtrack(target=target, reason=reason)

    # R2: a fresh hypothesis is verified promptly; backend gives guidance only.
    if path and path[-1].action is AtomicAction.HYPOTHESIS_GENERATION:
        guidance = None
        try:
            guidance = parse_guidance_only(_routing_call(tree, backend, sop_hints))
        except BackendFailure:
            raise
        return Extend(
            AtomicAction.HYPOTHESIS_VERIFICATION,
            guidance or _verification_guidance(path),
        )

    # R4 envelope: parse the proposal, one re-ask, then safe fallback.
    proposal = parse_routing_response(_routing_call(tree, backend, sop_hints))
    if proposal is None:
        proposal = parse_routing_response(_routing_call(tree, backend, sop_hints))
    if proposal is None:
        return Extend(AtomicAction.PREMISE_SUMMARIZATION, FALLBACK_GUIDANCE)

    if proposal.kind in ("finish", "terminate"):
        # R3: the first finish claim on an unverified path is not accepted.
        if config.force_verify_on_first_finish and not _has_verification(path):
            if _has_hypothesis(path):
                return Extend(AtomicAction.HYPOTHESIS_VERIFICATION, _verification_guidance(path))
            # Nothing to verify yet: demand an explicit hypothesis first.
            return Extend(
                AtomicAction.HYPOTHESIS_GENERATION,
                "Before concluding, state the proposed solution explicitly as "
                "'Hypothesis 1:' so it can be verified.",
            )
        if proposal.kind == "terminate":
            return Terminate(TerminationMode.ACTIVE_SOLVED)
        return Extend(
            AtomicAction.SUMMARY_FINISHED,
            proposal.guidance
            or "Assemble the verified conclusions into the complete final answer.",
        )

    if proposal.kind == "backtrack":
        if len(tree.chains) >= config.max_chains:
            return Terminate(TerminationMode.PASSIVE_LIMIT)
        if not path:
            return Extend(AtomicAction.PREMISE_SUMMARIZATION, FALLBACK_GUIDANCE)
        target, reason = select_backtrack_target(tree, backend)
        return Backtrack(target=target, reason=reason)

    action = proposal.action
    # A verification with no hypothesis to verify cannot be appended; route
    # the intent into generating the missing hypothesis instead.
    if action is AtomicAction.HYPOTHESIS_VERIFICATION and not _has_hypothesis(path):
        return Extend(
            AtomicAction.HYPOTHESIS_GENERATION,
            proposal.guidance or "Propose explicit hypotheses for the current sub-problem.",
        )
    return Extend(action, proposal.guidance or _default_guidance(action))


def _default_guidance(action: AtomicAction) -> str:
    defaults = {
        AtomicAction.PREMISE_DISCOVERY: (
            "Identify the basic conditions and constraints of the problem, extract "
            "necessary rules, and organize implicit constraints."
        ),
        AtomicAction.PREMISE_RETRIEVAL: (
            "Retrieve the clues and premise information pertinent to the current step."
        ),
        AtomicAction.PREMISE_SUMMARIZATION: FALLBACK_GUIDANCE,
        AtomicAction.HYPOTHESIS_GENERATION: (
            "Propose necessary possible hypotheses for the current sub-problem, each "
            "prefixed 'Hypothesis <k>:'."
        ),
        AtomicAction.HYPOTHESIS_VERIFICATION: (
            "Verify the pending hypothesis against every premise, one at a time."
        ),
        AtomicAction.SUMMARY_FINISHED: (
            "Assemble the verified conclusions into the complete final answer."
        ),
    }
    return defaults[action]


def select_backtrack_target(tree: AtomicTree, backend) -> tuple[str, BacktrackReason]:
    """Pick a node on the active path to branch from, per the backtracking
    prompt's three target categories; deterministic fallback to the deepest
    hypothesis-generation node."""
    path = model.active_path(tree)
    if not path:
        raise NoBacktrackCandidate("active path has no nodes")

    for attempt in range(2):
        bundle = prompts.build_backtracking_prompt(tree)
        result = backend.complete(
            CompletionRequest(
                messages=bundle.messages,
                temperature=bundle.params.temperature,
                max_tokens=bundle.params.max_tokens,
                tag="routing",
            )
        )
        target_match = list(_TARGET_LINE.finditer(result.text))
        if not target_match:
            continue
        step = int(target_match[-1].group(1))
        if not 1 <= step <= len(path):
            continue
        reason = BacktrackReason.KEY_NODE
        reason_match = list(_REASON_LINE.finditer(result.text))
        if reason_match:
            token = re.sub(r"[^a-z]", "", reason_match[-1].group(1).lower())
            for candidate in BacktrackReason:
                if re.sub(r"[^a-z]", "", candidate.value.lower()) == token:
                    reason = candidate
                    break
        return path[step - 1].id, reason

    # Fallback: deepest hypothesis-generation node, else the last node.
    for node in reversed(path):
        if node.action is AtomicAction.HYPOTHESIS_GENERATION:
            return node.id, BacktrackReason.KEY_NODE
    return path[-1].id, BacktrackReason.KEY_NODE


# --- session loop ----------------------------------------------------------------

def _checker_applies(mode: str, action: AtomicAction) -> bool:
    if mode == "off":
        return False
    if mode == "every":
        return True
    cat = model.category(action)
    if mode == "reasoning-only":
        return cat is ActionCategory.REASONING
    return cat is ActionCategory.ENDING  # ending-only


def run_session(
    problem: Problem,
    config: Optional[SessionConfig] = None,
    backends=None,
    sop_registry: Optional[sop_mod.SopRegistry] = None,
    hooks: Optional[SessionHooks] = None,
) -> tuple[AtomicTree, FinalAnswer]:
    """Full solving loop: decide -> execute -> check -> (branch | terminate).

    On BackendFailure the partial tree is preserved on the raised exception
    (``exc.tree``)."""
    config = config or SessionConfig()
    roles = _as_role_backends(backends)
    hooks = hooks or SessionHooks()

    tree = model.new_tree(problem)
    active_sop = None
    if config.use_sop and sop_registry is not None:
        active_sop = sop_registry.get(sop_mod.triage(problem, sop_registry))
    sop_hints = active_sop.scheduling_hints if active_sop else ""

    try:
        while True:
            decision = decide(tree, config.router, roles.routing, sop_hints)
            if hooks.on_decision:
                hooks.on_decision(tree, decision)

            if isinstance(decision, Terminate):
                final = executor_mod.finalize(tree, roles.summarizing, decision.mode)
                model.set_termination(tree, decision.mode, final.text)
                if hooks.on_terminate:
                    hooks.on_terminate(tree, final)
                return tree, final

            if isinstance(decision, Backtrack):
                old_chain = model.active_chain(tree)
                model.branch_at(tree, decision.target)
                if config.compress_chains and old_chain.node_ids:
                    executor_mod.compress_chain(tree, old_chain, roles.summarizing)
                continue

            guidance_extra = (
                sop_mod.sop_guidance(active_sop, decision.action) if active_sop else ""
            )
            node = executor_mod.execute(
                tree, decision.action, decision.guidance, roles.solving, guidance_extra
            )
            if hooks.on_node:
                hooks.on_node(tree, node)
            if _checker_applies(config.checker_mode, node.action):
                checker_mod.run_check_cycle(
                    tree, node, roles.checking, roles.solving, config.max_revisions
                )
                if hooks.on_check and node.check_reports:
                    hooks.on_check(tree, node, node.check_reports[-1])
    except BackendFailure as exc:
        exc.tree = tree  # preserve the partial trace for callers
        raise
