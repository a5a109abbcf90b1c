"""Prompt construction from plain-text template files.

Templates live in ``templates/`` and use ``{{name}}`` placeholders.  All
builders are pure functions of their inputs, so prompt construction is
deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Optional

from . import model
from .backends import ChatMessage

RENDER_BUDGET = 12000  # characters of tree context shown to any agent

# Sampling defaults per role (mirrors common slow-thinking framework settings).
ROUTING_TEMPERATURE = 0.2
SOLVE_TEMPERATURE = 0.7
CHECK_TEMPERATURE = 0.0


@dataclass
class SamplingParams:
    temperature: float = SOLVE_TEMPERATURE
    max_tokens: int = 2048
    seed: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature out of range [0, 2]")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")


@dataclass
class PromptBundle:
    messages: list[ChatMessage]
    params: SamplingParams = field(default_factory=SamplingParams)

    def __post_init__(self):
        if not self.messages or self.messages[0].role != "system":
            raise ValueError("first message must have role system")


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    return (
        resources.files("atomic_reasoner")
        .joinpath("templates")
        .joinpath(f"{name}.txt")
        .read_text(encoding="utf-8")
    )


def fill(template: str, **values: str) -> str:
    text = template
    for key, value in values.items():
        text = text.replace("{{" + key + "}}", value)
    return text


def build_routing_prompt(
    tree: model.AtomicTree,
    sop_hints: str = "",
    seed: Optional[int] = None,
) -> PromptBundle:
    body = fill(
        load_template("routing_expansion"),
        sop=sop_hints,
        problem=tree.problem.statement,
        tree=model.render_tree(tree, RENDER_BUDGET),
    )
    return PromptBundle(
        messages=[
            ChatMessage("system", "You are an expert routing agent for structured reasoning."),
            ChatMessage("user", body),
        ],
        params=SamplingParams(temperature=ROUTING_TEMPERATURE, seed=seed),
    )


def build_expansion_prompt(
    tree: model.AtomicTree,
    guidance: str,
    sop_guidance: str = "",
    seed: Optional[int] = None,
) -> PromptBundle:
    parts = [
        "# The problem that needs to be solved is:",
        tree.problem.statement,
        "",
        "# The reasoning steps up to the current point:",
        model.render_tree(tree, RENDER_BUDGET),
        "",
        "# The expert's guidance for the current step:",
        guidance,
    ]
    if sop_guidance:
        parts += ["", "# Domain procedure for this action:", sop_guidance]
    return PromptBundle(
        messages=[
            ChatMessage("system", load_template("solver_system")),
            ChatMessage("user", "\n".join(parts)),
        ],
        params=SamplingParams(temperature=SOLVE_TEMPERATURE, seed=seed),
    )


def render_active_path(tree: model.AtomicTree) -> str:
    lines = []
    for step, node in enumerate(model.active_path(tree), start=1):
        lines.append(f"Step {step} ({node.action.value}): {node.content}")
    return "\n".join(lines)


def build_backtracking_prompt(tree: model.AtomicTree, seed: Optional[int] = None) -> PromptBundle:
    body = fill(
        load_template("backtracking"),
        problem=tree.problem.statement,
        tree=model.render_tree(tree, RENDER_BUDGET),
        chain=render_active_path(tree),
    )
    return PromptBundle(
        messages=[
            ChatMessage("system", "You are a routing agent reviewing a finished reasoning chain."),
            ChatMessage("user", body),
        ],
        params=SamplingParams(temperature=ROUTING_TEMPERATURE, seed=seed),
    )


def build_checker_prompt(error_definitions: str, process: str, seed: Optional[int] = None) -> PromptBundle:
    body = fill(load_template("checker"), errors=error_definitions, process=process)
    return PromptBundle(
        messages=[
            ChatMessage("system", "You are a meticulous reasoning checker."),
            ChatMessage("user", body),
        ],
        params=SamplingParams(temperature=CHECK_TEMPERATURE, seed=seed),
    )


def build_summary_prompt(
    tree: model.AtomicTree,
    format_instruction: str,
    best_effort: bool = False,
    seed: Optional[int] = None,
) -> PromptBundle:
    instruction = format_instruction
    if best_effort:
        instruction = (
            "The round budget was exhausted before the reasoning concluded; "
            "give your best-effort answer from the partial reasoning.\n" + instruction
        )
    body = fill(
        load_template("summary"),
        problem=tree.problem.statement,
        tree=model.render_tree(tree, RENDER_BUDGET),
        format_instruction=instruction,
    )
    return PromptBundle(
        messages=[
            ChatMessage("system", "You conclude reasoning sessions with a final answer."),
            ChatMessage("user", body),
        ],
        params=SamplingParams(temperature=CHECK_TEMPERATURE, seed=seed),
    )


def build_compression_prompt(
    tree: model.AtomicTree,
    chain: model.Chain,
    seed: Optional[int] = None,
) -> PromptBundle:
    lines = []
    for step, nid in enumerate(chain.node_ids, start=1):
        node = tree.nodes[nid]
        lines.append(f"Step {step} ({node.action.value}): {node.content}")
    body = fill(
        load_template("compression"),
        problem=tree.problem.statement,
        chain="\n".join(lines),
    )
    return PromptBundle(
        messages=[
            ChatMessage("system", "You compress finished reasoning chains into short summaries."),
            ChatMessage("user", body),
        ],
        params=SamplingParams(temperature=CHECK_TEMPERATURE, max_tokens=512, seed=seed),
    )


def build_triage_prompt(statement: str, domains: list[str], seed: Optional[int] = None) -> PromptBundle:
    body = fill(
        load_template("triage"),
        domains="\n".join(f"- {d}" for d in domains),
        problem=statement,
    )
    return PromptBundle(
        messages=[
            ChatMessage("system", "You classify problems into reasoning domains."),
            ChatMessage("user", body),
        ],
        params=SamplingParams(temperature=CHECK_TEMPERATURE, max_tokens=64, seed=seed),
    )
