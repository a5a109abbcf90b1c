"""Standard Operating Procedures: domain triage and per-action strategy text.

SOPs live in ``.sop`` files: UTF-8, INI-like sections.

    [meta]
    domain = logical-reasoning

    [schedule]
    <free text injected into routing prompts>

    [action:premise_discovery]
    <strategy text for that action>

    [example]
    problem = <excerpt>
    step = <worked step>

Action section names use snake_case action names; unknown names are a parse
error.  The registry always carries a default SOP.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from . import prompts
from .backends import CompletionRequest
from .errors import MissingDefault, ParseError, UnknownAction
from .model import AtomicAction, Problem, parse_action

log = logging.getLogger(__name__)

DEFAULT_DOMAIN = "default"


@dataclass
class SopExample:
    problem_excerpt: str
    worked_step: str


@dataclass
class Sop:
    domain: str
    action_strategies: dict[AtomicAction, str] = field(default_factory=dict)
    scheduling_hints: str = ""
    examples: list[SopExample] = field(default_factory=list)

    def __post_init__(self):
        if not self.domain.strip():
            raise ValueError("SOP domain must be non-empty")


@dataclass
class SopRegistry:
    sops: dict[str, Sop]
    default: Sop

    def get(self, domain: str) -> Sop:
        return self.sops.get(domain, self.default)

    @property
    def domains(self) -> list[str]:
        return sorted(self.sops)


def sop_guidance(sop: Sop, action: AtomicAction) -> str:
    """The loaded strategy string for an action, verbatim; empty if none."""
    return sop.action_strategies.get(action, "")


# --- .sop parsing -------------------------------------------------------------

def parse_sop(text: str, source: str = "<string>") -> Sop:
    domain = ""
    schedule_lines: list[str] = []
    strategies: dict[AtomicAction, str] = {}
    examples: list[SopExample] = []

    section: Optional[str] = None
    section_action: Optional[AtomicAction] = None
    buffer: list[str] = []
    example_fields: dict[str, str] = {}

    def flush(line_no: int):
        nonlocal domain
        if section is None:
            return
        body = "\n".join(buffer).strip()
        if section == "meta":
            for raw in body.splitlines():
                if "=" in raw:
                    key, value = raw.split("=", 1)
                    if key.strip() == "domain":
                        domain = value.strip()
        elif section == "schedule":
            schedule_lines.append(body)
        elif section == "action":
            strategies[section_action] = body
        elif section == "example":
            if "problem" not in example_fields or "step" not in example_fields:
                raise ParseError("example needs problem= and step=", source, line_no)
            examples.append(SopExample(example_fields["problem"], example_fields["step"]))

    for line_no, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            flush(line_no)
            buffer = []
            example_fields = {}
            header = stripped[1:-1].strip()
            if header == "meta" or header == "schedule" or header == "example":
                section, section_action = header, None
            elif header.startswith("action:"):
                name = header.split(":", 1)[1].strip()
                try:
                    section_action = parse_action(name)
                except UnknownAction as exc:
                    raise ParseError(str(exc), source, line_no)
                section = "action"
            else:
                raise ParseError(f"unknown section [{header}]", source, line_no)
            continue
        if section == "example" and "=" in raw:
            key, value = raw.split("=", 1)
            example_fields[key.strip()] = value.strip()
        buffer.append(raw)
    flush(len(text.splitlines()) + 1)

    if not domain:
        raise ParseError("missing [meta] domain", source)
    return Sop(
        domain=domain,
        action_strategies=strategies,
        scheduling_hints="\n".join(s for s in schedule_lines if s),
        examples=examples,
    )


def load_sops(path: Union[str, Path]) -> SopRegistry:
    """Load every ``*.sop`` file under a directory into a registry."""
    root = Path(path)
    sops: dict[str, Sop] = {}
    for file in sorted(root.glob("*.sop")):
        sop = parse_sop(file.read_text(encoding="utf-8"), source=str(file))
        if sop.domain in sops:
            log.warning("duplicate SOP domain %s in %s: last wins", sop.domain, file)
        sops[sop.domain] = sop
    if DEFAULT_DOMAIN not in sops:
        raise MissingDefault(f"no {DEFAULT_DOMAIN}.sop found under {root}")
    return SopRegistry(sops=sops, default=sops[DEFAULT_DOMAIN])


def builtin_registry() -> SopRegistry:
    """The two shipped SOPs (science, logic) plus the default."""
    root = resources.files("atomic_reasoner").joinpath("data").joinpath("sops")
    sops: dict[str, Sop] = {}
    for file in sorted(root.iterdir()):
        if file.name.endswith(".sop"):
            sop = parse_sop(file.read_text(encoding="utf-8"), source=file.name)
            sops[sop.domain] = sop
    return SopRegistry(sops=sops, default=sops[DEFAULT_DOMAIN])


# --- triage -------------------------------------------------------------------

def _load_keywords() -> dict[str, list[str]]:
    data = (
        resources.files("atomic_reasoner")
        .joinpath("data")
        .joinpath("triage_keywords.json")
        .read_text(encoding="utf-8")
    )
    return json.loads(data)


_KEYWORDS: Optional[dict[str, list[str]]] = None


def triage_keywords() -> dict[str, list[str]]:
    global _KEYWORDS
    if _KEYWORDS is None:
        _KEYWORDS = _load_keywords()
    return _KEYWORDS


def triage(problem: Problem, registry: SopRegistry, backend=None) -> str:
    """Two-stage domain classification.

    Stage 1: keyword heuristics over the statement (configured keyword lists).
    Stage 2: one constrained backend call when supplied and stage 1 was
    inconclusive.  Always returns a label present in the registry.
    """
    if problem.domain_hint and problem.domain_hint in registry.sops:
        return problem.domain_hint
    statement = problem.statement.lower()
    scores: dict[str, int] = {}
    for domain, words in triage_keywords().items():
        if domain not in registry.sops:
            continue
        score = sum(1 for w in words if w.lower() in statement)
        if score:
            scores[domain] = score
    if scores:
        # deterministic: highest score, ties broken alphabetically
        return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]

    if backend is not None:
        labels = registry.domains
        bundle = prompts.build_triage_prompt(problem.statement, labels)
        result = backend.complete(
            CompletionRequest(
                messages=bundle.messages,
                temperature=bundle.params.temperature,
                max_tokens=bundle.params.max_tokens,
                tag="triage",
            )
        )
        for line in result.text.splitlines():
            if line.strip().lower().startswith("domain:"):
                label = line.split(":", 1)[1].strip()
                if label in registry.sops:
                    return label
    return DEFAULT_DOMAIN
