"""Shipped scripted session recordings usable as deterministic end-to-end
fixtures: each bundles a task, a tag-keyed backend script, and the gold
answer."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

from . import bench as bench_mod
from .backends import ScriptedBackend
from .bench import Task

CASE_NAMES = ("case1", "case2")


@dataclass
class CaseFixture:
    name: str
    task: Task
    script: dict

    def backend(self) -> ScriptedBackend:
        """A fresh scripted backend positioned at the start of the recording."""
        return ScriptedBackend(
            {tag: list(queue) if isinstance(queue, list) else queue
             for tag, queue in self.script.items()}
        )


def load_case(name: str) -> CaseFixture:
    if name not in CASE_NAMES:
        raise ValueError(f"unknown case {name!r}; available: {CASE_NAMES}")
    raw = (
        resources.files("atomic_reasoner")
        .joinpath(f"data/cases/{name}.json")
        .read_text(encoding="utf-8")
    )
    record = json.loads(raw)
    task = bench_mod._task_from_record(record, record["format"], record.get("suite", ""))
    return CaseFixture(name=name, task=task, script=record["script"])
