"""Benchmark harness: task files, scoring, multi-trial aggregation, a
single-pass baseline, and oracle helpers for generated puzzles."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

from . import answers, executor as executor_mod, metrics, puzzles
from . import model, router
from .backends import ChatMessage, CompletionRequest, ScriptedBackend, TallyBackend
from .errors import BackendFailure, EmptySuite
from .model import FreeText, GridSchema, MultipleChoice, Numeric, Problem

TASK_FORMATS = ("mcq", "grid", "numeric")


@dataclass
class Task:
    id: str
    statement: str
    schema: object  # answer schema (same family as Problem.answer_schema)
    gold: object  # letter (mcq), grid dict (grid), or string (numeric)
    split: Optional[str] = None  # "easy" | "hard"
    suite: str = ""
    clues: list = field(default_factory=list)  # structured clues, grid tasks only

    def to_problem(self) -> Problem:
        return Problem(id=self.id, statement=self.statement, answer_schema=self.schema)


@dataclass
class Verdict:
    correct: bool
    partial: float
    extracted: Optional[object] = None
    failure: Optional[str] = None  # "NoAnswerFound" | "SchemaMismatch" | "BackendFailure"

    def __post_init__(self):
        if self.correct and self.partial != 1.0:
            raise ValueError("correct verdicts must have partial = 1.0")


@dataclass
class Reject:
    line: int
    reason: str


# --- task files (JSON lines, one task per line) ----------------------------------

def _task_from_record(record: dict, format: str, suite: str) -> Task:
    statement = record["statement"]
    if not str(statement).strip():
        raise ValueError("blank statement")
    if format == "mcq":
        options = record["options"]
        schema = MultipleChoice(options=tuple(options))
        gold = str(record["gold"]).upper()
        if gold not in answers.option_letters(schema):
            raise ValueError(f"gold {gold!r} not among option letters")
    elif format == "grid":
        schema = metrics.schema_from_json({"kind": "grid", **record["schema"]})
        gold = {int(h): dict(cells) for h, cells in record["gold"].items()}
        for house in range(1, schema.houses + 1):
            cells = gold.get(house)
            if cells is None:
                raise ValueError(f"gold missing house {house}")
            for attr, values in schema.attributes:
                if cells.get(attr) not in values:
                    raise ValueError(f"gold house {house} has bad {attr!r} cell")
    elif format == "numeric":
        schema = Numeric()
        gold = str(record["gold"])
    else:
        raise ValueError(f"unknown task format {format!r}")
    task = Task(
        id=str(record.get("id", "")),
        statement=statement,
        schema=schema,
        gold=gold,
        split=record.get("split"),
        suite=suite or record.get("suite", ""),
    )
    if format == "grid" and "clues" in record:
        task.clues = [puzzles.clue_from_json(c) for c in record["clues"]]
    return task


def load_tasks(
    path: Union[str, Path],
    format: str,
    suite: str = "",
) -> tuple[list[Task], list[Reject]]:
    """Load a line-delimited task file; malformed lines become rejects, never
    silent drops."""
    if format not in TASK_FORMATS:
        raise ValueError(f"format must be one of {TASK_FORMATS}")
    text = Path(path).read_text(encoding="utf-8")
    tasks: list[Task] = []
    rejects: list[Reject] = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            tasks.append(_task_from_record(record, format, suite))
        except (ValueError, KeyError, TypeError) as exc:
            rejects.append(Reject(line=line_no, reason=f"SchemaMismatch: {exc}"))
    if not tasks and not rejects:
        raise EmptySuite(f"no tasks in {path}")
    return tasks, rejects


def task_to_record(task: Task, format: str) -> dict:
    record: dict = {"id": task.id, "statement": task.statement}
    if task.split:
        record["split"] = task.split
    if task.suite:
        record["suite"] = task.suite
    if format == "mcq":
        record["options"] = list(task.schema.options)
        record["gold"] = task.gold
    elif format == "grid":
        record["schema"] = {
            "houses": task.schema.houses,
            "attributes": [[n, list(v)] for n, v in task.schema.attributes],
        }
        record["gold"] = {str(h): cells for h, cells in task.gold.items()}
        if task.clues:
            record["clues"] = [puzzles.clue_to_json(c) for c in task.clues]
    elif format == "numeric":
        record["gold"] = task.gold
    return record


# --- scoring ------------------------------------------------------------------------

def score(task: Task, final_text: str) -> Verdict:
    """Total and deterministic scoring of a final-answer text."""
    schema = task.schema
    if isinstance(schema, MultipleChoice):
        extracted = answers.extract_mcq(final_text, answers.option_letters(schema))
        if extracted is None:
            return Verdict(correct=False, partial=0.0, failure="NoAnswerFound")
        correct = extracted == task.gold
        return Verdict(correct=correct, partial=1.0 if correct else 0.0, extracted=extracted)

    if isinstance(schema, GridSchema):
        grid = answers.parse_grid(final_text, schema)
        total = schema.houses * len(schema.attributes)
        hits = 0
        for house in range(1, schema.houses + 1):
            for attr in schema.attribute_names:
                if grid[house][attr] is not None and grid[house][attr] == task.gold[house][attr]:
                    hits += 1
        partial = hits / total
        any_cell = any(v is not None for cells in grid.values() for v in cells.values())
        return Verdict(
            correct=(partial == 1.0),
            partial=partial,
            extracted=grid,
            failure=None if any_cell else "NoAnswerFound",
        )

    if isinstance(schema, Numeric):
        extracted = answers.normalize_numeric(final_text)
        if extracted is None:
            return Verdict(correct=False, partial=0.0, failure="NoAnswerFound")
        gold = answers.normalize_numeric(str(task.gold)) or str(task.gold)
        correct = answers.numeric_equal(extracted, gold)
        return Verdict(correct=correct, partial=1.0 if correct else 0.0, extracted=extracted)

    # free text: exact match after whitespace normalization
    extracted = final_text.strip()
    correct = extracted == str(task.gold).strip()
    return Verdict(correct=correct, partial=1.0 if correct else 0.0, extracted=extracted)


# --- puzzle task construction ---------------------------------------------------------

def gen_puzzle(seed: int, houses: int, attributes: int) -> tuple[Task, dict[int, dict[str, str]]]:
    """Generate one unique-solution logic-grid Task plus its gold grid."""
    schema, clues, solution = puzzles.generate_puzzle(seed, houses, attributes)
    gold = puzzles.assignment_to_grid(schema, solution)
    statement = puzzles.render_statement(schema, clues)
    task = Task(
        id=f"puzzle-s{seed}-h{houses}-a{attributes}",
        statement=statement,
        schema=schema,
        gold=gold,
        split="easy" if houses <= 3 else "hard",
        suite="generated-puzzles",
        clues=clues,
    )
    return task, gold


def brute_solve_task(task: Task, limit: Optional[int] = None) -> list[dict[int, dict[str, str]]]:
    """Oracle wrapper: all consistent grids for a grid task's clue set."""
    if not isinstance(task.schema, GridSchema):
        raise ValueError("brute_solve_task requires a grid task")
    solutions = puzzles.brute_solve(task.schema, task.clues, limit=limit)
    return [puzzles.assignment_to_grid(task.schema, s) for s in solutions]


def oracle_session_backend(task: Task) -> ScriptedBackend:
    """Scripted backend whose answers come from the brute-force oracle,
    driving a clean single-chain session to the correct solution."""
    solutions = brute_solve_task(task, limit=2)
    if len(solutions) != 1:
        raise ValueError(f"task {task.id} does not have a unique solution")
    answer_block = answers.format_grid_answer(task.schema, solutions[0])
    return ScriptedBackend(
        {
            "routing": [
                "ACTION: PremiseDiscovery\nGUIDANCE: List every clue with a number.",
                "ACTION: HypothesisGeneration\nGUIDANCE: Propose the full assignment.",
                "GUIDANCE: Check the proposed assignment against every clue.",
                "ACTION: SUMMARY<FINISHED>\nGUIDANCE: State the verified assignment.",
            ],
            "solve": [
                "The clues are enumerated and classified.",
                f"Hypothesis 1: the assignment is\n{answer_block}",
                "Checked every clue against Hypothesis 1: all satisfied.",
                f"All clues verified.\n{answer_block}",
            ],
            "check": "Check Result: No error.",
            "summarize": f"All clues are satisfied by the assignment.\n{answer_block}",
        }
    )


# --- strategies and suite execution ----------------------------------------------------

def single_pass(task: Task, backend) -> str:
    """Baseline: one bare solver call with the problem and format instruction."""
    instruction = executor_mod.format_instruction_for(task.schema)
    request = CompletionRequest(
        messages=[
            ChatMessage("system", "You are a careful problem solver."),
            ChatMessage("user", f"{task.statement}\n\n{instruction}"),
        ],
        temperature=0.7,
        tag="solve",
    )
    return backend.complete(request).text


@dataclass
class TrialResult:
    task_id: str
    trial: int
    verdict: Verdict
    rounds: int = 0


@dataclass
class BenchReport:
    suite: str
    strategy: str
    trials: int
    results: list[TrialResult]
    prompt_tokens: int = 0
    completion_tokens: int = 0
    wall_time_s: float = 0.0

    def mean_success(self, split: Optional[str] = None, task_splits: Optional[dict] = None) -> float:
        selected = self.results
        if split is not None and task_splits is not None:
            selected = [r for r in selected if task_splits.get(r.task_id) == split]
        if not selected:
            return 0.0
        return sum(1.0 if r.verdict.correct else 0.0 for r in selected) / len(selected)

    def mean_partial(self) -> float:
        if not self.results:
            return 0.0
        return sum(r.verdict.partial for r in self.results) / len(self.results)

    def to_json(self, tasks: Optional[list[Task]] = None) -> dict:
        task_splits = {t.id: t.split for t in tasks} if tasks else {}
        aggregates = {"overall": self.mean_success(), "mean_partial": self.mean_partial()}
        for split in sorted({s for s in task_splits.values() if s}):
            aggregates[split] = self.mean_success(split, task_splits)
        return {
            "suite": self.suite,
            "strategy": self.strategy,
            "trials": self.trials,
            "aggregates": aggregates,
            "usage": {
                "prompt_tokens": self.prompt_tokens,
                "completion_tokens": self.completion_tokens,
                "wall_time_s": round(self.wall_time_s, 3),
            },
            "results": [
                {
                    "task_id": r.task_id,
                    "trial": r.trial,
                    "correct": r.verdict.correct,
                    "partial": r.verdict.partial,
                    "failure": r.verdict.failure,
                    "rounds": r.rounds,
                }
                for r in self.results
            ],
        }


BackendLike = object
BackendFactory = Callable[[Task], BackendLike]


def run_benchmark(
    tasks: list[Task],
    strategy: str,
    backend: Union[BackendLike, BackendFactory],
    trials: int = 3,
    workers: Optional[int] = None,
    session_config: Optional[router.SessionConfig] = None,
    sop_registry=None,
    suite: str = "",
    trace_sink: Optional[Callable[[Task, model.AtomicTree, Verdict], None]] = None,
) -> BenchReport:
    """Run every task ``trials`` times under a strategy ('ar' or
    'single-pass').  Task-level parallelism; per-task trials run
    sequentially.  A callable ``backend`` is treated as a per-task factory."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if strategy not in ("ar", "single-pass"):
        raise ValueError(f"unknown strategy {strategy!r}")
    if workers is None:
        import os

        workers = min(8, os.cpu_count() or 1)

    factory: BackendFactory
    if callable(backend) and not hasattr(backend, "complete"):
        factory = backend  # type: ignore[assignment]
    else:
        factory = lambda task: backend  # noqa: E731

    tally_total = {"prompt": 0, "completion": 0}
    started = time.monotonic()

    def run_task(task: Task) -> list[TrialResult]:
        results = []
        for trial in range(1, trials + 1):
            tally = TallyBackend(factory(task))
            rounds = 0
            try:
                if strategy == "ar":
                    tree, final = router.run_session(
                        task.to_problem(),
                        config=session_config,
                        backends=tally,
                        sop_registry=sop_registry,
                    )
                    rounds = model.round_count(tree)
                    verdict = score(task, final.text)
                    if trace_sink:
                        trace_sink(task, tree, verdict)
                else:
                    verdict = score(task, single_pass(task, tally))
            except BackendFailure:
                verdict = Verdict(correct=False, partial=0.0, failure="BackendFailure")
            tally_total["prompt"] += tally.prompt_tokens
            tally_total["completion"] += tally.completion_tokens
            results.append(TrialResult(task_id=task.id, trial=trial, verdict=verdict, rounds=rounds))
        return results

    all_results: list[TrialResult] = []
    if workers <= 1 or len(tasks) <= 1:
        for task in tasks:
            all_results.extend(run_task(task))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for chunk in pool.map(run_task, tasks):
                all_results.extend(chunk)

    return BenchReport(
        suite=suite or (tasks[0].suite if tasks else ""),
        strategy=strategy,
        trials=trials,
        results=all_results,
        prompt_tokens=tally_total["prompt"],
        completion_tokens=tally_total["completion"],
        wall_time_s=time.monotonic() - started,
    )
