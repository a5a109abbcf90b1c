import json

import pytest

from atomic_reasoner import bench, puzzles, router, sop
from atomic_reasoner.backends import ScriptedBackend
from atomic_reasoner.errors import EmptySuite
from atomic_reasoner.model import GridSchema, MultipleChoice, Numeric


def mcq_record(id="t1", gold="A"):
    return {
        "id": id,
        "statement": "Pick one.",
        "options": ["(A) first", "(B) second"],
        "gold": gold,
    }


def grid_record():
    task, _ = bench.gen_puzzle(0, 3, 2)
    return bench.task_to_record(task, "grid")


def write_suite(tmp_path, records, name="suite.jsonl"):
    path = tmp_path / name
    path.write_text(
        "\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8"
    )
    return path


class TestLoadTasks:
    def test_loads_mcq_suite(self, tmp_path):
        path = write_suite(tmp_path, [mcq_record(), mcq_record(id="t2", gold="B")])
        tasks, rejects = bench.load_tasks(path, "mcq")
        assert len(tasks) == 2 and rejects == []
        assert isinstance(tasks[0].schema, MultipleChoice)

    def test_malformed_lines_become_rejects(self, tmp_path):
        path = tmp_path / "suite.jsonl"
        lines = [
            json.dumps(mcq_record()),
            "{broken json",
            json.dumps({"statement": "no gold or options"}),
            json.dumps(mcq_record(id="t3", gold="Z")),  # gold outside options
        ]
        path.write_text("\n".join(lines), encoding="utf-8")
        tasks, rejects = bench.load_tasks(path, "mcq")
        assert len(tasks) == 1
        assert [r.line for r in rejects] == [2, 3, 4]

    def test_grid_round_trips_through_records(self, tmp_path):
        record = grid_record()
        path = write_suite(tmp_path, [record])
        tasks, rejects = bench.load_tasks(path, "grid")
        assert rejects == []
        task = tasks[0]
        assert isinstance(task.schema, GridSchema)
        assert bench.brute_solve_task(task) == [task.gold]

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("", encoding="utf-8")
        with pytest.raises(EmptySuite):
            bench.load_tasks(path, "mcq")

    def test_unknown_format_rejected(self, tmp_path):
        path = write_suite(tmp_path, [mcq_record()])
        with pytest.raises(ValueError):
            bench.load_tasks(path, "sonnet")


class TestScore:
    def test_mcq(self):
        task = bench._task_from_record(mcq_record(), "mcq", "")
        assert bench.score(task, "The correct answer is (A)").correct
        verdict = bench.score(task, "The correct answer is (B)")
        assert not verdict.correct and verdict.partial == 0.0
        assert bench.score(task, "who knows").failure == "NoAnswerFound"

    def test_grid_partial_credit(self):
        from atomic_reasoner import answers

        task, gold = bench.gen_puzzle(3, 3, 2)
        full = bench.score(task, answers.format_grid_answer(task.schema, gold))
        assert full.correct and full.partial == 1.0
        # swap two names: 2 name cells wrong out of 6 total cells
        wrong = {h: dict(cells) for h, cells in gold.items()}
        wrong[1]["name"], wrong[2]["name"] = wrong[2]["name"], wrong[1]["name"]
        partial = bench.score(task, answers.format_grid_answer(task.schema, wrong))
        assert not partial.correct
        assert partial.partial == pytest.approx(4 / 6)

    def test_grid_missing_cells_count_as_wrong(self):
        task, gold = bench.gen_puzzle(4, 3, 2)
        text = f"Solution:\n- House 1: {gold[1]['name']}\n"
        verdict = bench.score(task, text)
        assert verdict.partial == pytest.approx(1 / 6)

    def test_numeric(self):
        task = bench._task_from_record(
            {"id": "n", "statement": "Add.", "gold": "3.5"}, "numeric", ""
        )
        assert bench.score(task, "the total is 7/2").correct
        assert not bench.score(task, "the total is 3.4").correct


class TestOracle:
    def test_oracle_backend_drives_full_pipeline_to_gold(self):
        task, gold = bench.gen_puzzle(11, 3, 3)
        config = router.SessionConfig(
            router=router.RouterConfig(backtrack_after_summary=False)
        )
        tree, final = router.run_session(
            task.to_problem(),
            config=config,
            backends=bench.oracle_session_backend(task),
            sop_registry=sop.builtin_registry(),
        )
        assert bench.score(task, final.text).correct

    def test_oracle_rejects_ambiguous_task(self):
        task, _ = bench.gen_puzzle(5, 3, 2)
        task.clues = task.clues[:1]  # now under-constrained
        with pytest.raises(ValueError):
            bench.oracle_session_backend(task)


class TestRunBenchmark:
    def make_tasks(self, n=4):
        return [bench.gen_puzzle(seed, 3, 2)[0] for seed in range(n)]

    def oracle_config(self):
        return router.SessionConfig(
            router=router.RouterConfig(backtrack_after_summary=False)
        )

    def test_ar_strategy_with_backend_factory(self):
        tasks = self.make_tasks()
        report = bench.run_benchmark(
            tasks,
            "ar",
            lambda task: bench.oracle_session_backend(task),
            trials=2,
            workers=2,
            session_config=self.oracle_config(),
            sop_registry=sop.builtin_registry(),
        )
        assert report.mean_success() == 1.0
        assert len(report.results) == len(tasks) * 2
        assert report.completion_tokens > 0

    def test_trials_deterministic_backend_identical_verdicts(self):
        tasks = self.make_tasks(2)
        report = bench.run_benchmark(
            tasks,
            "ar",
            lambda task: bench.oracle_session_backend(task),
            trials=3,
            workers=1,
            session_config=self.oracle_config(),
            sop_registry=sop.builtin_registry(),
        )
        by_task = {}
        for r in report.results:
            by_task.setdefault(r.task_id, []).append(r.verdict.correct)
        assert all(len(set(v)) == 1 for v in by_task.values())

    def test_single_pass_strategy_scores_its_completion(self):
        task = bench._task_from_record(mcq_record(), "mcq", "")
        backend = ScriptedBackend({"solve": "The correct answer is (A)"})
        report = bench.run_benchmark([task], "single-pass", backend, trials=2, workers=1)
        assert report.mean_success() == 1.0

    def test_backend_failure_becomes_verdict_not_crash(self):
        task = bench._task_from_record(mcq_record(), "mcq", "")
        report = bench.run_benchmark([task], "ar", ScriptedBackend([]), trials=1, workers=1)
        assert report.results[0].verdict.failure == "BackendFailure"
        assert report.mean_success() == 0.0

    def test_report_json_aggregates_by_split(self):
        tasks = [bench.gen_puzzle(0, 3, 2)[0], bench.gen_puzzle(1, 4, 2)[0]]
        assert {t.split for t in tasks} == {"easy", "hard"}
        report = bench.run_benchmark(
            tasks,
            "ar",
            lambda task: bench.oracle_session_backend(task),
            trials=1,
            workers=1,
            session_config=self.oracle_config(),
            sop_registry=sop.builtin_registry(),
        )
        payload = report.to_json(tasks)
        assert payload["aggregates"]["overall"] == 1.0
        assert payload["aggregates"]["easy"] == 1.0
        assert payload["aggregates"]["hard"] == 1.0

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            bench.run_benchmark([], "ar", ScriptedBackend([]), trials=0)
        with pytest.raises(ValueError):
            bench.run_benchmark([], "mcts", ScriptedBackend([]))
