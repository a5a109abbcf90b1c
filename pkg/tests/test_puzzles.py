import random

import pytest

from atomic_reasoner import puzzles
from atomic_reasoner.errors import TooLarge
from atomic_reasoner.model import GridSchema
from atomic_reasoner.puzzles import Adjacent, FixedPosition, LeftOf, SameHouse

SCHEMA2 = GridSchema(
    houses=2,
    attributes=(("name", ("Arnold", "Eric")), ("pet", ("cat", "dog"))),
)


class TestClues:
    def test_semantics(self):
        assignment = {"name": ("Arnold", "Eric"), "pet": ("cat", "dog")}
        assert FixedPosition("name", "Arnold", 1).holds(assignment)
        assert not FixedPosition("name", "Arnold", 2).holds(assignment)
        assert LeftOf("name", "Arnold", "pet", "dog").holds(assignment)
        assert not LeftOf("pet", "dog", "name", "Arnold").holds(assignment)
        assert Adjacent("name", "Arnold", "pet", "dog").holds(assignment)
        assert SameHouse("name", "Eric", "pet", "dog").holds(assignment)

    def test_json_round_trip(self):
        for clue in (
            FixedPosition("name", "Eric", 2),
            LeftOf("name", "Arnold", "pet", "dog"),
            Adjacent("pet", "cat", "pet", "dog"),
            SameHouse("name", "Eric", "pet", "dog"),
        ):
            assert puzzles.clue_from_json(puzzles.clue_to_json(clue)) == clue

    def test_unknown_clue_kind_rejected(self):
        with pytest.raises(ValueError):
            puzzles.clue_from_json({"kind": "Telepathy"})


class TestBruteSolve:
    def test_no_clues_counts_all_permutation_products(self):
        solutions = puzzles.brute_solve(SCHEMA2, [])
        assert len(solutions) == 4  # 2! * 2!

    def test_contradictory_clues_no_solution(self):
        clues = [FixedPosition("name", "Eric", 1), FixedPosition("name", "Eric", 2)]
        assert puzzles.brute_solve(SCHEMA2, clues) == []

    def test_limit_stops_early(self):
        assert len(puzzles.brute_solve(SCHEMA2, [], limit=2)) == 2

    def test_unique_solution(self):
        clues = [FixedPosition("name", "Eric", 1), SameHouse("name", "Eric", "pet", "dog")]
        solutions = puzzles.brute_solve(SCHEMA2, clues)
        assert solutions == [{"name": ("Eric", "Arnold"), "pet": ("dog", "cat")}]

    def test_oversized_schema_rejected(self):
        big = GridSchema(houses=6, attributes=(("name", tuple("ABCDEF")),))
        with pytest.raises(TooLarge):
            puzzles.brute_solve(big, [])


class TestGeneration:
    def test_deterministic_per_seed(self):
        a = puzzles.generate_puzzle(7, 3, 2)
        b = puzzles.generate_puzzle(7, 3, 2)
        assert a == b

    def test_unique_solution_and_minimal_clues(self):
        rng = random.Random(0)
        for _ in range(10):
            seed = rng.randrange(10_000)
            schema, clues, solution = puzzles.generate_puzzle(seed, 3, 2)
            found = puzzles.brute_solve(schema, clues)
            assert found == [solution]
            # minimality: removing any single clue admits >= 2 solutions
            for i in range(len(clues)):
                subset = clues[:i] + clues[i + 1:]
                assert len(puzzles.brute_solve(schema, subset, limit=2)) == 2

    def test_schema_shape(self):
        schema, clues, solution = puzzles.generate_puzzle(0, 4, 3)
        assert schema.houses == 4
        assert schema.attribute_names[0] == "name"
        assert len(schema.attributes) == 3
        assert all(len(values) == 4 for _, values in schema.attributes)

    def test_statement_lists_all_clues(self):
        schema, clues, _ = puzzles.generate_puzzle(1, 3, 2)
        statement = puzzles.render_statement(schema, clues)
        assert "## Clues:" in statement
        assert f"{len(clues)}." in statement
        assert "houses, numbered 1 to 3" in statement

    def test_grid_conversions_invert(self):
        schema, _, solution = puzzles.generate_puzzle(2, 3, 3)
        grid = puzzles.assignment_to_grid(schema, solution)
        assert puzzles.grid_to_assignment(schema, grid) == solution
