from atomic_reasoner import answers
from atomic_reasoner.model import GridSchema, MultipleChoice

SCHEMA = GridSchema(
    houses=3,
    attributes=(
        ("name", ("Arnold", "Eric", "Peter")),
        ("lunch", ("grilled cheese", "pizza", "spaghetti")),
    ),
)


class TestMcq:
    OPTIONS = answers.option_letters(
        MultipleChoice(options=tuple(f"({c}) option {c}" for c in "ABCDEFG"))
    )

    def test_standard_phrase(self):
        assert answers.extract_mcq("The correct answer is (A)", self.OPTIONS) == "A"

    def test_bold_and_no_parens(self):
        assert answers.extract_mcq("**The correct answer is B**", self.OPTIONS) == "B"

    def test_last_occurrence_wins(self):
        text = "The correct answer is (C). Wait. The correct answer is (E)."
        assert answers.extract_mcq(text, self.OPTIONS) == "E"

    def test_fallback_paren_letter(self):
        assert answers.extract_mcq("after checking, (D) fits best", self.OPTIONS) == "D"

    def test_invalid_letter_rejected(self):
        assert answers.extract_mcq("The correct answer is (Z)", self.OPTIONS) is None

    def test_no_answer(self):
        assert answers.extract_mcq("I cannot decide.", self.OPTIONS) is None


class TestGrid:
    def test_round_trip_with_format(self):
        grid = {
            1: {"name": "Peter", "lunch": "spaghetti"},
            2: {"name": "Eric", "lunch": "grilled cheese"},
            3: {"name": "Arnold", "lunch": "pizza"},
        }
        assert answers.parse_grid(answers.format_grid_answer(SCHEMA, grid), SCHEMA) == grid

    def test_last_solution_block_wins(self):
        text = (
            "Solution:\n- House 1: Eric (pizza)\n\nActually no.\n\n"
            "Solution:\n- House 1: Peter (spaghetti)\n- House 2: Eric (grilled cheese)\n"
            "- House 3: Arnold (pizza)\n"
        )
        grid = answers.parse_grid(text, SCHEMA)
        assert grid[1]["name"] == "Peter"

    def test_unknown_values_stay_missing(self):
        text = "Solution:\n- House 1: Zelda (sushi)\n"
        grid = answers.parse_grid(text, SCHEMA)
        assert grid[1] == {"name": None, "lunch": None}

    def test_case_and_hyphen_insensitive_vocab(self):
        text = "Solution:\n- House 3: ARNOLD (Grilled-Cheese)\n"
        grid = answers.parse_grid(text, SCHEMA)
        assert grid[3] == {"name": "Arnold", "lunch": "grilled cheese"}

    def test_no_solution_block_all_missing(self):
        grid = answers.parse_grid("no structured answer here", SCHEMA)
        assert all(v is None for cells in grid.values() for v in cells.values())


class TestNumeric:
    def test_plain_and_boxed(self):
        assert answers.normalize_numeric("42") == "42"
        assert answers.normalize_numeric("The answer is \\boxed{42}.") == "42"

    def test_trailing_zero_and_plus_normalization(self):
        assert answers.normalize_numeric("+3.50") == "7/2"
        assert answers.numeric_equal("3.5", "7/2")

    def test_fraction_equality(self):
        assert answers.numeric_equal("2/4", "0.5")
        assert not answers.numeric_equal("1/3", "0.3333")

    def test_last_number_in_prose(self):
        assert answers.normalize_numeric("First 12, then 17, so the total is 29.") == "29"

    def test_nothing_numeric(self):
        assert answers.normalize_numeric("no numbers here") is None
