"""Logic-grid puzzle generation and an independent brute-force solver.

The solver enumerates permutation assignments attribute-by-attribute with
early clue filtering; it is the oracle against which generated puzzles are
checked for solution uniqueness.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from itertools import permutations
from typing import Optional, Union

from .errors import GenerationExhausted, TooLarge
from .model import GridSchema

MAX_HOUSES = 5

# Assignment: attribute name -> tuple of values, index = house - 1.
Assignment = dict[str, tuple[str, ...]]

# Value pools; every pool holds MAX_HOUSES values.  The first attribute is
# always the person's name so attribute-linkage clues read naturally.
ATTRIBUTE_POOLS: list[tuple[str, tuple[str, ...]]] = [
    ("name", ("Arnold", "Eric", "Peter", "Alice", "Carol")),
    ("book genre", ("romance", "mystery", "science fiction", "fantasy", "biography")),
    ("lunch", ("grilled cheese", "pizza", "spaghetti", "stew", "soup")),
    ("smoothie", ("desert", "watermelon", "cherry", "lime", "banana")),
    ("pet", ("cat", "dog", "fish", "bird", "hamster")),
    ("color", ("red", "green", "blue", "yellow", "purple")),
]


# --- clues ------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedPosition:
    attribute: str
    value: str
    house: int  # 1-based

    def holds(self, assignment: Assignment) -> bool:
        return assignment[self.attribute][self.house - 1] == self.value

    def attributes(self) -> tuple[str, ...]:
        return (self.attribute,)

    def render(self, index: int) -> str:
        return f"{index}. The {self.attribute} {self.value!r} is in house {self.house}."


@dataclass(frozen=True)
class LeftOf:
    attribute_a: str
    value_a: str
    attribute_b: str
    value_b: str

    def holds(self, assignment: Assignment) -> bool:
        return (
            assignment[self.attribute_a].index(self.value_a)
            < assignment[self.attribute_b].index(self.value_b)
        )

    def attributes(self) -> tuple[str, ...]:
        return (self.attribute_a, self.attribute_b)

    def render(self, index: int) -> str:
        return (
            f"{index}. The person with {self.attribute_a} {self.value_a!r} is somewhere "
            f"to the left of the person with {self.attribute_b} {self.value_b!r}."
        )


@dataclass(frozen=True)
class Adjacent:
    attribute_a: str
    value_a: str
    attribute_b: str
    value_b: str

    def holds(self, assignment: Assignment) -> bool:
        return (
            abs(
                assignment[self.attribute_a].index(self.value_a)
                - assignment[self.attribute_b].index(self.value_b)
            )
            == 1
        )

    def attributes(self) -> tuple[str, ...]:
        return (self.attribute_a, self.attribute_b)

    def render(self, index: int) -> str:
        return (
            f"{index}. The person with {self.attribute_a} {self.value_a!r} and the person "
            f"with {self.attribute_b} {self.value_b!r} are next to each other."
        )


@dataclass(frozen=True)
class SameHouse:
    attribute_a: str
    value_a: str
    attribute_b: str
    value_b: str

    def holds(self, assignment: Assignment) -> bool:
        return (
            assignment[self.attribute_a].index(self.value_a)
            == assignment[self.attribute_b].index(self.value_b)
        )

    def attributes(self) -> tuple[str, ...]:
        return (self.attribute_a, self.attribute_b)

    def render(self, index: int) -> str:
        if self.attribute_a == "name":
            return (
                f"{index}. {self.value_a} is the person with "
                f"{self.attribute_b} {self.value_b!r}."
            )
        return (
            f"{index}. The person with {self.attribute_a} {self.value_a!r} is the person "
            f"with {self.attribute_b} {self.value_b!r}."
        )


Clue = Union[FixedPosition, LeftOf, Adjacent, SameHouse]


def clue_to_json(clue: Clue) -> dict:
    data = {"kind": type(clue).__name__}
    data.update(clue.__dict__)
    return data


def clue_from_json(data: dict) -> Clue:
    kinds = {cls.__name__: cls for cls in (FixedPosition, LeftOf, Adjacent, SameHouse)}
    kind = data.get("kind")
    if kind not in kinds:
        raise ValueError(f"unknown clue kind {kind!r}")
    args = {k: v for k, v in data.items() if k != "kind"}
    return kinds[kind](**args)


# --- brute-force solver -------------------------------------------------------------

def brute_solve(
    schema: GridSchema,
    clues: list[Clue],
    limit: Optional[int] = None,
) -> list[Assignment]:
    """All assignments consistent with the clues, by exhaustive enumeration.

    Assigns one attribute's permutation at a time and rejects early on any
    clue whose attributes are all assigned.  ``limit`` stops the search after
    that many solutions (uniqueness checks use limit=2)."""
    if schema.houses > MAX_HOUSES:
        raise TooLarge(f"brute force capped at {MAX_HOUSES} houses")
    attrs = list(schema.attribute_names)
    perms = {attr: list(permutations(schema.values_for(attr))) for attr in attrs}

    # Clues become checkable once the last attribute they mention is placed.
    stage: dict[int, list[Clue]] = {i: [] for i in range(len(attrs))}
    order = {attr: i for i, attr in enumerate(attrs)}
    for clue in clues:
        stage[max(order[a] for a in clue.attributes())].append(clue)

    solutions: list[Assignment] = []

    def recurse(depth: int, partial: Assignment) -> bool:
        if depth == len(attrs):
            solutions.append(dict(partial))
            return limit is not None and len(solutions) >= limit
        attr = attrs[depth]
        for perm in perms[attr]:
            partial[attr] = perm
            if all(clue.holds(partial) for clue in stage[depth]):
                if recurse(depth + 1, partial):
                    return True
        del partial[attr]
        return False

    recurse(0, {})
    return solutions


def assignment_to_grid(schema: GridSchema, assignment: Assignment) -> dict[int, dict[str, str]]:
    return {
        house: {attr: assignment[attr][house - 1] for attr in schema.attribute_names}
        for house in range(1, schema.houses + 1)
    }


def grid_to_assignment(schema: GridSchema, grid: dict[int, dict[str, str]]) -> Assignment:
    return {
        attr: tuple(grid[house][attr] for house in range(1, schema.houses + 1))
        for attr in schema.attribute_names
    }


# --- generation ---------------------------------------------------------------------

def _candidate_clues(schema: GridSchema, solution: Assignment, rng: random.Random) -> list[Clue]:
    attrs = schema.attribute_names
    candidates: list[Clue] = []
    for attr in attrs:
        for house in range(1, schema.houses + 1):
            candidates.append(FixedPosition(attr, solution[attr][house - 1], house))
    for i, attr_a in enumerate(attrs):
        for attr_b in attrs[i:]:
            for value_a in schema.values_for(attr_a):
                for value_b in schema.values_for(attr_b):
                    if attr_a == attr_b and value_a == value_b:
                        continue
                    pos_a = solution[attr_a].index(value_a)
                    pos_b = solution[attr_b].index(value_b)
                    if attr_a != attr_b and pos_a == pos_b:
                        candidates.append(SameHouse(attr_a, value_a, attr_b, value_b))
                    if pos_a < pos_b:
                        candidates.append(LeftOf(attr_a, value_a, attr_b, value_b))
                    if abs(pos_a - pos_b) == 1 and (attr_a, value_a) < (attr_b, value_b):
                        candidates.append(Adjacent(attr_a, value_a, attr_b, value_b))
    rng.shuffle(candidates)
    return candidates


def generate_puzzle(
    seed: int,
    houses: int,
    attributes: int,
    max_attempts: int = 20,
) -> tuple[GridSchema, list[Clue], Assignment]:
    """Deterministic puzzle with a unique solution and a minimal clue set.

    Clues are added (shuffled) until the oracle reports a unique solution,
    then greedily pruned: every surviving clue is necessary, so dropping any
    one of them re-admits a second solution."""
    if not 2 <= houses <= MAX_HOUSES:
        raise ValueError(f"houses must be in [2, {MAX_HOUSES}]")
    if not 1 <= attributes <= 4:
        raise ValueError("attributes must be in [1, 4]")

    rng = random.Random(seed)
    schema = GridSchema(
        houses=houses,
        attributes=tuple(
            (name, tuple(values[:houses])) for name, values in ATTRIBUTE_POOLS[:attributes]
        ),
    )
    for attempt in range(max_attempts):
        solution: Assignment = {
            attr: tuple(rng.sample(schema.values_for(attr), houses))
            for attr in schema.attribute_names
        }
        candidates = _candidate_clues(schema, solution, rng)

        chosen: list[Clue] = []
        for clue in candidates:
            chosen.append(clue)
            if len(brute_solve(schema, chosen, limit=2)) == 1:
                break
        else:
            continue  # this solution never became unique; resample

        minimal = list(chosen)
        for clue in list(chosen):
            trial = [c for c in minimal if c != clue]
            if len(brute_solve(schema, trial, limit=2)) == 1:
                minimal = trial
        return schema, minimal, solution
    raise GenerationExhausted(f"no unique puzzle after {max_attempts} attempts (seed={seed})")


def render_statement(schema: GridSchema, clues: list[Clue]) -> str:
    lines = [
        f"There are {schema.houses} houses, numbered 1 to {schema.houses} from left "
        "to right, as seen from across the street. Each house is occupied by a "
        "different person. Each house has a unique attribute for each of the "
        "following characteristics:",
        "",
    ]
    for attr, values in schema.attributes:
        listed = ", ".join(f"`{v}`" for v in values)
        lines.append(f"- Each house has a unique {attr}: {listed}")
    lines += ["", "## Clues:", ""]
    for index, clue in enumerate(clues, start=1):
        lines.append(clue.render(index))
    return "\n".join(lines)
