"""Admission strategies as per-state preference vectors.

A preference vector is a permutation of {0, 1, ..., N}: queue numbers are
served in the order they appear, and queues listed after the reserve symbol 0
are not served at all.  A strategy assigns one such vector to every
admissible state (one column per admissible-state index).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractViolation
from .slice_model import StateSpace, SystemState

RESERVE = 0


def validate_vector(entries: Sequence[int], num_types: int) -> str | None:
    """Check one preference vector; returns a violation description or None if valid."""
    entries = list(entries)
    if len(entries) != num_types + 1:
        return f"expected {num_types + 1} entries, got {len(entries)}"
    seen = set()
    for v in entries:
        if not isinstance(v, (int, np.integer)):
            return f"entry {v!r} is not an integer"
        if not 0 <= v <= num_types:
            return f"entry {v} outside 0..{num_types}"
        if v in seen:
            return f"duplicate entry {v}"
        seen.add(v)
    return None


def validate_matrix(columns: Sequence[Sequence[int]], num_types: int,
                    num_admissible: int | None = None) -> str | None:
    """Check a whole strategy; returns a violation description or None if valid."""
    if num_admissible is not None and len(columns) != num_admissible:
        return f"expected {num_admissible} columns, got {len(columns)}"
    for j, col in enumerate(columns):
        problem = validate_vector(col, num_types)
        if problem is not None:
            return f"column {j}: {problem}"
    return None


@dataclass(frozen=True)
class PreferenceMatrix:
    """One preference vector per admissible state, indexed like the state space."""

    columns: tuple[tuple[int, ...], ...]
    num_types: int

    def __post_init__(self) -> None:
        cols = tuple(tuple(int(v) for v in col) for col in self.columns)
        object.__setattr__(self, "columns", cols)
        problem = validate_matrix(cols, self.num_types)
        if problem is not None:
            raise ContractViolation(f"invalid preference matrix: {problem}")

    @property
    def num_columns(self) -> int:
        return len(self.columns)

    def column(self, admissible_index: int) -> tuple[int, ...]:
        return self.columns[admissible_index]


def preference_at(matrix: PreferenceMatrix, s: SystemState, space: StateSpace) -> tuple[int, ...]:
    """The preference vector the strategy applies in admissible state ``s``."""
    index = space.index_of(s)
    if not space.is_admissible_index(index):
        raise ContractViolation(f"state {tuple(s)} is not admissible; no preference applies")
    return matrix.column(index)


def extended_preference(matrix: PreferenceMatrix, state_index: int, row: int) -> int:
    """Preference entry extended to the whole space: 0 for non-admissible state indices.

    ``state_index`` is a 0-based full-space index, ``row`` a 0-based position
    in the preference vector.
    """
    if not 0 <= row <= matrix.num_types:
        raise ContractViolation(f"row must lie in 0..{matrix.num_types}, got {row}")
    if state_index < 0:
        raise ContractViolation(f"state index must be >= 0, got {state_index}")
    if state_index >= matrix.num_columns:
        return RESERVE
    return matrix.columns[state_index][row]


def constant_strategy(space: StateSpace, vector: Sequence[int]) -> PreferenceMatrix:
    """The strategy applying the same preference vector in every admissible state."""
    col = tuple(int(v) for v in vector)
    return PreferenceMatrix(
        columns=tuple(col for _ in range(space.num_admissible)),
        num_types=space.model.num_types,
    )


def naive_strategy(space: StateSpace, kind: str = "prefer-type-1") -> PreferenceMatrix:
    """Built-in constant strategies.

    ``prefer-type-k`` puts type k first, the remaining types in ascending
    order, and the reserve symbol last.  ``greedy-order`` grabs the most
    valuable first: types by descending utility rate (ties by type number),
    reserve last, so every feasible request is taken.
    """
    n = space.model.num_types
    if kind.startswith("prefer-type-"):
        try:
            k = int(kind.removeprefix("prefer-type-"))
        except ValueError:
            raise ContractViolation(f"malformed strategy kind {kind!r}") from None
        if not 1 <= k <= n:
            raise ContractViolation(f"prefer-type-{k} needs a type in 1..{n}")
        order = [k] + [t for t in range(1, n + 1) if t != k] + [RESERVE]
    elif kind == "greedy-order":
        ranked = sorted(range(1, n + 1),
                        key=lambda t: (-space.model.types[t - 1].utility_rate, t))
        order = ranked + [RESERVE]
    else:
        raise ContractViolation(f"unknown naive strategy kind {kind!r}")
    return constant_strategy(space, order)


def _fisher_yates(rng: np.random.Generator, items: list[int]) -> tuple[int, ...]:
    for i in range(len(items) - 1, 0, -1):
        j = int(rng.integers(0, i + 1))
        items[i], items[j] = items[j], items[i]
    return tuple(items)


def random_strategy(space: StateSpace, seed: int) -> PreferenceMatrix:
    """A strategy with one independent uniform random preference vector per column.

    Deterministic for a given seed (Fisher-Yates shuffles driven by a PCG64
    generator).
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    n = space.model.num_types
    columns = tuple(
        _fisher_yates(rng, list(range(n + 1))) for _ in range(space.num_admissible)
    )
    return PreferenceMatrix(columns=columns, num_types=n)


def to_text(matrix: PreferenceMatrix) -> str:
    """Serialize as a plain text table: one column per line, state index first."""
    lines = [
        " ".join([str(j)] + [str(v) for v in col])
        for j, col in enumerate(matrix.columns)
    ]
    return "\n".join(lines) + "\n"


def from_text(text: str, num_types: int, num_admissible: int | None = None) -> PreferenceMatrix:
    """Parse the plain text table produced by ``to_text``."""
    columns: list[tuple[int, ...]] = []
    for lineno, line in enumerate(text.splitlines()):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            values = [int(p) for p in parts]
        except ValueError:
            raise ContractViolation(f"strategy table line {lineno + 1}: non-integer entry") from None
        if len(values) != num_types + 2:
            raise ContractViolation(
                f"strategy table line {lineno + 1}: expected index plus {num_types + 1} entries"
            )
        if values[0] != len(columns):
            raise ContractViolation(
                f"strategy table line {lineno + 1}: expected state index {len(columns)}, got {values[0]}"
            )
        columns.append(tuple(values[1:]))
    problem = validate_matrix(columns, num_types, num_admissible)
    if problem is not None:
        raise ContractViolation(f"invalid strategy table: {problem}")
    return PreferenceMatrix(columns=tuple(columns), num_types=num_types)
