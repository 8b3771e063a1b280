"""Resource pool, slice types, and the finite state machine they induce.

A model is a static pool of M resources plus N slice types, each type
consuming a fixed resource bundle per active slice.  The set of slice-count
vectors the pool can hold (the feasibility space) is finite; the subset from
which at least one more slice of some type could be accepted is the
admissibility region.  States are indexed densely with admissible states
first, so the two index maps agree on the admissibility region.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractViolation, StateSpaceTooLarge

# Relative tolerance on the resource inequality, guarding decimal cost values.
FEASIBILITY_REL_TOL = 1e-9

#: Default cap on the number of enumerated states.
DEFAULT_STATE_CAP = 10**6

#: Sentinel meaning "balking disabled" for a slice type.
BALKING_DISABLED = None


@dataclass(frozen=True)
class SliceType:
    """Per-type demand and behaviour parameters.

    Rates are per unit time.  ``reneging_rate == 0`` disables reneging for
    the type; ``balking_willingness is None`` disables balking.
    """

    arrival_rate: float
    release_rate: float
    utility_rate: float = 0.0
    reneging_rate: float = 0.0
    balking_willingness: float | None = BALKING_DISABLED

    def __post_init__(self) -> None:
        if self.arrival_rate < 0:
            raise ContractViolation(f"arrival_rate must be >= 0, got {self.arrival_rate}")
        if self.release_rate <= 0:
            raise ContractViolation(f"release_rate must be > 0, got {self.release_rate}")
        if self.utility_rate < 0:
            raise ContractViolation(f"utility_rate must be >= 0, got {self.utility_rate}")
        if self.reneging_rate < 0:
            raise ContractViolation(f"reneging_rate must be >= 0, got {self.reneging_rate}")
        b = self.balking_willingness
        if b is not None and not 0.0 <= b <= 1.0:
            raise ContractViolation(f"balking_willingness must lie in [0, 1], got {b}")

    @property
    def mean_lifetime(self) -> float:
        return 1.0 / self.release_rate


@dataclass(frozen=True)
class ResourceModel:
    """Static resource pool with per-type cost bundles.

    ``costs[n]`` is the bundle (length M) consumed by one active slice of
    type ``n + 1``; the bundles are the columns of the cost matrix.
    """

    pool: tuple[float, ...]
    costs: tuple[tuple[float, ...], ...]
    types: tuple[SliceType, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "pool", tuple(float(r) for r in self.pool))
        object.__setattr__(self, "costs", tuple(tuple(float(c) for c in col) for col in self.costs))
        object.__setattr__(self, "types", tuple(self.types))
        if not self.pool:
            raise ContractViolation("resource pool must have at least one resource")
        if any(r < 0 for r in self.pool):
            raise ContractViolation("resource pool entries must be >= 0")
        if len(self.costs) != len(self.types):
            raise ContractViolation("need one cost bundle per slice type")
        if not self.types:
            raise ContractViolation("need at least one slice type")
        for n, col in enumerate(self.costs, start=1):
            if len(col) != len(self.pool):
                raise ContractViolation(f"cost bundle of type {n} has wrong length")
            if any(c < 0 for c in col):
                raise ContractViolation(f"cost bundle of type {n} has negative entries")
            if any(c > r + FEASIBILITY_REL_TOL * max(1.0, r) for c, r in zip(col, self.pool)):
                raise ContractViolation(
                    f"type {n} does not fit an empty pool (cost bundle exceeds pool)"
                )

    @property
    def num_resources(self) -> int:
        return len(self.pool)

    @property
    def num_types(self) -> int:
        return len(self.types)

    @property
    def cost_matrix(self) -> np.ndarray:
        """The M x N cost matrix (one column per slice type)."""
        return np.array(self.costs, dtype=float).T

    @property
    def arrival_rates(self) -> tuple[float, ...]:
        return tuple(t.arrival_rate for t in self.types)

    @property
    def release_rates(self) -> tuple[float, ...]:
        return tuple(t.release_rate for t in self.types)

    @property
    def utility_rates(self) -> tuple[float, ...]:
        return tuple(t.utility_rate for t in self.types)


SystemState = tuple[int, ...]


def _check_state(model: ResourceModel, s: Sequence[int]) -> SystemState:
    if len(s) != model.num_types:
        raise ContractViolation(
            f"state has {len(s)} entries, model has {model.num_types} slice types"
        )
    out = []
    for v in s:
        iv = int(v)
        if iv != v or iv < 0:
            raise ContractViolation(f"slice counts must be non-negative integers, got {v!r}")
        out.append(iv)
    return tuple(out)


def assigned_resources(model: ResourceModel, s: Sequence[int]) -> np.ndarray:
    """Resources consumed by the active-slice vector ``s`` (cost matrix times s)."""
    s = _check_state(model, s)
    assigned = np.zeros(model.num_resources)
    for count, col in zip(s, model.costs):
        if count:
            assigned += count * np.asarray(col)
    return assigned


def is_feasible(model: ResourceModel, s: Sequence[int]) -> bool:
    """Whether the pool supports ``s``: assigned resources within the pool on every axis."""
    a = assigned_resources(model, s)
    for am, rm in zip(a, model.pool):
        if am - rm > FEASIBILITY_REL_TOL * max(1.0, rm):
            return False
    return True


def apply_increment(s: Sequence[int], n: int, release: bool = False) -> SystemState:
    """Add (or release) one slice of type ``n``; ``n == 0`` is the no-op reserve symbol."""
    s = tuple(int(v) for v in s)
    if not 0 <= n <= len(s):
        raise ContractViolation(f"slice type must lie in 0..{len(s)}, got {n}")
    if n == 0:
        return s
    delta = -1 if release else 1
    if release and s[n - 1] < 1:
        raise ContractViolation(f"cannot release a type-{n} slice: none active")
    return s[: n - 1] + (s[n - 1] + delta,) + s[n:]


@dataclass
class StateSpace:
    """Enumerated feasibility space with dense indices, admissible states first.

    Indices are 0-based; a state is admissible iff its index is below
    ``num_admissible``.  ``increment_index`` and ``release_index`` are
    precomputed transition tables (-1 marks an infeasible / invalid move).
    """

    model: ResourceModel
    states: tuple[SystemState, ...]
    num_admissible: int
    _index: dict[SystemState, int] = field(repr=False)
    _increment: tuple[tuple[int, ...], ...] = field(repr=False)
    _release: tuple[tuple[int, ...], ...] = field(repr=False)

    def __len__(self) -> int:
        return len(self.states)

    @property
    def feasible(self) -> tuple[SystemState, ...]:
        return self.states

    @property
    def admissible(self) -> tuple[SystemState, ...]:
        return self.states[: self.num_admissible]

    def index_of(self, s: Sequence[int]) -> int:
        try:
            return self._index[tuple(int(v) for v in s)]
        except KeyError:
            raise ContractViolation(f"state {tuple(s)} is not in the feasibility space") from None

    def state_at(self, index: int) -> SystemState:
        return self.states[index]

    def contains(self, s: Sequence[int]) -> bool:
        return tuple(int(v) for v in s) in self._index

    def is_admissible_index(self, index: int) -> bool:
        return 0 <= index < self.num_admissible

    def is_admissible(self, s: Sequence[int]) -> bool:
        return self.is_admissible_index(self.index_of(s))

    def increment_index(self, index: int, n: int) -> int:
        """Index of ``state + unit increment of type n`` (n=0 is a self-move), -1 if infeasible."""
        if n == 0:
            return index
        return self._increment[index][n - 1]

    def release_index(self, index: int, n: int) -> int:
        """Index of ``state - unit increment of type n``, -1 if no such slice is active."""
        return self._release[index][n - 1]


def _per_type_bounds(model: ResourceModel, cap: int) -> list[int]:
    bounds = []
    for n, col in enumerate(model.costs, start=1):
        bound = None
        for c, r in zip(col, model.pool):
            if c > 0:
                b = int((r + FEASIBILITY_REL_TOL * max(1.0, r)) // c)
                bound = b if bound is None else min(bound, b)
        if bound is None:
            # zero-cost bundle would make the space infinite
            raise StateSpaceTooLarge(
                f"type {n} consumes no resources; the feasibility space is unbounded"
            )
        bounds.append(bound)
    return bounds


def enumerate_state_space(model: ResourceModel, cap: int = DEFAULT_STATE_CAP) -> StateSpace:
    """Exhaustively enumerate the feasibility space and extract the admissibility region.

    States are ordered lexicographically within each group, admissible states
    first, so that the full-space index map agrees with the admissible-region
    index map on the admissibility region.  Raises ``StateSpaceTooLarge`` when
    more than ``cap`` states would be enumerated.
    """
    n_types = model.num_types
    bounds = _per_type_bounds(model, cap)
    pool = np.asarray(model.pool)
    cols = [np.asarray(c) for c in model.costs]
    tol = FEASIBILITY_REL_TOL * np.maximum(1.0, pool)

    feasible: list[SystemState] = []

    # depth-first walk in lexicographic order; feasibility is monotone so each
    # coordinate loop can stop at the first infeasible increment.
    def walk(prefix: list[int], used: np.ndarray) -> None:
        depth = len(prefix)
        if depth == n_types:
            feasible.append(tuple(prefix))
            if len(feasible) > cap:
                raise StateSpaceTooLarge(
                    f"state space exceeds the cap of {cap} states"
                )
            return
        col = cols[depth]
        for count in range(bounds[depth] + 1):
            usage = used + count * col
            if np.any(usage - pool > tol):
                break
            prefix.append(count)
            walk(prefix, usage)
            prefix.pop()

    walk([], np.zeros_like(pool))

    state_set = set(feasible)

    def admits_more(s: SystemState) -> bool:
        return any(apply_increment(s, n) in state_set for n in range(1, n_types + 1))

    admissible = [s for s in feasible if admits_more(s)]
    rest = [s for s in feasible if not admits_more(s)]
    ordered = tuple(admissible + rest)
    index = {s: i for i, s in enumerate(ordered)}

    increment = tuple(
        tuple(index.get(apply_increment(s, n), -1) for n in range(1, n_types + 1))
        for s in ordered
    )
    release = tuple(
        tuple(
            index[apply_increment(s, n, release=True)] if s[n - 1] > 0 else -1
            for n in range(1, n_types + 1)
        )
        for s in ordered
    )

    return StateSpace(
        model=model,
        states=ordered,
        num_admissible=len(admissible),
        _index=index,
        _increment=increment,
        _release=release,
    )
