"""Multi-queue slice admission control.

The controller reacts to two kinds of tenant issues: a release decrements the
active-slice vector, a request joins the FCFS queue of its type.  After every
issue the queues are served recursively: scan the current state's preference
vector, skip everything after the reserve symbol, accept the head of a
preferred queue whenever one more slice of that type still fits, and repeat
until a full pass changes nothing.

A greedy single-queue controller (one FCFS line for all types, head-of-line
blocking, no preference) is provided as a benchmark.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .errors import ContractViolation
from .slice_model import StateSpace, SystemState
from .strategy import RESERVE, PreferenceMatrix

#: Request outcome tags.
WAITING = "waiting"
ACCEPTED = "accepted"
BALKED = "balked"
RENEGED = "reneged"


@dataclass
class RequestRecord:
    """One slice request and its fate.

    ``lifetime`` is the slice lifetime used if the request is accepted;
    ``renege_deadline`` is the absolute time at which a still-waiting request
    abandons (None when reneging does not apply).
    """

    request_id: int
    slice_type: int
    arrival_time: float
    lifetime: float = 0.0
    join_time: float | None = None
    renege_deadline: float | None = None
    outcome: str = WAITING
    outcome_time: float | None = None

    @property
    def wait(self) -> float | None:
        """Time spent in the queue, once the request has left it."""
        if self.join_time is None or self.outcome_time is None:
            return None
        return self.outcome_time - self.join_time


class MultiQueueController:
    """Heterogeneous multi-queue admission controller driven by a preference matrix."""

    def __init__(self, space: StateSpace, strategy: PreferenceMatrix,
                 initial_state: SystemState | None = None) -> None:
        if strategy.num_types != space.model.num_types:
            raise ContractViolation("strategy and model disagree on the number of types")
        if strategy.num_columns != space.num_admissible:
            raise ContractViolation(
                f"strategy has {strategy.num_columns} columns, "
                f"admissibility region has {space.num_admissible} states"
            )
        self.space = space
        self.strategy = strategy
        self.state_index = 0 if initial_state is None else space.index_of(initial_state)
        self.queues: list[deque[RequestRecord]] = [
            deque() for _ in range(space.model.num_types)
        ]

    @property
    def state(self) -> SystemState:
        return self.space.state_at(self.state_index)

    def queue_lengths(self) -> tuple[int, ...]:
        return tuple(len(q) for q in self.queues)

    def handle_request(self, record: RequestRecord) -> list[RequestRecord]:
        """Enqueue a joining request, then serve; returns the accepted requests."""
        n = record.slice_type
        if not 1 <= n <= len(self.queues):
            raise ContractViolation(f"slice type must lie in 1..{len(self.queues)}, got {n}")
        self.queues[n - 1].append(record)
        return self.serve_queues()

    def handle_release(self, n: int) -> list[RequestRecord]:
        """Release one active slice of type ``n``, then serve; returns the accepted requests."""
        new_index = self.space.release_index(self.state_index, n)
        if new_index < 0:
            raise ContractViolation(f"cannot release a type-{n} slice: none active")
        self.state_index = new_index
        return self.serve_queues()

    def remove(self, record: RequestRecord) -> None:
        """Remove a still-waiting request by identity (reneging)."""
        queue = self.queues[record.slice_type - 1]
        try:
            queue.remove(record)
        except ValueError:
            raise ContractViolation("request is not waiting in its queue") from None

    def serve_queues(self) -> list[RequestRecord]:
        """Recursively serve the queues until blocked; returns requests accepted, in order."""
        accepted: list[RequestRecord] = []
        space = self.space
        while space.is_admissible_index(self.state_index):
            before = self.state_index
            column = self.strategy.column(self.state_index)
            for pref in column:
                if pref == RESERVE:
                    break
                queue = self.queues[pref - 1]
                if not queue:
                    continue
                target = space.increment_index(self.state_index, pref)
                if target < 0:
                    continue
                accepted.append(queue.popleft())
                self.state_index = target
            if self.state_index == before:
                break
        return accepted

    def is_transient(self) -> bool:
        """Whether a serving pass would accept something right now.

        True iff some queue listed before the reserve symbol in the current
        preference vector is non-empty and its increment still fits the pool.
        """
        space = self.space
        if not space.is_admissible_index(self.state_index):
            return False
        for pref in self.strategy.column(self.state_index):
            if pref == RESERVE:
                return False
            if self.queues[pref - 1] and space.increment_index(self.state_index, pref) >= 0:
                return True
        return False


class GreedySingleQueueController:
    """Single FCFS queue for all types; accepts the head whenever it fits, never skips."""

    def __init__(self, space: StateSpace, initial_state: SystemState | None = None) -> None:
        self.space = space
        self.state_index = 0 if initial_state is None else space.index_of(initial_state)
        self.queue: deque[RequestRecord] = deque()

    @property
    def state(self) -> SystemState:
        return self.space.state_at(self.state_index)

    def queue_lengths(self) -> tuple[int, ...]:
        return (len(self.queue),)

    def total_queue_length(self) -> int:
        return len(self.queue)

    def handle_request(self, record: RequestRecord) -> list[RequestRecord]:
        self.queue.append(record)
        return self.serve_queues()

    def handle_release(self, n: int) -> list[RequestRecord]:
        new_index = self.space.release_index(self.state_index, n)
        if new_index < 0:
            raise ContractViolation(f"cannot release a type-{n} slice: none active")
        self.state_index = new_index
        return self.serve_queues()

    def remove(self, record: RequestRecord) -> None:
        try:
            self.queue.remove(record)
        except ValueError:
            raise ContractViolation("request is not waiting in the queue") from None

    def serve_queues(self) -> list[RequestRecord]:
        accepted: list[RequestRecord] = []
        while self.queue:
            head = self.queue[0]
            target = self.space.increment_index(self.state_index, head.slice_type)
            if target < 0:
                break
            accepted.append(self.queue.popleft())
            self.state_index = target
        return accepted

    def is_transient(self) -> bool:
        if not self.queue:
            return False
        return self.space.increment_index(self.state_index, self.queue[0].slice_type) >= 0
