"""Deterministic replay contrasting queuing schemes on a shared arrival burst.

One resource, two slice types (bundles 0.6 and 0.2 of the pool), one type-1
slice already active, and four requests arriving in the order 1, 1, 2, 2.
Three schemes process the same burst: a single FCFS queue for all types, two
mixed queues filled round-robin, and per-type queues driven by a preference
vector.  Only the per-type scheme accepts the two type-2 requests; the other
two block behind the waiting type-1 head although the pool has room.
"""

from __future__ import annotations

from collections import deque

from .controller import GreedySingleQueueController, MultiQueueController, RequestRecord
from .slice_model import ResourceModel, SliceType, enumerate_state_space
from .strategy import constant_strategy

PANELS = ("single-queue", "homogeneous-queues", "heterogeneous-queues")

ARRIVALS = ((1.0, 1), (2.0, 1), (3.0, 2), (4.0, 2))
INITIAL_STATE = (1, 0)

Row = tuple[str, float, str, int, int, str, str]


def case_study_model() -> ResourceModel:
    return ResourceModel(
        pool=(1.0,),
        costs=((0.6,), (0.2,)),
        types=(SliceType(arrival_rate=1.0, release_rate=1.0),
               SliceType(arrival_rate=1.0, release_rate=1.0)),
    )


class _HomogeneousQueues:
    """Two mixed FCFS queues, filled round-robin, each blocking on its head."""

    def __init__(self, space, initial_state) -> None:
        self.space = space
        self.state_index = space.index_of(initial_state)
        self.queues = [deque(), deque()]
        self._next = 0

    @property
    def state(self):
        return self.space.state_at(self.state_index)

    def queue_lengths(self):
        return tuple(len(q) for q in self.queues)

    def enqueue(self, record: RequestRecord) -> None:
        self.queues[self._next].append(record)
        self._next = (self._next + 1) % len(self.queues)

    def handle_request(self, record: RequestRecord) -> list[RequestRecord]:
        self.enqueue(record)
        return self.serve_queues()

    def serve_queues(self) -> list[RequestRecord]:
        accepted = []
        moved = True
        while moved:
            moved = False
            for queue in self.queues:
                if not queue:
                    continue
                target = self.space.increment_index(self.state_index, queue[0].slice_type)
                if target >= 0:
                    accepted.append(queue.popleft())
                    self.state_index = target
                    moved = True
        return accepted


def case_study_rows() -> list[Row]:
    """The full three-panel event timeline, one row per event."""
    model = case_study_model()
    space = enumerate_state_space(model)
    rows: list[Row] = []

    def fmt(values) -> str:
        return " ".join(str(v) for v in values)

    for panel in PANELS:
        if panel == "single-queue":
            controller = GreedySingleQueueController(space, INITIAL_STATE)
        elif panel == "homogeneous-queues":
            controller = _HomogeneousQueues(space, INITIAL_STATE)
        else:
            strategy = constant_strategy(space, (1, 2, 0))
            controller = MultiQueueController(space, strategy, INITIAL_STATE)
        rows.append((panel, 0.0, "start", 0, -1,
                     fmt(controller.state), fmt(controller.queue_lengths())))
        for request_id, (time, slice_type) in enumerate(ARRIVALS, start=1):
            record = RequestRecord(request_id, slice_type, time)
            record.join_time = time
            if panel == "single-queue":
                controller.queue.append(record)
            elif panel == "homogeneous-queues":
                controller.enqueue(record)
            else:
                controller.queues[slice_type - 1].append(record)
            rows.append((panel, time, "join", slice_type, request_id,
                         fmt(controller.state), fmt(controller.queue_lengths())))
            for accepted in controller.serve_queues():
                rows.append((panel, time, "accept", accepted.slice_type,
                             accepted.request_id,
                             fmt(controller.state), fmt(controller.queue_lengths())))
    return rows


def accepted_by_panel(rows: list[Row]) -> dict[str, list[int]]:
    """Request ids accepted in each panel, in acceptance order."""
    out: dict[str, list[int]] = {panel: [] for panel in PANELS}
    for panel, _, event, _, request_id, _, _ in rows:
        if event == "accept":
            out[panel].append(request_id)
    return out


def render_case_study(rows: list[Row] | None = None) -> str:
    """Fixed-format text rendering of the three panels."""
    if rows is None:
        rows = case_study_rows()
    lines = []
    for panel in PANELS:
        lines.append(f"== {panel} ==")
        for p, time, event, slice_type, request_id, state, queues in rows:
            if p != panel:
                continue
            rid = "-" if request_id < 0 else str(request_id)
            lines.append(
                f"t={time:.1f} {event:<7} type={slice_type} request={rid} "
                f"s=[{state}] queues=[{queues}]"
            )
        lines.append("")
    return "\n".join(lines)
