"""Continuous-time discrete-event simulation of the admission controller.

Per-type Poisson request arrivals, exponential slice lifetimes, optional
balking (join probability shrinking with queue length) and reneging
(exponential patience deadlines).  Each run is driven by independent, seeded
PCG64 streams per purpose (initial state, one arrival stream and one mark
stream per type), so two policies given the same seed consume identical
randomness and can be compared with common random numbers.

Stream layout: ``SeedSequence(seed)`` spawns ``1 + 2N`` children in the order
initial-state, arrivals of type 1..N, marks of type 1..N; every arrival draws
exactly one lifetime and two uniforms from its type's mark stream regardless
of toggles.  Monte-Carlo round ``i`` of master seed ``m`` runs with seed
``SeedSequence([m, i]).generate_state(1)``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .controller import (
    ACCEPTED,
    BALKED,
    RENEGED,
    WAITING,
    GreedySingleQueueController,
    MultiQueueController,
    RequestRecord,
)
from .errors import ContractViolation
from .slice_model import ResourceModel, StateSpace, SystemState, enumerate_state_space
from .strategy import RESERVE, PreferenceMatrix

RNG_METADATA = {
    "generator": "numpy PCG64",
    "streams": "SeedSequence(seed) spawning [initial-state, arrivals x N, marks x N]",
    "rounds": "round i uses SeedSequence([master_seed, i]).generate_state(1)",
}

MULTI_QUEUE = "multi-queue"
GREEDY_SINGLE_QUEUE = "greedy-single-queue"


@dataclass(frozen=True)
class SimConfig:
    """Everything one simulation round needs."""

    model: ResourceModel
    strategy: PreferenceMatrix | None = None
    discipline: str = MULTI_QUEUE
    horizon: float = 40.0
    warmup: float = 0.0
    seed: int = 0
    initial_state: str | tuple[int, ...] = "empty"
    balking: bool = False
    reneging: bool = False
    record_events: bool = True
    check_invariants: bool = False

    def __post_init__(self) -> None:
        if not self.horizon > self.warmup >= 0.0:
            raise ContractViolation("need horizon > warmup >= 0")
        if self.discipline not in (MULTI_QUEUE, GREEDY_SINGLE_QUEUE):
            raise ContractViolation(f"unknown discipline {self.discipline!r}")
        if isinstance(self.initial_state, str):
            if self.initial_state not in ("empty", "full"):
                raise ContractViolation(
                    f"initial_state must be 'empty', 'full' or an explicit state, "
                    f"got {self.initial_state!r}"
                )


@dataclass
class SimTrace:
    """Raw material of one round: event log, request records, accumulators."""

    num_types: int
    horizon: float
    warmup: float
    initial_state: SystemState
    utility_rates: tuple[float, ...] = ()
    final_state: SystemState = ()
    events: list[tuple[float, str, int, int, SystemState, tuple[int, ...]]] | None = None
    records: list[RequestRecord] = field(default_factory=list)
    accept_times: list[list[float]] = field(default_factory=list)
    state_time: dict[int, float] = field(default_factory=dict)
    slice_time: list[float] = field(default_factory=list)
    queue_time: list[float] = field(default_factory=list)
    # in-window event counts per type
    arrivals: list[int] = field(default_factory=list)
    joined: list[int] = field(default_factory=list)
    balked: list[int] = field(default_factory=list)
    accepted: list[int] = field(default_factory=list)
    reneged: list[int] = field(default_factory=list)
    wait_sum: list[float] = field(default_factory=list)
    wait_count: list[int] = field(default_factory=list)
    # whole-run counts per type (conservation)
    total_arrivals: list[int] = field(default_factory=list)
    total_joined: list[int] = field(default_factory=list)
    total_balked: list[int] = field(default_factory=list)
    total_accepted: list[int] = field(default_factory=list)
    total_reneged: list[int] = field(default_factory=list)
    final_queue_lengths: tuple[int, ...] = ()
    # queue-empty measurements at arrival epochs (multi-queue only)
    arrival_epochs: int = 0
    empty_marginal: list[int] = field(default_factory=list)
    scan_observed: list[int] = field(default_factory=list)
    scan_empty: list[int] = field(default_factory=list)

    def iat_samples(self, slice_type: int) -> list[float]:
        """Inter-acceptance times of one queue inside the measurement window."""
        times = [t for t in self.accept_times[slice_type - 1]
                 if self.warmup < t <= self.horizon]
        return [b - a for a, b in zip(times, times[1:])]


@dataclass
class MetricsReport:
    """The three headline metrics plus per-type detail for one round."""

    seed: int
    duration: float
    utility_rate_mean: float
    wait_mean: float
    admission_rate: float
    no_arrivals: bool
    acceptance_rates: tuple[float, ...]
    queue_length_means: tuple[float, ...]
    wait_means: tuple[float, ...]
    mean_active_slices: tuple[float, ...]
    arrivals: tuple[int, ...]
    joined: tuple[int, ...]
    balked: tuple[int, ...]
    accepted: tuple[int, ...]
    reneged: tuple[int, ...]
    still_waiting: tuple[int, ...]
    arrival_epochs: int = 0
    empty_marginal: tuple[int, ...] = ()
    scan_observed: tuple[int, ...] = ()
    scan_empty: tuple[int, ...] = ()


def instantaneous_utility(s: Sequence[int], model: ResourceModel) -> float:
    """Utility rate of the active-slice vector: sum of per-slice utility rates."""
    return float(sum(count * t.utility_rate for count, t in zip(s, model.types)))


def _draw_initial_index(space: StateSpace, policy: str | tuple[int, ...],
                        rng: np.random.Generator) -> int:
    if isinstance(policy, tuple) or isinstance(policy, list):
        return space.index_of(policy)
    if policy == "empty":
        return space.index_of((0,) * space.model.num_types)
    # "full": uniform over fully-utilized states (no increment of any type fits)
    low, high = space.num_admissible, len(space)
    if low == high:
        raise ContractViolation("model has no fully-utilized state to start from")
    return int(rng.integers(low, high))


def run(config: SimConfig, space: StateSpace | None = None) -> tuple[SimTrace, MetricsReport]:
    """Execute one round over [0, horizon] and report metrics over (warmup, horizon]."""
    model = config.model
    n_types = model.num_types
    if config.discipline == MULTI_QUEUE and config.strategy is None:
        raise ContractViolation("multi-queue simulation needs a strategy")
    if space is None:
        space = enumerate_state_space(model)

    root = np.random.SeedSequence(config.seed)
    children = root.spawn(1 + 2 * n_types)
    init_rng = np.random.Generator(np.random.PCG64(children[0]))
    arrival_rngs = [np.random.Generator(np.random.PCG64(children[1 + n])) for n in range(n_types)]
    mark_rngs = [np.random.Generator(np.random.PCG64(children[1 + n_types + n])) for n in range(n_types)]

    initial_index = _draw_initial_index(space, config.initial_state, init_rng)
    initial_state = space.state_at(initial_index)

    if config.discipline == MULTI_QUEUE:
        controller = MultiQueueController(space, config.strategy, initial_state)
    else:
        controller = GreedySingleQueueController(space, initial_state)

    trace = SimTrace(
        num_types=n_types,
        horizon=config.horizon,
        warmup=config.warmup,
        initial_state=initial_state,
        utility_rates=model.utility_rates,
        events=[] if config.record_events else None,
        accept_times=[[] for _ in range(n_types)],
        slice_time=[0.0] * n_types,
        queue_time=[0.0] * n_types,
        arrivals=[0] * n_types,
        joined=[0] * n_types,
        balked=[0] * n_types,
        accepted=[0] * n_types,
        reneged=[0] * n_types,
        wait_sum=[0.0] * n_types,
        wait_count=[0] * n_types,
        total_arrivals=[0] * n_types,
        total_joined=[0] * n_types,
        total_balked=[0] * n_types,
        total_accepted=[0] * n_types,
        total_reneged=[0] * n_types,
        empty_marginal=[0] * n_types,
        scan_observed=[0] * n_types,
        scan_empty=[0] * n_types,
    )

    balk_on = [config.balking and model.types[n].balking_willingness is not None
               for n in range(n_types)]
    renege_on = [config.reneging and model.types[n].reneging_rate > 0.0
                 for n in range(n_types)]

    heap: list[tuple[float, int, int, object]] = []
    seq = 0
    EV_ARRIVAL, EV_RELEASE, EV_RENEGE = 0, 1, 2

    def push(t: float, kind: int, payload: object) -> None:
        nonlocal seq
        seq += 1
        heapq.heappush(heap, (t, seq, kind, payload))

    # initial active slices: memoryless lifetimes drawn at t = 0
    for n in range(n_types):
        for _ in range(initial_state[n]):
            push(init_rng.exponential(1.0 / model.types[n].release_rate), EV_RELEASE, n + 1)
    for n in range(n_types):
        rate = model.types[n].arrival_rate
        if rate > 0.0:
            push(arrival_rngs[n].exponential(1.0 / rate), EV_ARRIVAL, n + 1)

    horizon, warmup = config.horizon, config.warmup
    in_window = lambda t: warmup < t <= horizon
    last_t = 0.0
    next_id = 0
    multi = config.discipline == MULTI_QUEUE
    waiting = [0] * n_types  # per-type waiting counts, kept for both disciplines

    def advance(t: float) -> None:
        nonlocal last_t
        lo = last_t if last_t > warmup else warmup
        hi = t if t < horizon else horizon
        if hi > lo:
            dt = hi - lo
            s = controller.state
            trace.state_time[controller.state_index] = (
                trace.state_time.get(controller.state_index, 0.0) + dt
            )
            for n in range(n_types):
                trace.slice_time[n] += s[n] * dt
                trace.queue_time[n] += waiting[n] * dt
        last_t = t

    def log(t: float, kind: str, slice_type: int, request_id: int) -> None:
        if trace.events is not None:
            lengths = controller.queue_lengths()
            trace.events.append((t, kind, slice_type, request_id, controller.state, lengths))

    def settle(t: float, accepted: list[RequestRecord]) -> None:
        for rec in accepted:
            rec.outcome = ACCEPTED
            rec.outcome_time = t
            n = rec.slice_type
            waiting[n - 1] -= 1
            trace.total_accepted[n - 1] += 1
            trace.accept_times[n - 1].append(t)
            if in_window(t):
                trace.accepted[n - 1] += 1
                trace.wait_sum[n - 1] += t - rec.join_time
                trace.wait_count[n - 1] += 1
            push(t + rec.lifetime, EV_RELEASE, n)
            log(t, "accept", n, rec.request_id)

    def measure_epoch(t: float) -> None:
        """Queue-empty observations used by the transition-model pipeline.

        At each arrival epoch (after the join/balk decision) the current
        preference column is scanned in order: every queue seen before the
        first non-empty one contributes an observation, conditional on all
        more-preferred queues having been empty.  Marginal emptiness is
        recorded for every queue as a fallback.
        """
        if in_window(t):
            trace.arrival_epochs += 1
            for n, q in enumerate(controller.queues):
                if not q:
                    trace.empty_marginal[n] += 1
            idx = controller.state_index
            if space.is_admissible_index(idx):
                for pref in config.strategy.column(idx):
                    if pref == RESERVE:
                        break
                    trace.scan_observed[pref - 1] += 1
                    if controller.queues[pref - 1]:
                        break
                    trace.scan_empty[pref - 1] += 1

    while heap:
        t, _, kind, payload = heapq.heappop(heap)
        if t > horizon:
            break
        advance(t)
        if kind == EV_ARRIVAL:
            n = payload
            ty = model.types[n - 1]
            lifetime = mark_rngs[n - 1].exponential(1.0 / ty.release_rate)
            u_balk = mark_rngs[n - 1].random()
            u_patience = mark_rngs[n - 1].random()
            next_id += 1
            rec = RequestRecord(next_id, n, t, lifetime=lifetime)
            trace.records.append(rec)
            trace.total_arrivals[n - 1] += 1
            if in_window(t):
                trace.arrivals[n - 1] += 1
            log(t, "arrival", n, rec.request_id)
            if multi:
                backlog = len(controller.queues[n - 1])
            else:
                backlog = controller.total_queue_length()
            join_prob = 1.0
            if balk_on[n - 1] and backlog >= 1:
                join_prob = min(1.0, ty.balking_willingness / backlog)
            if u_balk < join_prob:
                rec.join_time = t
                waiting[n - 1] += 1
                trace.total_joined[n - 1] += 1
                if in_window(t):
                    trace.joined[n - 1] += 1
                if renege_on[n - 1]:
                    rec.renege_deadline = t - math.log(1.0 - u_patience) / ty.reneging_rate
                    push(rec.renege_deadline, EV_RENEGE, rec)
                if multi:
                    controller.queues[n - 1].append(rec)
                else:
                    controller.queue.append(rec)
                log(t, "join", n, rec.request_id)
                if multi:
                    measure_epoch(t)
                settle(t, controller.serve_queues())
            else:
                rec.outcome = BALKED
                rec.outcome_time = t
                trace.total_balked[n - 1] += 1
                if in_window(t):
                    trace.balked[n - 1] += 1
                log(t, "balk", n, rec.request_id)
                if multi:
                    measure_epoch(t)
            if ty.arrival_rate > 0.0:
                push(t + arrival_rngs[n - 1].exponential(1.0 / ty.arrival_rate), EV_ARRIVAL, n)
        elif kind == EV_RELEASE:
            n = payload
            log(t, "release", n, -1)
            settle(t, controller.handle_release(n))
        else:  # EV_RENEGE
            rec = payload
            if rec.outcome == WAITING:
                controller.remove(rec)
                rec.outcome = RENEGED
                rec.outcome_time = t
                n = rec.slice_type
                waiting[n - 1] -= 1
                trace.total_reneged[n - 1] += 1
                if in_window(t):
                    trace.reneged[n - 1] += 1
                    trace.wait_sum[n - 1] += t - rec.join_time
                    trace.wait_count[n - 1] += 1
                log(t, "renege", n, rec.request_id)
        if config.check_invariants:
            assert not controller.is_transient(), "controller left transient after event"

    advance(horizon)
    trace.final_state = controller.state
    if multi:
        trace.final_queue_lengths = controller.queue_lengths()
    else:
        per_type = [0] * n_types
        for rec in controller.queue:
            per_type[rec.slice_type - 1] += 1
        trace.final_queue_lengths = tuple(per_type)

    return trace, overall_metrics(trace, seed=config.seed)


def overall_metrics(trace: SimTrace, seed: int = 0) -> MetricsReport:
    """Aggregate a trace into the three headline metrics plus per-type detail.

    The overall waiting time is the queue-length-weighted mean of the
    per-queue mean waits; the admission rate is accepted over arrived, with
    the empty-denominator convention of reporting 1 plus a flag.
    """
    n_types = trace.num_types
    duration = trace.horizon - trace.warmup
    mean_active = tuple(x / duration for x in trace.slice_time)
    queue_means = tuple(x / duration for x in trace.queue_time)
    accept_rates = tuple(c / duration for c in trace.accepted)
    wait_means = tuple(
        (s / c if c else 0.0) for s, c in zip(trace.wait_sum, trace.wait_count)
    )
    weight = sum(queue_means)
    if weight > 0.0:
        wait_mean = sum(l * w for l, w in zip(queue_means, wait_means)) / weight
    else:
        wait_mean = 0.0
    total_arrivals = sum(trace.arrivals)
    no_arrivals = total_arrivals == 0
    admission = 1.0 if no_arrivals else sum(trace.accepted) / total_arrivals
    utility = sum(u * m for u, m in zip(trace.utility_rates, mean_active))

    return MetricsReport(
        seed=seed,
        duration=duration,
        utility_rate_mean=utility,
        wait_mean=wait_mean,
        admission_rate=admission,
        no_arrivals=no_arrivals,
        acceptance_rates=accept_rates,
        queue_length_means=queue_means,
        wait_means=wait_means,
        mean_active_slices=mean_active,
        arrivals=tuple(trace.arrivals),
        joined=tuple(trace.joined),
        balked=tuple(trace.balked),
        accepted=tuple(trace.accepted),
        reneged=tuple(trace.reneged),
        still_waiting=trace.final_queue_lengths,
        arrival_epochs=trace.arrival_epochs,
        empty_marginal=tuple(trace.empty_marginal),
        scan_observed=tuple(trace.scan_observed),
        scan_empty=tuple(trace.scan_empty),
    )


@dataclass
class MonteCarloResult:
    """Per-round reports plus pooled per-queue inter-acceptance samples."""

    reports: list[MetricsReport]
    iat_samples: list[list[float]]
    master_seed: int
    rng_info: dict = field(default_factory=lambda: dict(RNG_METADATA))


def derived_seed(master_seed: int, index: int) -> int:
    """Deterministic per-round (or per-strategy) seed from a master seed."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def monte_carlo(config: SimConfig, rounds: int,
                space: StateSpace | None = None) -> MonteCarloResult:
    """Independent rounds with seeds derived from ``config.seed``; pools IATs per queue."""
    if rounds < 1:
        raise ContractViolation("need at least one Monte-Carlo round")
    if space is None:
        space = enumerate_state_space(config.model)
    n_types = config.model.num_types
    reports: list[MetricsReport] = []
    pooled: list[list[float]] = [[] for _ in range(n_types)]
    for i in range(rounds):
        round_config = replace(config, seed=derived_seed(config.seed, i),
                               record_events=False)
        trace, report = run(round_config, space)
        reports.append(report)
        for n in range(1, n_types + 1):
            pooled[n - 1].extend(trace.iat_samples(n))
    return MonteCarloResult(reports=reports, iat_samples=pooled, master_seed=config.seed)


def pooled_queue_empty_probs(reports: Sequence[MetricsReport]) -> tuple[float, ...]:
    """Measured queue-empty probabilities pooled over rounds.

    Uses the preference-scan (prefix-conditional) observations; queues the
    scan never reached fall back to marginal emptiness at arrival epochs, and
    to 1 when there were no epochs at all.
    """
    if not reports:
        raise ContractViolation("need at least one report")
    n_types = len(reports[0].acceptance_rates)
    probs = []
    epochs = sum(r.arrival_epochs for r in reports)
    for n in range(n_types):
        observed = sum(r.scan_observed[n] for r in reports)
        empty = sum(r.scan_empty[n] for r in reports)
        if observed > 0:
            probs.append(empty / observed)
        elif epochs > 0:
            probs.append(sum(r.empty_marginal[n] for r in reports) / epochs)
        else:
            probs.append(1.0)
    return tuple(probs)
