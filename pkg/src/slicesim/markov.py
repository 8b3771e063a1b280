"""Strategy evaluation through a finite Markov chain on the system states.

From queue-empty probabilities, the chance that a serving opportunity in
state s accepts type n is the scan product: every queue preferred over n is
empty and queue n is not.  Two chain constructions are provided:

* ``acceptance-only``: states move only along acceptance edges, residual
  mass stays on the self-loop.  Taken literally this chain is absorbing at
  the feasibility boundary; it is kept for reference.
* ``with-releases`` (default): an embedded jump chain at event epochs.  From
  state s the next event is a release of type n with weight proportional to
  its release flow (release rate times active count), or a serving
  opportunity with weight equal to a configurable opportunity rate
  (default: the total arrival rate), resolved by the scan product above.

Acceptance mass whose target would leave the feasibility space moves to the
self-loop.  The long-term state distribution is the Cesaro average of the
power sequence, from which expected active-slice counts and per-type
acceptance-rate estimates follow.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ContractViolation
from .slice_model import ResourceModel, StateSpace, SystemState
from .strategy import RESERVE, PreferenceMatrix

WITH_RELEASES = "with-releases"
ACCEPTANCE_ONLY = "acceptance-only"

ROW_SUM_TOL = 1e-12


def _check_probs(queue_empty_probs: Sequence[float], num_types: int) -> list[float]:
    probs = [float(p) for p in queue_empty_probs]
    if len(probs) != num_types:
        raise ContractViolation(
            f"need one queue-empty probability per type ({num_types}), got {len(probs)}"
        )
    for p in probs:
        if not 0.0 <= p <= 1.0:
            raise ContractViolation(f"queue-empty probabilities must lie in [0, 1], got {p}")
    return probs


def acceptance_distribution(strategy: PreferenceMatrix, space: StateSpace,
                            queue_empty_probs: Sequence[float],
                            state_index: int) -> list[float]:
    """Probability that a serving opportunity in the given state accepts each type.

    Entry 0 is the no-acceptance (self-loop) mass; entries 1..N the per-type
    acceptance masses.  Non-admissible states self-loop with probability 1;
    acceptance mass with an infeasible target is reassigned to entry 0.
    """
    n_types = space.model.num_types
    probs = _check_probs(queue_empty_probs, n_types)
    out = [0.0] * (n_types + 1)
    if not space.is_admissible_index(state_index):
        out[RESERVE] = 1.0
        return out
    prefix = 1.0
    for pref in strategy.column(state_index):
        if pref == RESERVE:
            out[RESERVE] += prefix  # 1 - p_0(0) with p_0(0) = 0
            break
        take = prefix * (1.0 - probs[pref - 1])
        if space.increment_index(state_index, pref) >= 0:
            out[pref] += take
        else:
            out[RESERVE] += take
        prefix *= probs[pref - 1]
    return out


def transition_probability(strategy: PreferenceMatrix, space: StateSpace,
                           queue_empty_probs: Sequence[float],
                           state: SystemState | int, slice_type: int) -> float:
    """Probability that the next acceptance step moves s to s plus one type-n slice.

    ``slice_type`` 0 queries the self-loop (no acceptance) mass.
    """
    index = state if isinstance(state, int) else space.index_of(state)
    if not 0 <= slice_type <= space.model.num_types:
        raise ContractViolation(
            f"slice type must lie in 0..{space.model.num_types}, got {slice_type}"
        )
    return acceptance_distribution(strategy, space, queue_empty_probs, index)[slice_type]


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic transition matrix over the full state space."""

    matrix: np.ndarray
    mode: str

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ContractViolation("transition matrix must be square")
        if np.any(m < -ROW_SUM_TOL):
            raise ContractViolation("transition matrix has negative entries")
        gaps = np.abs(m.sum(axis=1) - 1.0)
        if np.any(gaps > 1e-9):
            raise ContractViolation(f"rows must sum to 1 (max gap {gaps.max():.3g})")

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def build_transition_matrix(strategy: PreferenceMatrix, space: StateSpace,
                            queue_empty_probs: Sequence[float],
                            release_rates: Sequence[float] | None = None,
                            mode: str = WITH_RELEASES,
                            opportunity_rate: float | None = None) -> TransitionMatrix:
    """Assemble the chain over all states in the chosen construction mode."""
    n_states = len(space)
    n_types = space.model.num_types
    if mode not in (WITH_RELEASES, ACCEPTANCE_ONLY):
        raise ContractViolation(f"unknown transition-matrix mode {mode!r}")
    if release_rates is None:
        release_rates = space.model.release_rates
    release_rates = [float(r) for r in release_rates]
    if len(release_rates) != n_types:
        raise ContractViolation("need one release rate per type")
    if opportunity_rate is None:
        opportunity_rate = sum(space.model.arrival_rates)
    if opportunity_rate < 0.0:
        raise ContractViolation("opportunity rate must be >= 0")

    psi = np.zeros((n_states, n_states))
    for i in range(n_states):
        accept = acceptance_distribution(strategy, space, queue_empty_probs, i)
        if mode == ACCEPTANCE_ONLY:
            psi[i, i] += accept[RESERVE]
            for n in range(1, n_types + 1):
                if accept[n] > 0.0:
                    psi[i, space.increment_index(i, n)] += accept[n]
            continue
        s = space.state_at(i)
        release_flows = [release_rates[n] * s[n] for n in range(n_types)]
        total = sum(release_flows) + opportunity_rate
        if total <= 0.0:
            psi[i, i] = 1.0
            continue
        for n in range(n_types):
            if release_flows[n] > 0.0:
                psi[i, space.release_index(i, n + 1)] += release_flows[n] / total
        scale = opportunity_rate / total
        psi[i, i] += scale * accept[RESERVE]
        for n in range(1, n_types + 1):
            if accept[n] > 0.0:
                psi[i, space.increment_index(i, n)] += scale * accept[n]

    return TransitionMatrix(matrix=psi, mode=mode)


@dataclass(frozen=True)
class StateDistribution:
    """A probability vector over the full state space."""

    probabilities: np.ndarray
    initial: np.ndarray
    converged: bool

    def __post_init__(self) -> None:
        p = np.asarray(self.probabilities, dtype=float)
        object.__setattr__(self, "probabilities", p)
        if np.any(p < -1e-12):
            raise ContractViolation("distribution has negative entries")
        if abs(p.sum() - 1.0) > 1e-9:
            raise ContractViolation(f"distribution sums to {p.sum()}, not 1")


def initial_distribution(space: StateSpace, policy: str | Sequence[float] = "empty") -> np.ndarray:
    """Point mass on the empty state, uniform over all or fully-utilized states, or explicit."""
    n = len(space)
    if isinstance(policy, str):
        if policy == "empty":
            p = np.zeros(n)
            p[space.index_of((0,) * space.model.num_types)] = 1.0
            return p
        if policy == "uniform":
            return np.full(n, 1.0 / n)
        if policy == "full":
            p = np.zeros(n)
            low = space.num_admissible
            if low == n:
                raise ContractViolation("model has no fully-utilized state")
            p[low:] = 1.0 / (n - low)
            return p
        raise ContractViolation(f"unknown initial distribution {policy!r}")
    p = np.asarray(policy, dtype=float)
    if p.shape != (n,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise ContractViolation("explicit initial distribution must be a probability vector")
    return p


def long_term_distribution(psi: TransitionMatrix | np.ndarray, p_init: np.ndarray,
                           tolerance: float = 1e-8,
                           max_steps: int = 10**5) -> StateDistribution:
    """Cesaro average of the power sequence seeded by ``p_init``.

    Convergent and 2-periodic power sequences short-circuit to their exact
    Cesaro limit; otherwise successive running averages are compared in L1
    until they differ by less than the tolerance.  Hitting ``max_steps``
    returns the current average flagged as not converged.
    """
    m = psi.matrix if isinstance(psi, TransitionMatrix) else np.asarray(psi, dtype=float)
    v = np.asarray(p_init, dtype=float)
    if v.shape != (m.shape[0],):
        raise ContractViolation("initial distribution does not match the matrix")
    avg = v.copy()
    prev = None
    for k in range(1, max_steps + 1):
        v_next = v @ m
        if np.abs(v_next - v).sum() < tolerance:
            return StateDistribution(v_next, p_init, True)
        if prev is not None and np.abs(v_next - prev).sum() < tolerance:
            return StateDistribution((v_next + v) / 2.0, p_init, True)
        new_avg = (avg * k + v_next) / (k + 1)
        if np.abs(new_avg - avg).sum() < tolerance:
            return StateDistribution(new_avg, p_init, True)
        prev, v, avg = v, v_next, new_avg
    return StateDistribution(avg / avg.sum(), p_init, False)


def expected_active_slices(distribution: StateDistribution | np.ndarray,
                           space: StateSpace) -> tuple[float, ...]:
    """Expected active-slice count per type under a state distribution."""
    p = (distribution.probabilities if isinstance(distribution, StateDistribution)
         else np.asarray(distribution, dtype=float))
    counts = np.array(space.states, dtype=float)
    return tuple(float(x) for x in p @ counts)


def estimate_acceptance_rates(distribution: StateDistribution | np.ndarray,
                              space: StateSpace,
                              release_rates: Sequence[float] | None = None) -> tuple[float, ...]:
    """Per-type acceptance-rate estimates: release rate times expected active count."""
    if release_rates is None:
        release_rates = space.model.release_rates
    s_bar = expected_active_slices(distribution, space)
    return tuple(eta * s for eta, s in zip(release_rates, s_bar))


def estimate_mean_utility(acceptance_rates: Sequence[float],
                          release_rates: Sequence[float],
                          utility_rates: Sequence[float]) -> float:
    """Long-run mean utility rate from per-type acceptance and release rates."""
    return sum(mu * u / eta for mu, eta, u in
               zip(acceptance_rates, release_rates, utility_rates))


@dataclass(frozen=True)
class SteadyStateEstimate:
    """Pipeline output: distribution, acceptance rates, and utility estimate."""

    distribution: StateDistribution
    acceptance_rates: tuple[float, ...]
    mean_active_slices: tuple[float, ...]
    utility_rate: float


def strategy_steady_state(model: ResourceModel, space: StateSpace,
                          strategy: PreferenceMatrix,
                          queue_empty_probs: Sequence[float],
                          mode: str = WITH_RELEASES,
                          opportunity_rate: float | None = None,
                          p_init: str | Sequence[float] = "full",
                          tolerance: float = 1e-8,
                          max_steps: int = 10**5) -> SteadyStateEstimate:
    """Full evaluation pipeline for one strategy given queue-empty probabilities."""
    psi = build_transition_matrix(strategy, space, queue_empty_probs,
                                  model.release_rates, mode, opportunity_rate)
    dist = long_term_distribution(psi, initial_distribution(space, p_init),
                                  tolerance, max_steps)
    s_bar = expected_active_slices(dist, space)
    mu_hat = tuple(eta * s for eta, s in zip(model.release_rates, s_bar))
    utility = estimate_mean_utility(mu_hat, model.release_rates, model.utility_rates)
    return SteadyStateEstimate(
        distribution=dist,
        acceptance_rates=mu_hat,
        mean_active_slices=s_bar,
        utility_rate=utility,
    )
