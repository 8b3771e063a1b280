"""Independent oracles used by the test suite.

Everything here is deliberately written against the plain definitions
(brute-force enumeration, direct balance equations, a standalone event loop
on stdlib ``random``) so it shares no code path with the package.
"""

from __future__ import annotations

import heapq
import itertools
import random
from dataclasses import dataclass


def brute_force_state_space(pool, bundles):
    """All feasible states by double loop over the per-type rectangle.

    Returns (feasible, admissible) as sets of tuples.
    """
    n_types = len(bundles)
    tol = 1e-9
    bounds = []
    for col in bundles:
        bound = None
        for c, r in zip(col, pool):
            if c > 0:
                b = int((r + tol * max(1.0, r)) // c)
                bound = b if bound is None else min(bound, b)
        bounds.append(bound if bound is not None else 0)

    def feasible(s):
        for m, r in enumerate(pool):
            used = sum(s[n] * bundles[n][m] for n in range(n_types))
            if used - r > tol * max(1.0, r):
                return False
        return True

    states = set()
    for s in itertools.product(*(range(b + 1) for b in bounds)):
        if feasible(s):
            states.add(s)
    admissible = set()
    for s in states:
        for n in range(n_types):
            bumped = s[:n] + (s[n] + 1,) + s[n + 1:]
            if bumped in states:
                admissible.add(s)
                break
    return states, admissible


def birth_death_pmf(lam, mu, alpha, beta, max_length=400):
    """Steady state of the impatient queue from the balance equations.

    Up-rate from l is lam * join(l); down-rate from l+1 is mu + l * alpha
    (the request at the head does not abandon).
    """
    weights = [1.0]
    for l in range(max_length):
        join = 1.0 if l == 0 else min(1.0, beta / l)
        weights.append(weights[-1] * lam * join / (mu + l * alpha))
    total = sum(weights)
    return [w / total for w in weights]


@dataclass
class MicroResult:
    pmf: list[float]
    arrivals: int
    served: int
    joined: int
    served_joiners: int
    reneged: int
    wait_sum_joiners: float
    wait_sum_accepted: float

    @property
    def p_accept(self):
        return self.served / self.arrivals

    @property
    def p_accept_and_join(self):
        return self.served_joiners / self.arrivals

    @property
    def p_accept_given_join(self):
        return self.served_joiners / self.joined

    @property
    def mean_wait_joiners(self):
        return self.wait_sum_joiners / (self.served_joiners + self.reneged)

    @property
    def mean_wait_accepted(self):
        return self.wait_sum_accepted / self.served_joiners


def micro_queue(lam, mu, horizon, seed, alpha=0.0, beta=None, max_state=200):
    """Isolated single-server queue, optionally with balking and reneging.

    The request in service cannot abandon; arrivals balk on the in-system
    count; waits run from joining until service starts (or abandonment).
    """
    rng = random.Random(seed)
    heap = []
    seq = 0

    def push(t, kind, ident):
        nonlocal seq
        seq += 1
        heapq.heappush(heap, (t, seq, kind, ident))

    impatient = alpha > 0.0 and beta is not None
    push(rng.expovariate(lam), "arrival", None)
    in_service = None
    waiting = {}
    order = []
    occupancy = [0.0] * (max_state + 1)
    last = 0.0
    next_id = 0
    arrivals = served = joined = served_joiners = reneged = 0
    wait_joiners = wait_accepted = 0.0

    while heap:
        t, _, kind, ident = heapq.heappop(heap)
        if t > horizon:
            break
        in_system = (1 if in_service is not None else 0) + len(order)
        occupancy[min(in_system, max_state)] += t - last
        last = t
        if kind == "arrival":
            arrivals += 1
            if in_system == 0:
                in_service = next_id
                served += 1
                push(t + rng.expovariate(mu), "done", next_id)
            else:
                join_prob = 1.0 if not impatient else min(1.0, beta / in_system)
                if rng.random() < join_prob:
                    joined += 1
                    waiting[next_id] = t
                    order.append(next_id)
                    if impatient:
                        push(t + rng.expovariate(alpha), "renege", next_id)
            next_id += 1
            push(t + rng.expovariate(lam), "arrival", None)
        elif kind == "done":
            if in_service == ident:
                in_service = None
                while order:
                    j = order.pop(0)
                    if j in waiting:
                        w = t - waiting.pop(j)
                        wait_joiners += w
                        wait_accepted += w
                        served += 1
                        served_joiners += 1
                        in_service = j
                        push(t + rng.expovariate(mu), "done", j)
                        break
        else:  # renege
            if ident in waiting:
                wait_joiners += t - waiting.pop(ident)
                order.remove(ident)
                reneged += 1

    in_system = (1 if in_service is not None else 0) + len(order)
    occupancy[min(in_system, max_state)] += horizon - last
    total = sum(occupancy)
    return MicroResult(
        pmf=[x / total for x in occupancy],
        arrivals=arrivals,
        served=served,
        joined=joined,
        served_joiners=served_joiners,
        reneged=reneged,
        wait_sum_joiners=wait_joiners,
        wait_sum_accepted=wait_accepted,
    )


def stationary_by_linear_solve(matrix):
    """Stationary vector of an irreducible chain via a dense linear solve."""
    import numpy as np

    m = np.asarray(matrix, dtype=float)
    n = m.shape[0]
    a = np.vstack([(m.T - np.eye(n))[:-1], np.ones(n)])
    b = np.zeros(n)
    b[-1] = 1.0
    return np.linalg.lstsq(a, b, rcond=None)[0]


def kld_direct(probabilities, p_hat):
    """Direct-summation divergence against a geometric pmf, natural log."""
    import math

    total = 0.0
    for k, p in enumerate(probabilities):
        if p <= 0.0:
            continue
        q = (1.0 - p_hat) ** k * p_hat
        total += p * math.log(p / q)
    return total


# Frozen high-precision reference values (60-digit series/gamma arithmetic).
BESSEL_I_REFERENCE = (
    (0.0, 0.0, 1.0),
    (0.0, 0.1, 1.0025015629340956),
    (0.0, 1.0, 1.2660658777520083),
    (0.0, 2.0, 2.2795853023360673),
    (1.0, 2.0, 1.5906368546373291),
    (1.0, 0.5, 0.25789430539089632),
    (2.0, 3.0, 2.2452124409299512),
    (0.5, 1.0, 0.93767488824548765),
    (2.5, 4.0, 4.757626874823473),
    (7.3, 2.0, 0.00012144446970876785),
    (10.0, 14.0, 3725.2263889849745),
    (15.0, 30.0, 18666616963.418607),
)

GAMMA_REFERENCE = (
    (0.5, 1.772453850905516),
    (1.0, 1.0),
    (1.5, 0.88622692545275801),
    (2.0, 1.0),
    (3.7, 4.170651783796604),
    (5.0, 24.0),
    (10.3, 716430.68906237641),
    (20.0, 1.21645100408832e+17),
    (35.5, 1.7403941995805607e+39),
    (50.0, 6.0828186403426756e+62),
)

#: Divergence of the uniform distribution on bins 0..9 from its fitted geometric.
KLD_UNIFORM_10_REFERENCE = 0.30518112882405978
